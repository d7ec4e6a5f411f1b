"""The eight acceptance criteria, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line (also repeated in the pytest
terminal summary) and then asserts the verdict.
"""
from __future__ import annotations

import copy
import itertools
import json
import logging
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import VERDICTS
from oracles import brute_force_values, central_diff, drive_next, rel_err
from schema_engine import Simulation, load_config, parse_config, scenario_path
from schema_engine.cli import main as cli_main
from schema_engine.config import list_scenarios
from schema_engine.constructor import ConstructionEvent, EventKind, construct
from schema_engine.core import Role, check_structure
from schema_engine.drives import Drive, DriveKind, step_drive
from schema_engine.goals import EpisodeStep, ValueStore, backup_episode
from schema_engine.mappings import make_mapping

SEEDS = range(10)


@pytest.fixture(autouse=True)
def quiet():
    logging.disable(logging.WARNING)
    yield
    logging.disable(logging.NOTSET)


def verdict(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} [{n}] {title}: {detail}"
    VERDICTS.append(line)
    print(line)
    assert ok, line


def scenario_doc(name):
    return json.loads(scenario_path(name).read_text())


# 1 -------------------------------------------------------------------------------

def test_1_cause_effect_exact_recovery():
    cfg = load_config(scenario_path("grip-world"))
    truth = {("B", "1", 3), ("C", "2", 2)}
    start = time.perf_counter()
    found = []
    for seed in SEEDS:
        sim = Simulation(cfg, seed)
        env_truth = sim.env.ground_truth()
        by_effector = {s.effector: s.id for s in cfg.schemas if s.effector}
        by_receptor = {s.receptor: s.id for s in cfg.schemas if s.receptor}
        assert {(by_effector[e], by_receptor[r], tau) for e, r, tau in env_truth} == truth
        sim.run(500, record=False)
        a = sim.agent
        found.append({(a.base(y), a.base(x), tau) for x, y, tau in a.relations.harvested})
    elapsed = time.perf_counter() - start
    exact = sum(f == truth for f in found)
    false_pos = sum(len(f - truth) for f in found)
    ok = exact == len(SEEDS) and elapsed < 5.0
    verdict(1, "cause-effect exact recovery",
            ok, f"{exact}/{len(SEEDS)} seeds exact, {false_pos} false positives, {elapsed:.2f}s (< 5s)")


# 2 -------------------------------------------------------------------------------

def test_2_gradient_correctness():
    start = time.perf_counter()
    worst = {}
    rng = np.random.default_rng(2024)
    slots = (("effect", 3), ("cause", 2), ("context", 1))
    for family in ("linear", "tanh"):
        worst[family] = 0.0
        for _ in range(100):
            m = make_mapping(family, slots, 3, rng, hidden=6)
            m = m.with_params({k: rng.uniform(-1, 1, v.shape) for k, v in m.params().items()})
            u = rng.normal(size=m.in_dim)
            w = rng.normal(size=m.out_dim)
            # parameter gradients of the scalar w . f(u)
            grads = m.gradients(u, w)
            for name, value in m.params().items():
                f = lambda p, name=name: float(w @ m.with_params({**m.params(), name: p}).forward(u))  # noqa: E731
                fd = central_diff(f, value, 1e-5).reshape(value.shape)
                worst[family] = max(worst[family], rel_err(grads[name], fd))
            # input Jacobian
            fd = central_diff(m.forward, u, 1e-5)
            worst[family] = max(worst[family], rel_err(m.input_jacobian(u), fd))
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-5 and elapsed < 10.0
    verdict(2, "gradient correctness", ok,
            f"max rel err linear {worst['linear']:.1e}, tanh {worst['tanh']:.1e} (<= 1e-5) "
            f"over 100 points each, {elapsed:.2f}s (< 10s)")


# 3 -------------------------------------------------------------------------------

def test_3_distal_learning_convergence():
    cfg = load_config(scenario_path("linear-plant"))
    period = cfg.env_params["goal_ticks"] + cfg.env_params["rest_ticks"]
    start = time.perf_counter()
    converged, monotone, finals = 0, 0, []
    for seed in SEEDS:
        sim = Simulation(cfg, seed)
        sim.run(500 * period, record=False)
        per_episode = {}
        for t, _, err in sim.agent.monitor.performance_samples:
            per_episode.setdefault(t // period, []).append(err)
        last = per_episode.get(499, [])
        final = max(last) if last else float("inf")
        finals.append(final)
        converged += final < 1e-2
        means = [m for _, m in sim.agent.monitor.performance_means()]
        monotone += len(means) > 1 and all(b <= a * 1.05 for a, b in zip(means, means[1:]))
    elapsed = time.perf_counter() - start
    ok = converged == len(SEEDS) and monotone == len(SEEDS) and elapsed < 30.0
    verdict(3, "distal-learning convergence", ok,
            f"{converged}/{len(SEEDS)} seeds with final-episode error < 1e-2 (worst {max(finals):.1e}), "
            f"{monotone}/{len(SEEDS)} monotone per epoch within 5%, {elapsed:.1f}s (< 30s)")


# 4 -------------------------------------------------------------------------------

def random_episode(rng):
    n_states = int(rng.integers(1, 7))
    n_ticks = int(rng.integers(1, n_states + 1))
    # split n_states into n_ticks non-empty groups
    cuts = sorted(rng.choice(np.arange(1, n_states), n_ticks - 1, replace=False)) if n_ticks > 1 else []
    sizes = np.diff([0, *cuts, n_states])
    pool = [f"s{i}" for i in range(int(rng.integers(n_states, 2 * n_states + 1)))]
    states = [tuple(rng.choice(pool, int(k), replace=False)) for k in sizes]
    rewards = [Fraction(int(rng.integers(0, 5)), 4) for _ in states]
    keys = sorted({s for row in states for s in row})
    c = {(a, b): Fraction(int(rng.integers(0, 4)), 3) for a in keys for b in keys if rng.random() < 0.7}
    discount = Fraction(int(rng.integers(1, 10)), 10)
    return states, rewards, c, discount


def test_4_value_backup_oracle():
    rng = np.random.default_rng(4)
    exact = 0
    for _ in range(1000):
        states, rewards, c, discount = random_episode(rng)
        t0 = int(rng.integers(0, 50))
        ticks = [t0 + i for i in range(len(states))]
        store = ValueStore(discount, c=dict(c))
        backup_episode(store, [EpisodeStep(t, r, s) for t, r, s in zip(ticks, rewards, states)])
        exact += store.V == brute_force_values(ticks, states, rewards, c, discount)
    verdict(4, "value-backup oracle equivalence", exact == 1000,
            f"{exact}/1000 random episodes (<= 6 states) identical to path enumeration in exact arithmetic")


# 5 -------------------------------------------------------------------------------

def test_5_self_repair():
    doc = scenario_doc("grip-lesion")
    lesion = doc["lesions"][0]
    onset, tau_grip = lesion["onset"], doc["environment"]["params"]["tau_grip"]
    recovered, details = 0, []
    for seed in SEEDS:
        sim = Simulation(parse_config(doc), seed)
        recs = sim.run()
        trained = any(r["constructions"] for r in recs[:onset])
        by_tick = {r["tick"]: r for r in recs}
        # count only grasps whose command was issued after the lesion, through the override
        hits = [r["tick"] for r in recs
                if onset + tau_grip <= r["tick"] <= onset + 50 and r["reward"] > 0
                and any(s.endswith("'") for s in by_tick[r["tick"] - tau_grip]["modulated"])]
        recovered += trained and bool(hits)
        details.append(hits[0] - onset if hits else None)
    control = copy.deepcopy(doc)
    control["lesions"][0]["onset"] = 0
    relapsed = 0
    for seed in SEEDS:
        recs = Simulation(parse_config(control), seed).run()
        relapsed += any(r["reward"] > 0 for r in recs)
    ok = recovered == len(SEEDS) and relapsed == 0
    lat = [d for d in details if d is not None]
    verdict(5, "self-repair after lesion", ok,
            f"{recovered}/{len(SEEDS)} seeds re-achieve the goal within 50 ticks via the override "
            f"(latency {min(lat, default=-1)}-{max(lat, default=-1)} ticks); "
            f"untrained control achieved it in {relapsed}/{len(SEEDS)} seeds")


# 6 -------------------------------------------------------------------------------

def test_6_construction_set_algebra():
    checked, failures = 0, []
    for name in list_scenarios():
        cfg = load_config(scenario_path(name))
        for seed in range(3):
            sim = Simulation(cfg, seed)
            a = sim.agent
            roster = set(a.schemas)
            for _ in range(cfg.horizon):
                rec = sim.step()
                check_structure(a.schemas, a.connections, a.support)
                for c in rec["constructions"]:
                    checked += 1
                    added, removed = set(c["added"]), set(c["removed"])
                    if set(c["after"]) != (set(c["before"]) | added) - removed or set(c["before"]) != roster:
                        failures.append((name, seed, c["tick"], "set equation"))
                    roster = set(c["after"])
                    roles = sorted(a.schemas[s].role.value for s in added)
                    rebuilt = [s for s in added if a.base(s) in removed]
                    if len(removed) != 1 or len(rebuilt) != 1 or \
                            sorted(r for r in roles if r in ("dual", "predictive")) != ["dual", "predictive"]:
                        failures.append((name, seed, c["tick"], "roles"))
                    # double fire: the same event again changes nothing
                    ev = c["event"]
                    again = ConstructionEvent(EventKind(ev["kind"]), ev["x"], ev["y"], ev["tick"] + 1, ev["v"], ev["tau"])
                    state = (set(a.schemas), dict(a.connections.edges), dict(a.support.q), a.pool.recruited)
                    if construct(again, a.pool, a) is not None or state != (
                            set(a.schemas), dict(a.connections.edges), dict(a.support.q), a.pool.recruited):
                        failures.append((name, seed, c["tick"], "idempotence"))
                assert set(a.schemas) == roster
                if sim.stopped():
                    break
    ok = checked > 0 and not failures
    verdict(6, "construction set algebra", ok,
            f"{checked} constructions across {len(list_scenarios())} scenarios x 3 seeds; "
            f"closure checked every tick; {len(failures)} violations")


# 7 -------------------------------------------------------------------------------

def test_7_determinism_and_replay(tmp_path, capsys):
    results = []
    for name in list_scenarios():
        cfg = str(scenario_path(name))
        outs = []
        for workers in ("1", "4"):
            out = tmp_path / f"{name}-{workers}"
            assert cli_main(["run", "--config", cfg, "--out", str(out), "--workers", workers]) == 0
            outs.append((out / "trace.jsonl").read_bytes())
        identical = outs[0] == outs[1]
        replay = cli_main(["replay", str(tmp_path / f"{name}-1" / "trace.jsonl")])
        results.append((name, identical, replay))
    capsys.readouterr()
    ok = all(same and code == 0 for _, same, code in results)
    verdict(7, "determinism and replay", ok,
            "; ".join(f"{n}: workers 1/4 {'identical' if s else 'DIFFER'}, replay exit {c}"
                      for n, s, c in results))


# 8 -------------------------------------------------------------------------------

def test_8_drive_bounds():
    rng = np.random.default_rng(8)
    escapes, mismatches = 0, 0
    for _ in range(10_000):
        d_max = float(rng.uniform(0, 10))
        kind = DriveKind.AVERSIVE if rng.random() < 0.5 else DriveKind.APPETITIVE
        d = Drive("h", float(rng.uniform(0, 1)) * d_max, d_max, float(rng.uniform(0, 1)), kind)
        for _ in range(20):
            a_t, I_t = float(rng.uniform(0, 1)), float(rng.uniform(0, 1))
            nxt = step_drive(d, a_t, I_t)
            expect = drive_next(d.d, d_max, d.alpha, a_t, I_t, kind is DriveKind.AVERSIVE)
            mismatches += abs(nxt.d - expect) > 1e-12
            escapes += not (0.0 <= nxt.d <= d_max)
            d = nxt
    fixed = all(step_drive(Drive("h", m, m, al), 0.0, 0.0).d == m
                for m, al in itertools.product([0.5, 1.0, 3.0], [0.0, 0.2, 1.0]))
    fixed &= all(step_drive(Drive("h", 0.0, 1.0, al, DriveKind.AVERSIVE), 0.0, 0.0).d == 0.0
                 for al in [0.0, 0.5, 1.0])
    grow = shrink = True
    for _ in range(1000):
        d0, rate = float(rng.uniform(0, 0.999)), float(rng.uniform(0.001, 1))
        grow &= step_drive(Drive("h", d0, 1.0, rate), 0.0, 0.0).d > d0
        d1 = float(rng.uniform(0.001, 1))
        shrink &= step_drive(Drive("h", d1, 1.0, 0.0), rate, 0.0).d < d1
    ok = escapes == 0 and mismatches == 0 and fixed and grow and shrink
    verdict(8, "drive bounds", ok,
            f"10000 randomized drives x 20 steps: {escapes} bound escapes, {mismatches} oracle mismatches; "
            f"fixed points {'hold' if fixed else 'FAIL'}, monotone growth {'holds' if grow else 'FAILS'}, "
            f"monotone reduction {'holds' if shrink else 'FAILS'}")
