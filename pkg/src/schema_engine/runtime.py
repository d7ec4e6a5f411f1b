"""The agent and its tick scheduler.

One tick runs, in order: drive update; perceptual assertion, support
propagation and exploration; behavior evaluation on the committed previous
state followed by commit (goal, dual, predictive and motor schemas included);
delivery of motor outputs to the environment and an environment step;
adaptation (relation scoring, predictive tuning, distal dual tuning, value
backup and goal tuning); condition detection; construction. Constructions take
effect from the next tick.
"""
from __future__ import annotations

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Deque, Dict, FrozenSet, List, Optional, Set, Tuple

import numpy as np

from . import patterns
from .causality import ReliabilityStore, harvest_relations
from .config import Constants, ExplorationSpec, RunConfig, resolve_seed
from .constructor import (
    ConstructionEvent,
    DeferConstruction,
    DormantPool,
    EventKind,
    Expectation,
    GoalCheck,
    construct,
    detect_conditions,
)
from .core import (
    ConnectionMap,
    Direction,
    Port,
    Role,
    SchemaInstance,
    SupportMatrix,
    check_structure,
    gate_assertion,
    propagate_support,
    register_behavior,
    step_behavior,
)
from .drives import Drive, primitive_reward, step_drive
from .environments import Environment, LesionSpec, apply_lesion, env_step, make_environment
from .errors import StructuralIntegrityError
from .goals import (
    EpisodeStep,
    GoalExperience,
    GoalSchema,
    ValueStore,
    backup_episode,
    dependency_from_reliability,
    goal_slots,
    select_training_pairs,
    state_key,
    tune_goal,
)
from .mappings import Linear, TanhMLP, slot_slice
from .models import (
    DistalSnapshot,
    PredictionRecord,
    dual_act,
    jacobian_wrt_cause,
    predict,
    tune_dual_distal,
    tune_predictive,
)
from .patterns import SHARP, Pattern, vector

log = logging.getLogger(__name__)

DERIVED = (Role.PREDICTIVE, Role.DUAL, Role.GOAL)
# evaluation order within a tick; ties broken by id
STAGE = {Role.PERCEPTUAL: 0, Role.INTERNAL: 0, Role.GOAL: 1, Role.DUAL: 2,
         Role.PREDICTIVE: 3, Role.MOTOR: 4}


@register_behavior("predictive")
def _predictive(schema, inputs):
    return [predict(schema.model, *inputs)]


@register_behavior("dual")
def _dual(schema, inputs):
    return [dual_act(schema.model, *inputs)]


@register_behavior("goal")
def _goal(schema, inputs):
    return [schema.model.evaluate(inputs[0])]


@dataclass
class TickState:
    """What later adaptation steps need to know about one committed tick."""

    tick: int
    outputs: Dict[str, Any]
    asserted: FrozenSet[str]
    dual_inputs: Dict[str, Tuple[Any, ...]] = field(default_factory=dict)
    modulated: FrozenSet[str] = frozenset()
    goals: Dict[str, Tuple[Any, Tuple[Any, ...]]] = field(default_factory=dict)

    def rename(self, old: str, new: str) -> None:
        if old in self.outputs:
            self.outputs[new] = self.outputs.pop(old)
        swap = lambda ids: frozenset(new if i == old else i for i in ids)  # noqa: E731
        self.asserted = swap(self.asserted)
        self.modulated = swap(self.modulated)


@dataclass
class Monitor:
    """Per-epoch means of prediction error (squared norm) and performance error (norm)."""

    epoch_ticks: int = 100
    prediction: Dict[int, List[float]] = field(default_factory=dict)
    performance: Dict[int, List[float]] = field(default_factory=dict)
    performance_samples: List[Tuple[int, str, float]] = field(default_factory=list)

    def add_prediction(self, tick: int, sq_err: float) -> None:
        acc = self.prediction.setdefault(tick // self.epoch_ticks, [0.0, 0])
        acc[0] += sq_err
        acc[1] += 1

    def add_performance(self, tick: int, schema: str, err: float) -> None:
        acc = self.performance.setdefault(tick // self.epoch_ticks, [0.0, 0])
        acc[0] += err
        acc[1] += 1
        self.performance_samples.append((tick, schema, err))

    @staticmethod
    def _means(table):
        return [(e, s / n) for e, (s, n) in sorted(table.items()) if n]

    def prediction_means(self) -> List[Tuple[int, float]]:
        return self._means(self.prediction)

    def performance_means(self) -> List[Tuple[int, float]]:
        return self._means(self.performance)


@dataclass(eq=False)
class Agent:
    """Drives, schemas, wiring ``C``, support ``Q``, relations ``R`` and the constructor state."""

    drives: List[Drive]
    schemas: Dict[str, SchemaInstance]
    connections: ConnectionMap
    support: SupportMatrix
    relations: ReliabilityStore
    pool: DormantPool
    constants: Constants
    rng: np.random.Generator
    seed: int = 0
    signals: Dict[str, Tuple[Any, Any]] = field(default_factory=dict)
    exploration: ExplorationSpec = ExplorationSpec()
    lesions: List[LesionSpec] = field(default_factory=list)
    tick: int = 0
    lineage: Dict[str, str] = field(default_factory=dict)
    constructed: Set[Tuple[str, str]] = field(default_factory=set)
    constructions: List[dict] = field(default_factory=list)
    retired: Dict[str, SchemaInstance] = field(default_factory=dict)
    deferred: Dict[Tuple[str, str], ConstructionEvent] = field(default_factory=dict)
    warned: Set[Tuple[str, str]] = field(default_factory=set)
    history: Deque[TickState] = field(default_factory=deque)
    pending: List[Tuple[str, PredictionRecord]] = field(default_factory=list)
    episodes: Dict[str, List[EpisodeStep]] = field(default_factory=dict)
    experience: Dict[str, List[GoalExperience]] = field(default_factory=dict)
    bumps: Set[str] = field(default_factory=set)
    monitor: Monitor = field(default_factory=Monitor)

    # --- identity bookkeeping ---------------------------------------------------
    def base(self, sid: str) -> str:
        """The configured id a (possibly reconstructed) schema descends from."""
        while sid in self.lineage:
            sid = self.lineage[sid]
        return sid

    def resolve(self, sid: str) -> Optional[str]:
        """Live id for ``sid`` or for the schema that replaced it."""
        if sid in self.schemas:
            return sid
        for live in sorted(self.schemas):
            if self.base(live) == self.base(sid):
                return live
        return None

    def goal_for(self, x: str) -> Optional[str]:
        for sid in sorted(self.schemas):
            s = self.schemas[sid]
            if s.role is Role.GOAL and s.model.objective == x:
                return sid
        return None

    def rename(self, old: str, new: str) -> None:
        """Point every agent-side reference at the reconstructed schema."""
        self.lineage[new] = old
        for h in self.history:
            h.rename(old, new)
        if old in self.bumps:
            self.bumps.discard(old)
            self.bumps.add(new)
        for s in self.schemas.values():
            m = s.model
            if m is None:
                continue
            for attr in ("effect", "cause", "context", "source", "objective", "goal"):
                if getattr(m, attr, None) == old:
                    setattr(m, attr, new)

    def live_of_role(self, *roles: Role) -> List[SchemaInstance]:
        return [self.schemas[i] for i in sorted(self.schemas) if self.schemas[i].role in roles]


# --- construction from config -----------------------------------------------------

def _goal_mapping(spec, src_dim, obj_dim, family, hidden, rng):
    slots = goal_slots(src_dim, obj_dim, spec.buffer)
    if family == "tanh" and spec.init == "zeros":
        return TanhMLP.init(slots, obj_dim, hidden, rng)
    m = Linear.zeros(slots, obj_dim)
    if spec.init == "identity":
        if src_dim != obj_dim:
            raise StructuralIntegrityError(
                f"goal {spec.id!r}: identity init needs equal source/objective dims"
            )
        W = m.W.copy()
        W[:, slot_slice(slots, "source")] = np.eye(obj_dim)
        m = m.with_params({"W": W, "b": m.b})
    elif isinstance(spec.init, dict):
        W, b = np.array(spec.init["W"], dtype=float), np.array(spec.init["b"], dtype=float)
        if W.shape != m.W.shape or b.shape != m.b.shape:
            raise StructuralIntegrityError(
                f"goal {spec.id!r}: init W/b shapes must be {m.W.shape} and {m.b.shape}"
            )
        m = m.with_params({"W": W, "b": b})
    return m


def build_agent(config: RunConfig, seed: int, env: Environment) -> Agent:
    k = config.constants
    rng = np.random.default_rng(seed)
    schemas: Dict[str, SchemaInstance] = {}
    for s in config.schemas:
        thr = k.threshold if s.threshold is None else s.threshold
        if s.role is Role.PERCEPTUAL:
            if env.receptors.get(s.receptor) != s.dim:
                raise StructuralIntegrityError(
                    f"schema {s.id!r}: receptor {s.receptor!r} missing or not dim {s.dim}"
                )
            ports = [Port("receptor", s.dim, external=True)]
        elif s.role is Role.MOTOR:
            if env.effectors.get(s.effector) != s.dim:
                raise StructuralIntegrityError(
                    f"schema {s.id!r}: effector {s.effector!r} missing or not dim {s.dim}"
                )
            ports = [Port("command", s.dim, external=True)]
        else:
            ports = [Port("in", s.input_dim or s.dim)]
        schemas[s.id] = SchemaInstance(
            s.id, s.role, ports, [Port("out", s.dim, Direction.OUT)], s.behavior,
            threshold=thr, effector=s.effector, receptor=s.receptor,
        )
    C = ConnectionMap()
    for g in config.goals:
        src, obj = schemas[g.source], schemas[g.objective]
        mapping = _goal_mapping(g, src.out.dim, obj.out.dim, k.family, k.hidden, rng)
        model = GoalSchema(g.source, g.objective, mapping, [SHARP] * g.buffer,
                           beta_value=k.beta_value, learning_rate=g.learning_rate)
        schemas[g.id] = SchemaInstance(
            g.id, Role.GOAL, [Port("source", src.out.dim)],
            [Port("out", obj.out.dim, Direction.OUT)], "goal", threshold=k.threshold, model=model,
        )
        C.connect(g.source, "out", g.id, "source")
    for src, sport, dst, dport in config.connections:
        C.connect(src, sport, dst, dport)
    Q = SupportMatrix(q_max=k.q_max)
    for to, frm, q in config.support:
        Q.set(to, frm, q)
    check_structure(schemas, C, Q)
    drives = [Drive(d.name, d.level, d.max, d.alpha, d.kind) for d in config.drives]
    signals = {d.name: (d.reduction, d.incentive) for d in config.drives}
    relations = ReliabilityStore(k.tau_max, k.alpha_ce, k.beta_rel, k.theta_r)
    pool = DormantPool(k.pool_capacity, k.family, k.hidden)
    depth = max(k.tau_max + 2, 2 * k.context_n + 1) + 1
    return Agent(
        drives, schemas, C, Q, relations, pool, k, rng, seed=seed, signals=signals,
        exploration=config.exploration, lesions=sorted(config.lesions, key=lambda l: l.onset),
        history=deque(maxlen=depth), monitor=Monitor(k.epoch_ticks),
    )


# --- phase helpers ----------------------------------------------------------------

def _bind(agent: Agent, s: SchemaInstance, external: Dict[str, Pattern]) -> List[Pattern]:
    vals = []
    for p in s.inputs:
        if p.external:
            vals.append(external.get(s.id, SHARP))
            continue
        src = agent.connections.source_of(s.id, p.name)
        if src is None:
            vals.append(SHARP)
        else:
            vals.append(agent.schemas[src[0]].output(src[1]).current)
    return vals


def _evaluate(s: SchemaInstance, inputs: List[Pattern]) -> List[Pattern]:
    if not s.asserted:
        return [SHARP for _ in s.outputs]
    return step_behavior(s, inputs)


def candidate_pairs(agent: Agent) -> List[Tuple[str, str]]:
    """``(effect, cause)`` pairs scored for cause-effect relations."""
    live = [s for s in agent.live_of_role(*Role) if s.role not in DERIVED]
    if agent.constants.pairs == "all":
        effects, causes = live, live
    else:
        effects = [s for s in live if s.role is Role.PERCEPTUAL]
        causes = [s for s in live if s.role in (Role.MOTOR, Role.INTERNAL)]
    return [
        (x.id, y.id) for x in effects for y in causes
        if x.id != y.id and x.out.dim == y.out.dim
    ]


def _strongest_cause(agent: Agent, x: str) -> Optional[Tuple[str, int]]:
    best = None
    for (ex, y), arr in sorted(agent.relations.r.items()):
        if ex != x or y not in agent.schemas:
            continue
        i = int(np.argmax(arr))
        if arr[i] > 0 and (best is None or arr[i] > best[0]):
            best = (float(arr[i]), y, i + 1)
    return None if best is None else (best[1], best[2])


def _dual_for(agent: Agent, x: str, y: Optional[str] = None) -> Optional[str]:
    for d in agent.live_of_role(Role.DUAL):
        if d.model.effect == x and (y is None or d.model.cause == y):
            return d.id
    return None


def _predictive_for(agent: Agent, dual_id: str) -> Optional[SchemaInstance]:
    D = agent.schemas[dual_id].model
    for p in agent.live_of_role(Role.PREDICTIVE):
        if p.model.effect == D.effect and p.model.cause == D.cause:
            return p
    return None


def _j(p: Pattern):
    return patterns.to_json(p)


# --- the tick ---------------------------------------------------------------------

def tick(agent: Agent, env: Environment, workers: int = 1, record: bool = True) -> Optional[dict]:
    """Advance agent and environment by one tick; return the trace record."""
    t = agent.tick
    k = agent.constants
    obs = env.observe()
    happened = env.events()

    # drives and primitive reward
    reward = 0.0
    drives = []
    for d in agent.drives:
        red, inc = agent.signals.get(d.name, (None, None))
        a_t = red[1] if red and happened.get(red[0]) else 0.0
        I_t = inc[1] if inc and happened.get(inc[0]) else 0.0
        reward += primitive_reward(d, a_t)
        drives.append(step_drive(d, a_t, I_t))
    agent.drives = drives

    lesioned = []
    while agent.lesions and agent.lesions[0].onset <= t:
        spec = agent.lesions.pop(0)
        apply_lesion(agent, spec)
        lesioned.append({"target": spec.target, "mode": spec.mode.value, "onset": spec.onset})

    # activations: support from the previous tick's asserted schemas
    prev = {sid: (s.activation if s.asserted else 0.0) for sid, s in agent.schemas.items()}
    act = propagate_support(prev, agent.support, k.squash)
    external: Dict[str, Pattern] = {}
    bump = lambda sid: max(act[sid], agent.schemas[sid].threshold + k.delta)  # noqa: E731
    for s in agent.live_of_role(Role.PERCEPTUAL):
        p = obs.get(s.receptor, SHARP)
        external[s.id] = p
        if p is not SHARP:
            act[s.id] = bump(s.id)
    ex = agent.exploration
    for base_id in sorted(ex.schemas):
        fire = agent.rng.random() < ex.probability
        sid = agent.resolve(base_id)
        dim = agent.schemas[sid].out.dim if sid is not None else 1
        if isinstance(ex.amplitude, tuple):
            amp = agent.rng.uniform(ex.amplitude[0], ex.amplitude[1], dim)
        else:
            amp = np.full(dim, float(ex.amplitude))
        if fire and sid is not None:
            external[sid] = vector(amp)
            act[sid] = bump(sid)
    for sid in sorted(agent.bumps):
        if sid in act:
            act[sid] = bump(sid)
    agent.bumps = set()
    for sid, a in act.items():
        agent.schemas[sid].activation = a

    # phase 1: evaluate on the committed state, then commit
    order = sorted(agent.schemas.values(), key=lambda s: (STAGE[s.role], s.id))
    bound = [(s, _bind(agent, s, external)) for s in order]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda sb: _evaluate(*sb), bound))
    else:
        results = [_evaluate(s, b) for s, b in bound]
    for (s, _), outs in zip(bound, results):
        for port, val in zip(s.outputs, outs):
            port.write(val)
        gate_assertion(s)
    for s in order:
        s.commit()

    outputs = {sid: s.out.current for sid, s in agent.schemas.items()}
    activations = {sid: s.activation for sid, s in sorted(agent.schemas.items())}
    asserted = frozenset(sid for sid, s in agent.schemas.items() if s.asserted)
    state = TickState(t, dict(outputs), asserted)
    modulated = set()
    predictions = []
    goals_posted = {}
    for s, inputs in bound:
        if not s.asserted:
            continue
        if s.role is Role.DUAL and s.out.current is not SHARP:
            state.dual_inputs[s.id] = tuple(inputs)
        elif s.role is Role.PREDICTIVE and s.out.current is not SHARP:
            P = s.model
            rec = PredictionRecord(t - 1, t - 1 + P.delay, s.out.current, None, tuple(inputs))
            agent.pending.append((s.id, rec))
            predictions.append({"schema": s.id, "target_tick": rec.target_tick,
                                "value": _j(rec.prediction)})
        elif s.role is Role.GOAL and s.out.current is not SHARP:
            state.goals[s.id] = (s.out.current, (inputs[0], *s.model.buffer))
            goals_posted[s.id] = _j(s.out.current)
            s.model.push(s.out.current)
        if s.behavior == "modulated" and inputs[-1] is not SHARP:
            modulated.add(s.id)
    state.modulated = frozenset(modulated)
    agent.history.append(state)

    # motor outputs to the environment
    commands: Dict[str, Pattern] = {}
    for s in agent.live_of_role(Role.MOTOR):
        if s.asserted and s.effector and s.out.current is not SHARP:
            if s.effector in commands:
                raise StructuralIntegrityError(f"effector {s.effector!r} driven by two motor schemas")
            commands[s.effector] = s.out.current
    env_info = env.info()
    env_step(env, commands)

    # adaptation
    pairs = candidate_pairs(agent)
    agent.relations.observe(outputs, pairs)
    pred_errors, expectations = _tune_predictions(agent, t, outputs)
    perf_errors = _tune_duals(agent, t, outputs)
    _learn_goals(agent, t, outputs, reward)

    # conditions
    harvested = harvest_relations(agent.relations)
    checks = _goal_checks(agent, t)
    window = [h.asserted for h in agent.history]
    candidates = [s.id for s in agent.live_of_role(*Role) if s.role not in DERIVED]
    events = detect_conditions(t, window, expectations, checks, harvested, candidates, k.context_n)
    for e in events:
        if e.kind is EventKind.AWAY_FROM_GOAL:
            d = _dual_for(agent, e.x, e.y)
            if d is not None:
                agent.bumps.add(d)

    # construction (effective next tick)
    built = _construct(agent, t, events)

    agent.tick = t + 1
    if not record:
        return None
    return {
        "tick": t,
        "ports": {sid: _j(p) for sid, p in sorted(outputs.items())},
        "activations": activations,
        "drives": {d.name: d.d for d in agent.drives},
        "reward": reward,
        "goals": goals_posted,
        "predictions": predictions,
        "errors": {"prediction": pred_errors, "performance": perf_errors},
        "events": [e.to_json() for e in events],
        "harvested": [list(h) for h in harvested],
        "constructions": built,
        "lesions": lesioned,
        "modulated": sorted(modulated),
        "env": env_info,
    }


def _tune_predictions(agent: Agent, t: int, outputs):
    errors, expectations, keep, matured = [], [], [], set()
    k = agent.constants
    for pid, rec in agent.pending:
        if rec.target_tick > t:
            keep.append((pid, rec))
            continue
        s = agent.schemas.get(pid)
        if s is None or rec.target_tick < t:
            continue
        P = s.model
        observed = outputs.get(P.effect, SHARP)
        rec = replace(rec, observed=observed)
        matured.add(pid)
        expectations.append(Expectation(P.effect, P.cause, rec.prediction, observed))
        if observed is SHARP:
            continue
        err = float(np.linalg.norm(observed - rec.prediction))
        agent.monitor.add_prediction(t, err * err)
        errors.append({"schema": pid, "tick": rec.tick, "error": err})
        if err > k.eps_err:
            s.model = tune_predictive(P, rec)
    agent.pending = keep
    for p in agent.live_of_role(Role.PREDICTIVE):
        if p.id not in matured and outputs.get(p.model.effect, SHARP) is not SHARP:
            expectations.append(Expectation(p.model.effect, p.model.cause, SHARP,
                                            outputs[p.model.effect]))
    return errors, expectations


def _tune_duals(agent: Agent, t: int, outputs):
    errors = []
    hist = {h.tick: h for h in agent.history}
    for d in agent.live_of_role(Role.DUAL):
        D = d.model
        p = _predictive_for(agent, d.id)
        if p is None:
            continue
        s = t - p.model.delay
        at_s, before = hist.get(s), hist.get(s - 1)
        if at_s is None or before is None or D.cause not in at_s.modulated:
            continue
        dual_inputs = before.dual_inputs.get(d.id)
        if dual_inputs is None:
            continue
        o_star = dual_inputs[1]
        observed = outputs.get(D.effect, SHARP)
        if observed is SHARP:
            continue
        err = float(np.linalg.norm(o_star - observed))
        agent.monitor.add_performance(t, d.id, err)
        errors.append({"schema": d.id, "error": err})
        ctx = at_s.outputs.get(p.model.context, SHARP) if p.model.context else SHARP
        cause_inputs = p.model.slots_for(
            at_s.outputs.get(D.effect, SHARP), at_s.outputs[D.cause], ctx
        )
        d.model = tune_dual_distal(D, p.model, o_star, observed,
                                   DistalSnapshot(dual_inputs, cause_inputs))
    return errors


def _learn_goals(agent: Agent, t: int, outputs, reward: float) -> None:
    k = agent.constants
    prev = agent.history[-2] if len(agent.history) > 1 else None
    for g in agent.live_of_role(Role.GOAL):
        G = g.model
        o_x = outputs.get(G.objective, SHARP)
        key = state_key(o_x, k.value_grid)
        steps = agent.episodes.setdefault(g.id, [])
        steps.append(EpisodeStep(t, reward, (key,)))
        if prev is not None and g.id in prev.goals and o_x is not SHARP:
            o_star, inputs = prev.goals[g.id]
            agent.experience.setdefault(g.id, []).append(
                GoalExperience(t, key, inputs, o_star, o_x)
            )
        if reward > 0 or len(steps) >= k.episode_horizon:
            _close_episode(agent, g, steps)
            agent.episodes[g.id] = []
            agent.experience[g.id] = []


def _close_episode(agent: Agent, g: SchemaInstance, steps: List[EpisodeStep]) -> None:
    k = agent.constants
    G = g.model
    dep = dependency_from_reliability(agent.relations.r, agent.relations.threshold)
    w = max((v for (y, x), v in dep.items() if x == G.objective), default=0.0)
    store = ValueStore(k.discount)
    for a, b in zip(steps, steps[1:]):
        store.c[(a.states[0], b.states[0])] = w
    backup_episode(store, steps)
    chosen = select_training_pairs(store, k.beta_value, agent.experience.get(g.id, []))
    if chosen and G.learning_rate > 0:
        g.model = tune_goal(G, chosen)


def _goal_checks(agent: Agent, t: int) -> List[GoalCheck]:
    if len(agent.history) < 2:
        return []
    now, before = agent.history[-1], agent.history[-2]
    checks = []
    for g in agent.live_of_role(Role.GOAL):
        posted = before.goals.get(g.id)
        if posted is None:
            continue
        x = g.model.objective
        d = _dual_for(agent, x)
        if d is not None:
            y = agent.schemas[d].model.cause
        else:
            found = _strongest_cause(agent, x)
            if found is None:
                continue
            y = found[0]
        checks.append(GoalCheck(x, y, posted[0], now.outputs.get(x, SHARP),
                                before.outputs.get(x, SHARP)))
    return checks


def _try(agent: Agent, event: ConstructionEvent) -> Tuple[Optional[dict], bool]:
    """Attempt a construction; returns (record, deferred)."""
    key = (agent.base(event.x), agent.base(event.y))
    try:
        rec = construct(event, agent.pool, agent)
    except DeferConstruction as why:
        agent.deferred[key] = event
        if key not in agent.warned:
            agent.warned.add(key)
            log.warning("construction for effect %s, cause %s deferred: %s", *key, why)
        return None, True
    agent.deferred.pop(key, None)
    if rec is not None:
        agent.constructions.append(rec)
    return rec, False


def _construct(agent: Agent, t: int, events: List[ConstructionEvent]) -> List[dict]:
    built = []
    for key in sorted(agent.deferred):
        old = agent.deferred[key]
        x, y = agent.resolve(key[0]), agent.resolve(key[1])
        if x is None or y is None:
            agent.deferred.pop(key)
            continue
        v = agent.resolve(old.v) if old.v else None
        ev = ConstructionEvent(old.kind, x, y, t, v if v not in (x, y) else None, old.tau)
        rec, _ = _try(agent, ev)
        if rec:
            built.append(rec)
    b_pairs = {(e.x, e.y) for e in events if e.kind is EventKind.APPROACHING_GOAL}
    for e in events:
        if e.x not in agent.schemas or e.y not in agent.schemas:
            continue
        if e.kind is EventKind.NEW_CAUSE_EFFECT:
            rec, _ = _try(agent, e)
        elif e.kind is EventKind.UNEXPECTED_PRESENT and (e.x, e.y) in b_pairs:
            found = _strongest_cause(agent, e.x)
            tau = found[1] if found and found[0] == e.y else 1
            rec, _ = _try(agent, replace(e, tau=tau))
        else:
            continue
        if rec:
            built.append(rec)
    return built


# --- driving a run ----------------------------------------------------------------

def env_seed(seed: int) -> int:
    return int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])


class Simulation:
    """An agent bound to its environment, built from a run configuration."""

    def __init__(self, config: RunConfig, seed: Optional[int] = None, workers: int = 1):
        self.config = config
        self.seed = resolve_seed(seed, config)
        self.workers = workers
        self.env = make_environment(config.environment, config.env_params, env_seed(self.seed))
        self.agent = build_agent(config, self.seed, self.env)

    def step(self, record: bool = True) -> Optional[dict]:
        return tick(self.agent, self.env, self.workers, record)

    def stopped(self) -> bool:
        stop = self.config.stop
        if stop is None:
            return False
        return any(d.name == stop[0] and d.d < stop[1] for d in self.agent.drives)

    def run(self, horizon: Optional[int] = None, record: bool = True, sink=None) -> List[dict]:
        """Tick until ``horizon`` (config value by default) or the stop predicate.

        Records go to ``sink`` when given, otherwise they are returned.
        """
        horizon = self.config.horizon if horizon is None else horizon
        out = []
        for _ in range(horizon):
            rec = self.step(record)
            if rec is not None:
                (sink if sink is not None else out.append)(rec)
            if self.stopped():
                break
        return out


def run(config: RunConfig, seed: Optional[int] = None, horizon: Optional[int] = None,
        workers: int = 1) -> Tuple[List[dict], Agent]:
    sim = Simulation(config, seed, workers)
    return sim.run(horizon), sim.agent
