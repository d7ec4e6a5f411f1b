"""``schema-engine`` command line: run, replay, inspect and validate.

Exit codes: 0 success, 1 replay mismatch, 2 configuration or usage error,
3 structural-integrity or snapshot failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

from .config import load_config, parse_config
from .errors import ConfigError, SnapshotError, StructuralIntegrityError, TraceFormatError
from .runtime import Simulation
from .serialize import (
    TraceWriter,
    first_divergence,
    read_trace,
    restore,
    snapshot,
    trace_header,
    trace_line,
)

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_INTEGRITY = 0, 1, 2, 3
QUERIES = ("roster", "reliability", "connections", "drives", "support")


def _fail(msg: str, code: int) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def summarize(sim: Simulation, ticks: int) -> dict:
    a = sim.agent
    pred = a.monitor.prediction_means()
    perf = a.monitor.performance_means()
    return {
        "name": sim.config.name,
        "seed": sim.seed,
        "ticks": ticks,
        "constructions": len(a.constructions),
        "construction_log": [
            {"tick": c["tick"], "added": c["added"], "removed": c["removed"]} for c in a.constructions
        ],
        "harvested": sorted([a.base(y), a.base(x), tau] for x, y, tau in a.relations.harvested),
        "final_drives": {d.name: d.d for d in a.drives},
        "mean_prediction_error": pred[-1][1] if pred else None,
        "mean_performance_error": perf[-1][1] if perf else None,
        "prediction_error_by_epoch": [m for _, m in pred],
        "performance_error_by_epoch": [m for _, m in perf],
    }


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    sim = Simulation(cfg, args.seed, args.workers)
    if args.validate_only:
        print(f"{cfg.name}: configuration valid")
        return EXIT_OK
    if args.out is None:
        return _fail("--out is required unless --validate-only is given", EXIT_CONFIG)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    horizon = cfg.horizon if args.horizon is None else args.horizon
    started = time.perf_counter()
    count = 0
    with open(out / "trace.jsonl", "w") as fh:
        writer = TraceWriter(fh, trace_header(cfg.source, sim.seed, horizon))

        def sink(rec):
            nonlocal count
            count += 1
            writer(rec)

        sim.run(horizon, sink=sink)
    (out / "snapshot.bin").write_bytes(snapshot(sim.agent))
    summary = summarize(sim, count)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"{cfg.name}: {count} ticks, {summary['constructions']} construction(s)")
    for c in summary["construction_log"]:
        print(f"  tick {c['tick']}: +{','.join(c['added'])} -{','.join(c['removed'])}")
    print(f"elapsed {time.perf_counter() - started:.2f}s", file=sys.stderr)
    return EXIT_OK


def cmd_replay(args) -> int:
    with open(args.trace) as fh:
        header, records = read_trace(fh)
        recorded = list(records)
    cfg = parse_config(header["config"])
    sim = Simulation(cfg, header["seed"], args.workers)
    fresh: List[str] = []
    sim.run(header["horizon"], sink=lambda rec: fresh.append(trace_line(rec)))
    tick = first_divergence(recorded, fresh)
    if tick >= 0:
        print(f"replay diverges at tick {tick}")
        return EXIT_MISMATCH
    print(f"replay identical ({len(fresh)} ticks)")
    return EXIT_OK


def _label(agent, sid: str) -> str:
    base = agent.base(sid)
    return sid if base == sid else f"{sid} (from {base})"


def inspect_report(agent, query: str, k: int = 5) -> List[str]:
    if query == "roster":
        lines = []
        for sid in sorted(agent.schemas):
            s = agent.schemas[sid]
            lines.append(f"{_label(agent, sid)}\t{s.role.value}\tdim={s.out.dim}\tthreshold={s.threshold}")
        return lines
    if query == "reliability":
        return [
            f"{_label(agent, y)}\t{_label(agent, x)}\ttau={tau}\tr={r:.6f}"
            for y, x, tau, r in agent.relations.top(k)
        ]
    if query == "connections":
        lines = []
        for src, sport, dst, dport in agent.connections.sorted_edges():
            dim = agent.schemas[src].output(sport).dim
            ddim = agent.schemas[dst].input(dport).dim
            lines.append(f"{src}.{sport} -> {dst}.{dport}\tdim={dim}/{ddim}")
        return lines
    if query == "drives":
        return [f"{d.name}\t{d.kind.value}\tlevel={d.d:.6f}\tmax={d.d_max}" for d in agent.drives]
    if query == "support":
        return [f"{y} -> {x}\tq={q}" for (x, y), q in sorted(agent.support.q.items())]
    raise ConfigError(f"unknown query {query!r}; expected one of {', '.join(QUERIES)}")


def cmd_inspect(args) -> int:
    if args.query not in QUERIES:
        return _fail(f"unknown query {args.query!r}; expected one of {', '.join(QUERIES)}", EXIT_CONFIG)
    agent = restore(Path(args.snapshot).read_bytes())
    for line in inspect_report(agent, args.query, args.k):
        print(line)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    Simulation(cfg, args.seed)
    print(f"{cfg.name}: configuration valid")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="schema-engine", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log construction warnings")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario, writing trace, snapshot and summary")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.add_argument("--horizon", type=int)
    r.add_argument("--validate-only", action="store_true")
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_run)

    rp = sub.add_parser("replay", help="re-execute a trace and compare tick by tick")
    rp.add_argument("trace")
    rp.add_argument("--workers", type=int, default=1)
    rp.set_defaults(func=cmd_replay)

    i = sub.add_parser("inspect", help="print a report from a snapshot")
    i.add_argument("snapshot")
    i.add_argument("query", help=f"one of: {', '.join(QUERIES)}")
    i.add_argument("--k", type=int, default=5, help="rows for the reliability query")
    i.set_defaults(func=cmd_inspect)

    v = sub.add_parser("validate", help="check a configuration without running it")
    v.add_argument("--config", required=True)
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", 1) < 1:
        return _fail("--workers must be >= 1", EXIT_CONFIG)
    try:
        return args.func(args)
    except (ConfigError, TraceFormatError) as exc:
        return _fail(str(exc), EXIT_CONFIG)
    except (StructuralIntegrityError, SnapshotError) as exc:
        return _fail(str(exc), EXIT_INTEGRITY)
    except OSError as exc:
        return _fail(str(exc), EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
