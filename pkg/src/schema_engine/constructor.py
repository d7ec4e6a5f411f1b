"""Construction triggers and schema construction.

Triggers are read from recent committed ticks: unexpected presence/absence of a
predicted effect, movement toward/away from a posted goal, and newly reliable
cause-effect relations. A construction recruits a predictive schema and its dual
from the dormant pool and rebuilds the cause schema with a modulatory input.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import Direction, Port, PortKind, Role, SchemaInstance, check_structure
from .errors import StructuralIntegrityError
from .mappings import make_mapping
from .models import DualSchema, PredictiveSchema
from .patterns import SHARP, Pattern, dense

log = logging.getLogger(__name__)

DERIVED_ROLES = (Role.PREDICTIVE, Role.DUAL, Role.GOAL)


class EventKind(str, Enum):
    UNEXPECTED_PRESENT = "C.a"
    UNEXPECTED_ABSENT = "C.a'"
    APPROACHING_GOAL = "C.b"
    AWAY_FROM_GOAL = "C.b'"
    NEW_CAUSE_EFFECT = "C.c"


@dataclass(frozen=True)
class ConstructionEvent:
    kind: EventKind
    x: str
    y: str
    tick: int
    v: Optional[str] = None
    tau: Optional[int] = None

    def __post_init__(self):
        if self.x == self.y:
            raise StructuralIntegrityError(f"event {self.kind.value} with x == y == {self.x!r}")

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "x": self.x, "y": self.y, "v": self.v,
                "tau": self.tau, "tick": self.tick}


@dataclass
class DormantPool:
    """A bounded supply of untrained parameter blocks.

    Blocks are created on first demand for an ``(input dims, output dim, family)``
    key; recruitment never hands out more than ``capacity`` blocks in total.
    """

    capacity: int = 32
    family: str = "linear"
    hidden: int = 8
    recruited: int = 0

    @property
    def remaining(self) -> int:
        return self.capacity - self.recruited

    def recruit(self, slots, out_dim: int, rng: np.random.Generator):
        if self.recruited >= self.capacity:
            return None
        self.recruited += 1
        return make_mapping(self.family, tuple(slots), out_dim, rng, self.hidden)


# --- detection ------------------------------------------------------------------

@dataclass(frozen=True)
class Expectation:
    """What a predictive schema expected for the current tick versus what arrived."""

    x: str
    y: str
    predicted: object
    observed: object


@dataclass(frozen=True)
class GoalCheck:
    """A posted goal for ``x`` and the objective pattern now and one tick earlier."""

    x: str
    y: str
    goal: object
    now: object
    before: object


def goal_distance(goal: Pattern, p: Pattern) -> float:
    return float(np.linalg.norm(goal - dense(p, goal.shape[0])))


def context_for(window: Sequence[frozenset], candidates: Sequence[str], exclude=()) -> Optional[str]:
    """First candidate (by id) asserted on every tick of the window."""
    for sid in sorted(candidates):
        if sid in exclude:
            continue
        if window and all(sid in asserted for asserted in window):
            return sid
    return None


def detect_conditions(
    tick: int,
    window: Sequence[frozenset],
    expectations: Sequence[Expectation],
    goals: Sequence[GoalCheck],
    harvested: Sequence[Tuple[str, str, int]],
    candidates: Sequence[str],
    context_n: int = 2,
) -> List[ConstructionEvent]:
    """Construction triggers for ``tick``.

    ``window`` holds the asserted-schema sets of the most recent ticks; the
    context schema must be asserted on all ``2 * context_n + 1`` of them and is
    ``None`` when the window is shorter.
    """
    span = 2 * context_n + 1
    ctx_window = list(window)[-span:] if len(window) >= span else []

    def ctx(x, y):
        return context_for(ctx_window, candidates, exclude=(x, y))

    events = []
    for e in expectations:
        if e.observed is SHARP and e.predicted is not SHARP:
            events.append(ConstructionEvent(EventKind.UNEXPECTED_PRESENT, e.x, e.y, tick, ctx(e.x, e.y)))
        elif e.observed is not SHARP and e.predicted is SHARP:
            events.append(ConstructionEvent(EventKind.UNEXPECTED_ABSENT, e.x, e.y, tick, ctx(e.x, e.y)))
    for g in goals:
        if g.goal is SHARP or (g.now is SHARP and g.before is SHARP):
            continue
        kind = (
            EventKind.APPROACHING_GOAL
            if goal_distance(g.goal, g.now) <= goal_distance(g.goal, g.before)
            else EventKind.AWAY_FROM_GOAL
        )
        events.append(ConstructionEvent(kind, g.x, g.y, tick, ctx(g.x, g.y)))
    for y, x, tau in harvested:
        events.append(ConstructionEvent(EventKind.NEW_CAUSE_EFFECT, x, y, tick, ctx(x, y), tau))
    return events


# --- construction ---------------------------------------------------------------

def reconstruct_cause(S_y: SchemaInstance, dual_id: str, dual_dim: int, new_id: str) -> SchemaInstance:
    """Copy of ``S_y`` with an extra modulatory input whose non-``SHARP`` value
    overrides the original behavior's output."""
    if dual_dim != S_y.out.dim:
        raise StructuralIntegrityError(
            f"dual {dual_id!r} emits dim {dual_dim} but cause {S_y.id!r} outputs dim {S_y.out.dim}"
        )
    if any(p.modulatory for p in S_y.inputs):
        raise StructuralIntegrityError(f"cause schema {S_y.id!r} already carries a modulatory port")
    inputs = [Port(p.name, p.dim, p.direction, p.kind, external=p.external) for p in S_y.inputs]
    inputs.append(Port("mod", dual_dim, Direction.IN, modulatory=True))
    outputs = [Port(p.name, p.dim, p.direction, p.kind, current=p.current) for p in S_y.outputs]
    vars = dict(S_y.vars)
    vars["base_behavior"] = S_y.vars.get("base_behavior", S_y.behavior)
    return SchemaInstance(
        new_id, S_y.role, inputs, outputs, "modulated",
        threshold=S_y.threshold, activation=S_y.activation, vars=vars,
        control_in=list(S_y.control_in),
        control_out=Port("ctl", 1, Direction.OUT, PortKind.CONTROL_OUT, current=S_y.control_out.current),
        model=S_y.model,
        effector=S_y.effector, receptor=S_y.receptor,
    )


def construct(event: ConstructionEvent, pool: DormantPool, agent) -> Optional[dict]:
    """Build ``P[x|y]``, its dual ``D[y|x]`` and the reconstructed cause ``y'``.

    Returns a construction record, or ``None`` when the event is a repeat, lacks
    a goal schema for ``x``, or the pool is exhausted (the last two are deferred
    by the caller).
    """
    x, y, v = event.x, event.y, event.v
    base_y = agent.base(y)
    if (x, base_y) in agent.constructed:
        return None
    S_y = agent.schemas.get(y)
    S_x = agent.schemas.get(x)
    if S_y is None or S_x is None:
        return None
    goal = agent.goal_for(x)
    if goal is None:
        raise DeferConstruction(f"no goal schema posts goals for {x!r}")
    if any(p.modulatory for p in S_y.inputs):
        log.info("cause %s already modulated; second dual not integrated", y)
        return None
    if pool.remaining < 2:
        raise DeferConstruction("dormant pool exhausted")

    k = agent.constants
    dx, dy = S_x.out.dim, S_y.out.dim
    ctx = [("context", agent.schemas[v].out.dim)] if v is not None else []
    p_map = pool.recruit((("effect", dx), ("cause", dy), *ctx), dx, agent.rng)
    d_map = pool.recruit((("effect", dx), ("goal", dx), *ctx), dy, agent.rng)

    before = sorted(agent.schemas)
    y_new = y + "'"
    p_id, d_id = f"P[{x}|{base_y}]", f"D[{base_y}|{x}]"

    P = PredictiveSchema(x, y_new, p_map, context=v, learning_rate=k.eta_p, delay=event.tau or 1)
    D = DualSchema(x, y_new, goal, d_map, context=v, learning_rate=k.eta_d)

    def port_list(slots):
        return [Port(n, d) for n, d in slots]

    p_schema = SchemaInstance(p_id, Role.PREDICTIVE, port_list(p_map.slots),
                              [Port("out", dx, Direction.OUT)], "predictive",
                              threshold=k.threshold, model=P)
    d_schema = SchemaInstance(d_id, Role.DUAL, port_list(d_map.slots),
                              [Port("out", dy, Direction.OUT)], "dual",
                              threshold=k.threshold, model=D)
    y_schema = reconstruct_cause(S_y, d_id, dy, y_new)

    C, Q = agent.connections, agent.support
    del agent.schemas[y]
    agent.retired[y] = S_y
    agent.schemas[y_new] = y_schema
    agent.schemas[p_id] = p_schema
    agent.schemas[d_id] = d_schema
    C.rename(y, y_new)
    Q.rename(y, y_new)
    agent.relations.rename(y, y_new)
    agent.rename(y, y_new)

    C.connect(x, "out", p_id, "effect")
    C.connect(y_new, "out", p_id, "cause")
    C.connect(x, "out", d_id, "effect")
    C.connect(goal, "out", d_id, "goal")
    if v is not None:
        C.connect(v, "out", p_id, "context")
        C.connect(v, "out", d_id, "context")
    C.connect(d_id, "out", y_new, "mod")
    Q.set(p_id, y_new, 1.0)
    Q.set(d_id, goal, 1.0)
    Q.set(y_new, d_id, 1.0)

    agent.constructed.add((x, base_y))
    check_structure(agent.schemas, C, Q)
    return {
        "tick": event.tick,
        "event": event.to_json(),
        "added": sorted([p_id, d_id, y_new]),
        "removed": [y],
        "before": before,
        "after": sorted(agent.schemas),
    }


class DeferConstruction(Exception):
    """Construction cannot proceed yet; the event should be retried later."""
