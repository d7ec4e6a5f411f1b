"""Goal schemas and value-driven selection of their training pairs."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import StructuralIntegrityError
from .mappings import assemble
from .patterns import SHARP, Pattern, vector


@dataclass
class GoalSchema:
    """Maps a source schema's activity (plus its own recent goals) to a desired
    pattern for an objective schema.

    ``buffer[0]`` is the most recently posted goal, ``buffer[k]`` the one posted
    ``k`` postings earlier; its length is fixed.
    """

    source: str
    objective: str
    mapping: Any
    buffer: List[Any]
    beta_value: float = 0.5
    learning_rate: float = 0.2

    def inputs(self, o_z: Pattern) -> Tuple[Pattern, ...]:
        return (o_z, *self.buffer)

    def evaluate(self, o_z: Pattern) -> Pattern:
        if o_z is SHARP:
            return SHARP
        return vector(self.mapping.forward(assemble(self.mapping.slots, self.inputs(o_z))))

    def push(self, o_star: Pattern) -> None:
        if o_star is SHARP or not self.buffer:
            return
        self.buffer = [o_star, *self.buffer[:-1]]


def goal_slots(source_dim: int, objective_dim: int, n: int):
    return (("source", source_dim),) + tuple((f"g{k + 1}", objective_dim) for k in range(n))


def goal_output(G: GoalSchema, o_z: Pattern) -> Pattern:
    """Post the goal for the objective and shift it into the delay buffer."""
    o_star = G.evaluate(o_z)
    G.push(o_star)
    return o_star


# --- value maximisation ---------------------------------------------------------

StateKey = Hashable


def state_key(p: Pattern, grid: float = 0.1) -> StateKey:
    """Quantised, hashable index for a pattern (``'#'`` for the inactive marker)."""
    if p is SHARP:
        return "#"
    return tuple(int(v) for v in np.round(np.asarray(p) / grid))


@dataclass
class ValueStore:
    """Values ``V[(state, tick)]`` with discount and state dependencies ``c[(x, y)]``."""

    discount: float = 0.9
    c: Dict[Tuple[StateKey, StateKey], float] = field(default_factory=dict)
    V: Dict[Tuple[StateKey, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount must lie in (0, 1), got {self.discount}")


def update_value(store: ValueStore, s: StateKey, t: int, e_t) -> ValueStore:
    """``V(s, t) = e(t) + discount * sum_y c[s, y] * V(y, t + 1)``.

    Successor values must already be stored; missing dependencies count as 0.
    """
    total = 0
    for (y, ty), v in store.V.items():
        if ty == t + 1:
            w = store.c.get((s, y), 0)
            if w:
                total = total + w * v
    store.V[(s, t)] = e_t + store.discount * total
    return store


@dataclass(frozen=True)
class EpisodeStep:
    tick: int
    reward: Any
    states: Tuple[StateKey, ...]


def backup_episode(store: ValueStore, episode: Sequence[EpisodeStep]) -> ValueStore:
    """Fill ``V`` for every state of an episode, last tick first."""
    for step in sorted(episode, key=lambda s: s.tick, reverse=True):
        for s in step.states:
            update_value(store, s, step.tick, step.reward)
    return store


@dataclass(frozen=True)
class GoalExperience:
    """A posted goal, the inputs that produced it, and the objective pattern that followed."""

    tick: int
    key: StateKey
    inputs: Tuple[Any, ...]
    goal: Any
    observed: Any


def select_training_pairs(
    store: ValueStore, beta: float, buffer: Sequence[GoalExperience]
) -> List[GoalExperience]:
    """Experiences whose objective state was valuable: ``V(key, tick) > beta``."""
    chosen = [x for x in buffer if store.V.get((x.key, x.tick), float("-inf")) > beta]
    return sorted(chosen, key=lambda x: x.tick)


def tune_goal(G: GoalSchema, pairs: Sequence[GoalExperience]) -> GoalSchema:
    """One SGD pass pulling the posted goal toward the observed objective pattern."""
    mapping = G.mapping
    for x in pairs:
        if x.observed.shape != (mapping.out_dim,):
            raise StructuralIntegrityError(
                f"goal schema {G.source}->{G.objective}: target dim {x.observed.shape[0]}"
                f" != {mapping.out_dim}"
            )
        u = assemble(mapping.slots, x.inputs)
        err = mapping.forward(u) - x.observed
        mapping = mapping.sgd(mapping.gradients(u, err), G.learning_rate)
    return replace(G, mapping=mapping, buffer=list(G.buffer))


def dependency_from_reliability(
    r: Mapping[Tuple[str, str], np.ndarray], threshold: float
) -> Dict[Tuple[str, str], float]:
    """Normalised cause->effect dependency weights from a reliability table.

    ``r`` maps ``(effect, cause)`` to per-delay reliabilities. Entries whose best
    delay exceeds ``threshold`` become ``c[(cause, effect)] = r / r_max`` clamped
    to ``[0, 1]``; the rest are dropped.
    """
    best = {k: float(np.max(v)) for k, v in r.items() if len(v)}
    strong = {k: v for k, v in best.items() if v > threshold}
    if not strong:
        return {}
    r_max = max(strong.values())
    return {(y, x): min(1.0, max(0.0, v / r_max)) for (x, y), v in sorted(strong.items())}
