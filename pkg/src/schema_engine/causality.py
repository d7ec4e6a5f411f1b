"""Online discovery of delayed cause-effect relations between schema outputs.

For every candidate (effect x, cause y) pair and every delay in ``1..tau_max``
the store accumulates ``r += beta * c`` where ``c`` rewards the cause being
active ``tau`` ticks before the effect with a similar pattern and penalises one
being active without the other.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Iterable, List, Mapping, Set, Tuple

import numpy as np

from .errors import StructuralIntegrityError
from .patterns import SHARP, Pattern, indicator

activity_indicator = indicator


def instantaneous_ce(o_x_t: Pattern, o_y_delayed: Pattern, alpha: float) -> float:
    """``Theta[o_x] * Theta[o_y] - alpha * ||o_y - o_x||^2`` with ``SHARP`` as zeros."""
    if o_x_t is not SHARP and o_y_delayed is not SHARP and o_x_t.shape != o_y_delayed.shape:
        raise StructuralIntegrityError(
            f"cause/effect dims differ: {o_y_delayed.shape[0]} vs {o_x_t.shape[0]}"
        )
    if o_x_t is SHARP and o_y_delayed is SHARP:
        return 0.0
    ref = o_x_t if o_x_t is not SHARP else o_y_delayed
    x = o_x_t if o_x_t is not SHARP else np.zeros_like(ref)
    y = o_y_delayed if o_y_delayed is not SHARP else np.zeros_like(ref)
    d = float(np.sum((y - x) ** 2))
    return indicator(o_x_t) * indicator(o_y_delayed) - alpha * d


@dataclass
class ReliabilityStore:
    """Per ``(effect, cause)`` arrays of reliabilities indexed by ``delay - 1``."""

    tau_max: int = 8
    alpha: float = 0.5
    beta: float = 0.02
    threshold: float = 0.5
    r: Dict[Tuple[str, str], np.ndarray] = field(default_factory=dict)
    history: Dict[str, Deque] = field(default_factory=dict)
    harvested: Set[Tuple[str, str, int]] = field(default_factory=set)

    def value(self, x: str, y: str, tau: int) -> float:
        arr = self.r.get((x, y))
        return 0.0 if arr is None else float(arr[tau - 1])

    def delayed(self, sid: str, tau: int) -> Pattern:
        """Output of ``sid`` observed ``tau`` ticks ago (``SHARP`` if unknown)."""
        h = self.history.get(sid)
        if h is None or tau > len(h):
            return SHARP
        return h[-tau]

    def explained(self, x: str) -> Dict[str, List[int]]:
        """Harvested ``cause -> delays`` into ``x`` whose delayed cause output is active now."""
        found: Dict[str, List[int]] = {}
        for ex, y, tau in sorted(self.harvested):
            if ex == x and indicator(self.delayed(y, tau)):
                found.setdefault(y, []).append(tau)
        return found

    def observe(self, outputs: Mapping[str, Pattern], pairs: Iterable[Tuple[str, str]]) -> None:
        """Score every pair against the current outputs, then push them into history.

        An effect already accounted for by a harvested relation (its cause fired
        at the matching delay) only updates that relation's entries; it is not
        used as evidence for other causes or delays.
        """
        explained: Dict[str, Dict[str, List[int]]] = {}
        cache: Dict = {}
        for x, y in pairs:
            if x not in explained:
                explained[x] = self.explained(x)
            taus = explained[x].get(y) if explained[x] else None
            if explained[x] and taus is None:
                continue
            arr = self.r.get((x, y))
            if arr is None:
                arr = self.r[(x, y)] = np.zeros(self.tau_max)
            scores = self._scores(outputs[x], y, cache)
            if taus is None:
                arr += self.beta * scores
            else:
                idx = [t - 1 for t in taus]
                arr[idx] += self.beta * scores[idx]
        for sid, p in outputs.items():
            h = self.history.get(sid)
            if h is None:
                h = self.history[sid] = deque([SHARP] * self.tau_max, maxlen=self.tau_max)
            h.append(p)

    def _past(self, y: str, dim: int) -> Tuple[np.ndarray, np.ndarray]:
        """Outputs of ``y`` at delays ``1..tau_max`` as rows (``SHARP`` as zeros) and their indicators."""
        h = self.history.get(y)
        rows = np.zeros((self.tau_max, dim))
        ind = np.zeros(self.tau_max)
        if h is not None:
            for i, p in enumerate(reversed(h)):
                if p is not SHARP:
                    if p.shape != (dim,):
                        raise StructuralIntegrityError(
                            f"cause/effect dims differ: {p.shape[0]} vs {dim}"
                        )
                    rows[i] = p
                    ind[i] = indicator(p)
        return rows, ind

    def _scores(self, o_x: Pattern, y: str, cache=None) -> np.ndarray:
        """``instantaneous_ce`` of ``o_x`` against every delay of ``y`` at once."""
        h = self.history.get(y)
        dim = None
        if o_x is not SHARP:
            dim = o_x.shape[0]
        elif h is not None:
            dim = next((p.shape[0] for p in h if p is not SHARP), None)
        if dim is None:
            return np.zeros(self.tau_max)
        key = (y, dim)
        if cache is not None and key in cache:
            rows, ind = cache[key]
        else:
            rows, ind = self._past(y, dim)
            if cache is not None:
                cache[key] = rows, ind
        x = np.zeros(dim) if o_x is SHARP else o_x
        d = ((rows - x) ** 2).sum(axis=1)
        return indicator(o_x) * ind - self.alpha * d

    def rename(self, old: str, new: str) -> None:
        self.r = {
            (new if x == old else x, new if y == old else y): v for (x, y), v in self.r.items()
        }
        if old in self.history:
            self.history[new] = self.history.pop(old)
        self.harvested = {
            (new if x == old else x, new if y == old else y, t) for x, y, t in self.harvested
        }

    def drop(self, sid: str) -> None:
        self.r = {k: v for k, v in self.r.items() if sid not in k}
        self.history.pop(sid, None)

    def top(self, k: int) -> List[Tuple[str, str, int, float]]:
        """Highest ``(cause, effect, delay, r)`` entries, deterministic tie-break."""
        rows = [
            (y, x, t + 1, float(v))
            for (x, y), arr in self.r.items()
            for t, v in enumerate(arr)
        ]
        rows.sort(key=lambda row: (-row[3], row[1], row[0], row[2]))
        return rows[:k]


def update_reliability(store: ReliabilityStore, x: str, y: str, tau: int, c: float) -> ReliabilityStore:
    arr = store.r.get((x, y))
    if arr is None:
        arr = store.r[(x, y)] = np.zeros(store.tau_max)
    arr[tau - 1] += store.beta * c
    return store


def harvest_relations(store: ReliabilityStore) -> List[Tuple[str, str, int]]:
    """Newly reliable ``(cause, effect, delay)`` triples; each is reported once.

    Ordered by descending reliability, then ``(effect, cause, delay)``.
    """
    found = []
    for (x, y), arr in store.r.items():
        for i, v in enumerate(arr):
            if v > store.threshold and (x, y, i + 1) not in store.harvested:
                found.append((float(v), x, y, i + 1))
    found.sort(key=lambda row: (-row[0], row[1], row[2], row[3]))
    for _, x, y, tau in found:
        store.harvested.add((x, y, tau))
    return [(y, x, tau) for _, x, y, tau in found]
