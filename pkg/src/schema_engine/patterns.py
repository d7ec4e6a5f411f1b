"""Activity patterns: the values carried by schema ports.

A pattern is either a finite float vector (``numpy.ndarray`` of shape ``(dim,)``)
or the inactive marker :data:`SHARP`, meaning "no input or output on this port".
``SHARP`` is a singleton and is never encoded as NaN or as a zero vector.
"""
from __future__ import annotations

from typing import Iterable, Union

import numpy as np

from .errors import StructuralIntegrityError


class _Sharp:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "SHARP"

    def __reduce__(self):
        return (_Sharp, ())


SHARP = _Sharp()

Pattern = Union[_Sharp, np.ndarray]


def is_sharp(p) -> bool:
    return p is SHARP


def vector(values: Iterable[float]) -> np.ndarray:
    """Build a finite 1-D float pattern."""
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise StructuralIntegrityError("a vector pattern needs at least one component")
    if not np.isfinite(arr).all():
        raise StructuralIntegrityError(f"non-finite pattern components: {arr!r}")
    return arr


def as_pattern(value) -> Pattern:
    """Coerce ``None``/``SHARP`` to ``SHARP`` and anything else to a vector."""
    if value is None or value is SHARP:
        return SHARP
    return vector(value)


def check_dim(p: Pattern, dim: int, where: str = "") -> Pattern:
    if p is not SHARP and p.shape != (dim,):
        raise StructuralIntegrityError(
            f"dimension mismatch at {where or 'port'}: expected {dim}, got {p.shape[0]}"
        )
    return p


def dense(p: Pattern, dim: int) -> np.ndarray:
    """Vector view of a pattern with ``SHARP`` read as the zero vector."""
    if p is SHARP:
        return np.zeros(dim)
    return p


def indicator(p: Pattern) -> int:
    """1 when the pattern carries any nonzero component, else 0 (``SHARP`` included)."""
    if p is SHARP:
        return 0
    return int(bool(p.any()))


def same(a: Pattern, b: Pattern) -> bool:
    """Exact equality, with ``SHARP`` equal only to itself."""
    if a is SHARP or b is SHARP:
        return a is b
    return a.shape == b.shape and bool(np.array_equal(a, b))


def to_json(p: Pattern):
    if p is SHARP:
        return None
    return [float(v) for v in p]


def from_json(v) -> Pattern:
    return as_pattern(v)
