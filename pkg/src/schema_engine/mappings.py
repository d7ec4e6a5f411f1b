"""Differentiable function families used by predictive, dual and goal schemas.

Inputs are organised in named slots (e.g. ``effect``, ``cause``, ``context``)
that are concatenated into one vector; inactive slots read as zeros.
Both families provide analytic parameter gradients and input Jacobians.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, Sequence, Tuple

import numpy as np

from .errors import StructuralIntegrityError
from .patterns import SHARP, Pattern

Slots = Tuple[Tuple[str, int], ...]


def _in_dim(slots: Slots) -> int:
    return sum(d for _, d in slots)


def slot_slice(slots: Slots, name: str) -> slice:
    start = 0
    for n, d in slots:
        if n == name:
            return slice(start, start + d)
        start += d
    raise KeyError(name)


def assemble(slots: Slots, patterns: Sequence[Pattern]) -> np.ndarray:
    """Concatenate per-slot patterns, reading ``SHARP`` as zeros."""
    if len(patterns) != len(slots):
        raise StructuralIntegrityError(f"expected {len(slots)} input slots, got {len(patterns)}")
    parts = []
    for (name, dim), p in zip(slots, patterns):
        if p is SHARP:
            parts.append(np.zeros(dim))
        else:
            if p.shape != (dim,):
                raise StructuralIntegrityError(
                    f"slot {name!r} expects dim {dim}, got {p.shape[0]}"
                )
            parts.append(p)
    return np.concatenate(parts)


@dataclass
class Linear:
    """``y = W u + b``."""

    slots: Slots
    out_dim: int
    W: np.ndarray
    b: np.ndarray

    family = "linear"

    @classmethod
    def zeros(cls, slots: Slots, out_dim: int) -> "Linear":
        slots = tuple((str(n), int(d)) for n, d in slots)
        return cls(slots, out_dim, np.zeros((out_dim, _in_dim(slots))), np.zeros(out_dim))

    @property
    def in_dim(self) -> int:
        return _in_dim(self.slots)

    def forward(self, u: np.ndarray) -> np.ndarray:
        return self.W @ u + self.b

    def gradients(self, u: np.ndarray, grad_y: np.ndarray) -> Dict[str, np.ndarray]:
        return {"W": np.outer(grad_y, u), "b": grad_y.copy()}

    def input_jacobian(self, u: np.ndarray) -> np.ndarray:
        return self.W.copy()

    def params(self) -> Dict[str, np.ndarray]:
        return {"W": self.W, "b": self.b}

    def with_params(self, params: Dict[str, np.ndarray]) -> "Linear":
        return replace(self, **{k: np.array(v, dtype=float) for k, v in params.items()})

    def sgd(self, grads: Dict[str, np.ndarray], lr: float) -> "Linear":
        return self.with_params({k: v - lr * grads[k] for k, v in self.params().items()})


@dataclass
class TanhMLP:
    """One hidden tanh layer: ``y = W2 tanh(W1 u + b1) + b2``."""

    slots: Slots
    out_dim: int
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    family = "tanh"

    @classmethod
    def init(cls, slots: Slots, out_dim: int, hidden: int, rng: np.random.Generator,
             scale: float = 0.1) -> "TanhMLP":
        slots = tuple((str(n), int(d)) for n, d in slots)
        n_in = _in_dim(slots)
        return cls(
            slots,
            out_dim,
            rng.uniform(-scale, scale, (hidden, n_in)),
            np.zeros(hidden),
            rng.uniform(-scale, scale, (out_dim, hidden)),
            np.zeros(out_dim),
        )

    @property
    def in_dim(self) -> int:
        return _in_dim(self.slots)

    def forward(self, u: np.ndarray) -> np.ndarray:
        return self.W2 @ np.tanh(self.W1 @ u + self.b1) + self.b2

    def gradients(self, u: np.ndarray, grad_y: np.ndarray) -> Dict[str, np.ndarray]:
        h = np.tanh(self.W1 @ u + self.b1)
        grad_pre = (self.W2.T @ grad_y) * (1.0 - h * h)
        return {
            "W1": np.outer(grad_pre, u),
            "b1": grad_pre,
            "W2": np.outer(grad_y, h),
            "b2": grad_y.copy(),
        }

    def input_jacobian(self, u: np.ndarray) -> np.ndarray:
        h = np.tanh(self.W1 @ u + self.b1)
        return self.W2 @ ((1.0 - h * h)[:, None] * self.W1)

    def params(self) -> Dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def with_params(self, params: Dict[str, np.ndarray]) -> "TanhMLP":
        return replace(self, **{k: np.array(v, dtype=float) for k, v in params.items()})

    def sgd(self, grads: Dict[str, np.ndarray], lr: float) -> "TanhMLP":
        return self.with_params({k: v - lr * grads[k] for k, v in self.params().items()})


def make_mapping(family: str, slots: Slots, out_dim: int, rng: np.random.Generator,
                 hidden: int = 8):
    """Fresh mapping: zeros for ``linear``, small seeded uniform weights for ``tanh``."""
    if family == "linear":
        return Linear.zeros(slots, out_dim)
    if family == "tanh":
        return TanhMLP.init(slots, out_dim, hidden, rng)
    raise StructuralIntegrityError(f"unknown mapping family {family!r}")
