"""Predictive (forward) and dual (inverse) schemas with distal supervised learning.

A predictive schema maps ``(effect, cause, context)`` activity to the expected
effect pattern ``delay`` ticks ahead. Its dual maps ``(effect, goal, context)``
to the cause-side pattern that should bring the effect to the goal; the dual is
trained on the distal error ``goal - observed`` pulled back through the
predictive schema's Jacobian with respect to its cause input.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Any, Optional, Tuple

import numpy as np

from .errors import StructuralIntegrityError
from .mappings import assemble, slot_slice
from .patterns import SHARP, Pattern, vector

log = logging.getLogger(__name__)


@dataclass
class PredictiveSchema:
    effect: str
    cause: str
    mapping: Any
    context: Optional[str] = None
    learning_rate: float = 0.1
    delay: int = 1

    def slots_for(self, o_x: Pattern, o_yx: Pattern, o_v: Pattern) -> Tuple[Pattern, ...]:
        return (o_x, o_yx, o_v) if self.context is not None else (o_x, o_yx)


@dataclass
class DualSchema:
    effect: str
    cause: str
    goal: str
    mapping: Any
    context: Optional[str] = None
    learning_rate: float = 0.1

    def slots_for(self, o_x: Pattern, o_star: Pattern, o_v: Pattern) -> Tuple[Pattern, ...]:
        return (o_x, o_star, o_v) if self.context is not None else (o_x, o_star)


@dataclass(frozen=True)
class PredictionRecord:
    """A prediction made at ``tick`` for ``target_tick`` and what was then observed."""

    tick: int
    target_tick: int
    prediction: Any
    observed: Any
    inputs: Tuple[Any, ...]


@dataclass(frozen=True)
class DistalSnapshot:
    """Inputs seen by the dual when it acted and by the forward model at emission."""

    dual_inputs: Tuple[Any, ...]
    cause_inputs: Optional[Tuple[Any, ...]]


def predict(P: PredictiveSchema, o_x: Pattern, o_yx: Pattern, o_v: Pattern = SHARP) -> Pattern:
    if o_yx is SHARP:
        return SHARP
    u = assemble(P.mapping.slots, P.slots_for(o_x, o_yx, o_v))
    return vector(P.mapping.forward(u))


def tune_predictive(P: PredictiveSchema, record: PredictionRecord) -> PredictiveSchema:
    """One SGD step on ``0.5 * ||observed - predicted||^2``."""
    if record.prediction is SHARP or record.observed is SHARP:
        return P
    if record.observed.shape != (P.mapping.out_dim,):
        raise StructuralIntegrityError(
            f"predictive schema for {P.effect!r}: observation dim {record.observed.shape[0]}"
            f" != {P.mapping.out_dim}"
        )
    u = assemble(P.mapping.slots, record.inputs)
    err = P.mapping.forward(u) - record.observed
    grads = P.mapping.gradients(u, err)
    return replace(P, mapping=P.mapping.sgd(grads, P.learning_rate))


def jacobian_wrt_cause(P: PredictiveSchema, inputs: Tuple[Pattern, ...]) -> np.ndarray:
    """Exact ``d prediction / d cause`` at the given input point.

    Inactive effect/context inputs read as zeros, as in :func:`predict`; an
    inactive cause leaves the prediction (and so the Jacobian) undefined.
    """
    names = [n for n, _ in P.mapping.slots]
    if inputs[names.index("cause")] is SHARP:
        raise StructuralIntegrityError("Jacobian undefined without a cause pattern")
    u = assemble(P.mapping.slots, inputs)
    return P.mapping.input_jacobian(u)[:, slot_slice(P.mapping.slots, "cause")]


def dual_act(D: DualSchema, o_x: Pattern, o_star: Pattern, o_v: Pattern = SHARP) -> Pattern:
    if o_star is SHARP:
        return SHARP
    u = assemble(D.mapping.slots, D.slots_for(o_x, o_star, o_v))
    return vector(D.mapping.forward(u))


def tune_dual_distal(
    D: DualSchema,
    P: PredictiveSchema,
    o_star: Pattern,
    o_x_next: Pattern,
    snapshot: Optional[DistalSnapshot],
) -> DualSchema:
    """One distal-learning step on the dual's parameters.

    The effect-space error ``o_star - o_x_next`` is mapped into cause space with
    the transposed forward-model Jacobian, then pushed through the dual mapping.
    """
    if snapshot is None or snapshot.cause_inputs is None:
        log.warning("dual %s->%s: no forward-model record for this step; skipped", D.cause, D.effect)
        return D
    if o_star is SHARP or o_x_next is SHARP:
        return D
    e_d = o_star - o_x_next
    J = jacobian_wrt_cause(P, snapshot.cause_inputs)
    grad_out = -(J.T @ e_d)
    u = assemble(D.mapping.slots, snapshot.dual_inputs)
    grads = D.mapping.gradients(u, grad_out)
    return replace(D, mapping=D.mapping.sgd(grads, D.learning_rate))
