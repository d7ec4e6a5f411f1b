import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_diff, rel_err
from schema_engine.errors import StructuralIntegrityError
from schema_engine.mappings import Linear, TanhMLP, assemble, make_mapping
from schema_engine.models import (
    DistalSnapshot,
    DualSchema,
    PredictionRecord,
    PredictiveSchema,
    dual_act,
    jacobian_wrt_cause,
    predict,
    tune_dual_distal,
    tune_predictive,
)
from schema_engine.patterns import SHARP, same, vector

SLOTS2 = (("effect", 2), ("cause", 2))


def linear_P(W_cause, lr=0.1, dim=2):
    m = Linear.zeros((("effect", dim), ("cause", dim)), dim)
    W = m.W.copy()
    W[:, dim:] = W_cause
    return PredictiveSchema("x", "y", m.with_params({"W": W, "b": m.b}), learning_rate=lr)


# --- predict ----------------------------------------------------------------------

def test_zero_parameters_predict_zero():
    P = PredictiveSchema("x", "y", Linear.zeros(SLOTS2, 2))
    assert same(predict(P, vector([3, 4]), vector([1, -1])), vector([0, 0]))


def test_identity_block_on_cause():
    P = linear_P(np.eye(2))
    assert same(predict(P, vector([9, 9]), vector([2, 5])), vector([2, 5]))


def test_scaled_block_on_cause():
    P = linear_P([[0.5, 0], [0, 2]])
    assert same(predict(P, vector([9, 9]), vector([2, 1])), vector([1, 2]))


def test_predict_without_cause_is_sharp():
    assert predict(linear_P(np.eye(2)), vector([1, 1]), SHARP) is SHARP


# --- tune_predictive ----------------------------------------------------------------

def _record(P, inputs, observed):
    return PredictionRecord(0, 1, predict(P, *inputs), vector(observed), tuple(inputs))


def test_zero_error_leaves_weights():
    P = linear_P(np.eye(2))
    inputs = (vector([1, 0]), vector([2, 3]))
    Q = tune_predictive(P, _record(P, inputs, [2, 3]))
    assert np.array_equal(Q.mapping.W, P.mapping.W) and np.array_equal(Q.mapping.b, P.mapping.b)


def test_scalar_hand_gradient():
    m = Linear.zeros((("cause", 1),), 1)
    P = PredictiveSchema("x", "y", m, learning_rate=0.5)
    rec = PredictionRecord(0, 1, vector([0.0]), vector([1.0]), (vector([1.0]),))
    Q = tune_predictive(P, rec)
    assert Q.mapping.W[0, 0] == pytest.approx(0.5)


def test_scalar_gradient_matches_finite_difference():
    m = Linear.zeros((("cause", 1),), 1).with_params({"W": [[0.3]], "b": [0.1]})
    u, target = np.array([1.7]), np.array([-0.4])
    analytic = m.gradients(u, m.forward(u) - target)["W"]
    loss = lambda w: 0.5 * float(np.sum((w.reshape(1, 1) @ u + m.b - target) ** 2))  # noqa: E731
    assert rel_err(analytic, central_diff(loss, m.W)) < 1e-7


def test_repeated_tuning_converges():
    rng = np.random.default_rng(0)
    P = PredictiveSchema("x", "y", Linear.zeros(SLOTS2, 2), learning_rate=0.1)
    W_true = np.array([[1.0, 0.5], [0.0, 1.0]])
    samples = [(vector(rng.uniform(-1, 1, 2)), vector(rng.uniform(-1, 1, 2))) for _ in range(2)]
    for _ in range(200):
        for ox, oy in samples:
            P = tune_predictive(P, _record(P, (ox, oy), W_true @ oy))
    err = max(np.linalg.norm(predict(P, ox, oy) - W_true @ oy) for ox, oy in samples)
    assert err < 1e-6


def test_tune_dimension_mismatch():
    P = linear_P(np.eye(2))
    rec = PredictionRecord(0, 1, vector([0, 0]), vector([1.0]), (vector([1, 0]), vector([1, 0])))
    with pytest.raises(StructuralIntegrityError):
        tune_predictive(P, rec)


def test_error_non_increasing_on_repeated_sample():
    P = PredictiveSchema("x", "y", Linear.zeros(SLOTS2, 2), learning_rate=0.05)
    inputs, target = (vector([0.3, -0.2]), vector([1.0, 0.5])), np.array([0.7, -1.2])
    errs = []
    for _ in range(30):
        errs.append(np.linalg.norm(predict(P, *inputs) - target))
        P = tune_predictive(P, _record(P, inputs, target))
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


# --- jacobians ----------------------------------------------------------------------

def test_linear_jacobian_is_cause_block():
    P = linear_P([[1.0, 0.5], [0.0, 1.0]])
    for point in ((vector([0, 0]), vector([1, 1])), (vector([5, -2]), vector([-3, 0.1]))):
        assert np.array_equal(jacobian_wrt_cause(P, point), [[1.0, 0.5], [0.0, 1.0]])


def test_tanh_jacobian_at_zero():
    rng = np.random.default_rng(3)
    m = TanhMLP.init((("effect", 1), ("cause", 2)), 2, 5, rng, scale=1.0)
    P = PredictiveSchema("x", "y", m)
    J = jacobian_wrt_cause(P, (vector([0.0]), vector([0, 0])))
    assert np.allclose(J, m.W2 @ m.W1[:, 1:3])


def test_jacobian_needs_cause():
    with pytest.raises(StructuralIntegrityError):
        jacobian_wrt_cause(linear_P(np.eye(2)), (vector([0, 0]), SHARP))


@pytest.mark.parametrize("family", ["linear", "tanh"])
def test_jacobian_matches_finite_differences(family):
    rng = np.random.default_rng(11)
    m = make_mapping(family, (("effect", 2), ("cause", 3)), 2, rng, hidden=4)
    m = m.with_params({k: rng.uniform(-1, 1, v.shape) for k, v in m.params().items()})
    P = PredictiveSchema("x", "y", m)
    ox, oy = rng.normal(size=2), rng.normal(size=3)
    fd = central_diff(lambda c: m.forward(np.concatenate([ox, c])), oy)
    assert rel_err(jacobian_wrt_cause(P, (vector(ox), vector(oy))), fd) < 1e-5


# --- dual -------------------------------------------------------------------------

def test_dual_zero_parameters():
    D = DualSchema("x", "y", "G", Linear.zeros((("effect", 2), ("goal", 2)), 2))
    assert same(dual_act(D, vector([1, 1]), vector([2, 2])), vector([0, 0]))


def test_dual_idles_without_goal():
    D = DualSchema("x", "y", "G", Linear.zeros((("effect", 2), ("goal", 2)), 2))
    assert dual_act(D, vector([1, 1]), SHARP) is SHARP


def _scalar_pair(gain=2.0, w=0.0, lr=0.1):
    """Forward model ``x' = gain * y`` and a dual ``y = w * goal`` (effect input unused)."""
    P = PredictiveSchema("x", "y", Linear.zeros((("cause", 1),), 1).with_params(
        {"W": [[gain]], "b": [0.0]}))
    D = DualSchema("x", "y", "G", Linear.zeros((("effect", 1), ("goal", 1)), 1).with_params(
        {"W": [[0.0, w]], "b": [0.0]}), learning_rate=lr)
    return P, D


def test_distal_zero_error_no_change():
    P, D = _scalar_pair(w=0.5)
    snap = DistalSnapshot((SHARP, vector([1.0])), (vector([0.5]),))
    out = tune_dual_distal(D, P, vector([1.0]), vector([1.0]), snap)
    assert np.array_equal(out.mapping.W, D.mapping.W)


def test_distal_scalar_chain_hand_value():
    P, D = _scalar_pair(gain=2.0, w=0.0, lr=0.1)
    g = vector([1.0])
    o_y = dual_act(D, SHARP, g)
    observed = vector(2.0 * o_y)
    out = tune_dual_distal(D, P, g, observed, DistalSnapshot((SHARP, g), (o_y,)))
    assert out.mapping.W[0, 1] == pytest.approx(0.2)


def test_distal_missing_record_is_noop(caplog):
    P, D = _scalar_pair()
    out = tune_dual_distal(D, P, vector([1.0]), vector([0.0]), None)
    assert out is D
    assert "no forward-model record" in caplog.text


@settings(max_examples=200, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.2, 2.0), st.floats(-2, 2), st.floats(-1, 1), st.floats(0.01, 0.99))
def test_distal_step_never_increases_error_below_stability_bound(J, g, w, b, frac):
    # weight and bias both move, so the contraction factor is 1 - lr * J^2 * (g^2 + 1)
    lr = frac * 2.0 / (J * J * (g * g + 1.0))
    P, D = _scalar_pair(gain=J, w=w, lr=lr)
    D.mapping = D.mapping.with_params({"W": [[0.0, w]], "b": [b]})
    goal = vector([g])
    o_y = dual_act(D, SHARP, goal)
    before = abs(g - J * o_y[0])
    D2 = tune_dual_distal(D, P, goal, vector(J * o_y), DistalSnapshot((SHARP, goal), (o_y,)))
    after = abs(g - J * dual_act(D2, SHARP, goal)[0])
    assert after <= before + 1e-12


def test_closed_loop_dual_tracks_identity_plant():
    rng = np.random.default_rng(5)
    P = PredictiveSchema("x", "y", Linear.zeros((("cause", 2),), 2).with_params(
        {"W": np.eye(2), "b": np.zeros(2)}))
    D = DualSchema("x", "y", "G", Linear.zeros((("effect", 2), ("goal", 2)), 2), learning_rate=0.2)
    for _ in range(400):
        g = vector(rng.uniform(-1, 1, 2))
        o_y = dual_act(D, SHARP, g)
        D = tune_dual_distal(D, P, g, o_y, DistalSnapshot((SHARP, g), (o_y,)))
    g = vector([0.3, -0.8])
    assert np.linalg.norm(dual_act(D, SHARP, g) - g) < 1e-2


def test_assemble_reads_sharp_as_zero():
    assert np.array_equal(assemble(SLOTS2, (SHARP, vector([1, 2]))), [0, 0, 1, 2])
    with pytest.raises(StructuralIntegrityError):
        assemble(SLOTS2, (vector([1.0]), vector([1, 2])))
