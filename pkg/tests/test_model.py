import math

import numpy as np
import pytest

from bnmlab.model import (
    Classifier,
    backward_ce,
    backward_objective,
    combine_grads,
    cross_entropy,
    forward,
    init_classifier,
    sgd_step,
    softmax_rows,
    with_class_prototypes,
)
from bnmlab.objectives import ObjectiveKind, evaluate, spectrum_gap
from bnmlab.rng import Xoshiro256pp


def _linear(w, b):
    return Classifier(w1=np.asarray(w, dtype=float), b1=np.asarray(b, dtype=float))


def _tiny_net(seed, in_dim=3, n_classes=3, hidden=None):
    return init_classifier(in_dim, n_classes, Xoshiro256pp(seed), hidden=hidden)


def _param_arrays(c):
    out = [c.w1, c.b1]
    if c.w2 is not None:
        out += [c.w2, c.b2]
    return out


def _grad_arrays(g):
    out = [g.w1, g.b1]
    if g.w2 is not None:
        out += [g.w2, g.b2]
    return out


# ---------------------------------------------------------------------------
# forward
# ---------------------------------------------------------------------------

def test_forward_zero_weights_gives_uniform():
    c = _linear(np.zeros((2, 4)), np.zeros(4))
    t = forward(c, [[1.5, -2.0], [0.0, 0.0]])
    assert np.allclose(t.probs, 0.25, atol=1e-15)


def test_forward_saturates_cleanly():
    c = _linear([[1.0, 0.0]], [0.0, 0.0])
    t = forward(c, [[50.0]])
    assert abs(t.probs[0, 0] - 1.0) <= 1e-9
    assert t.probs[0, 1] <= 1e-9


def test_forward_matches_scalar_softmax_oracle():
    c = _linear([[0.7, -0.3]], [0.1, -0.2])
    x = [[1.3]]
    z0, z1 = 1.3 * 0.7 + 0.1, 1.3 * -0.3 - 0.2
    denom = math.exp(z0) + math.exp(z1)
    t = forward(c, x)
    assert t.probs[0, 0] == pytest.approx(math.exp(z0) / denom, abs=1e-15)
    assert t.probs[0, 1] == pytest.approx(math.exp(z1) / denom, abs=1e-15)


def test_forward_shape_mismatch_raises():
    with pytest.raises(ValueError):
        forward(_linear(np.zeros((2, 3)), np.zeros(3)), [[1.0, 2.0, 3.0]])


def test_softmax_rows_sum_to_one_across_extreme_logits():
    rng = np.random.default_rng(0)
    z = rng.uniform(-500.0, 500.0, size=(40, 6))
    p = softmax_rows(z)
    assert np.abs(p.sum(axis=1) - 1.0).max() <= 1e-9


# ---------------------------------------------------------------------------
# backward_ce
# ---------------------------------------------------------------------------

def test_backward_ce_zero_when_probs_equal_labels():
    # Saturated logits (gap beyond exp underflow) make the softmax output
    # exactly one-hot.
    c = _linear([[1.0, 0.0]], [0.0, 0.0])
    t = forward(c, [[800.0]])
    labels = np.array([[1.0, 0.0]])
    assert np.array_equal(t.probs, labels)
    g = backward_ce(c, t, labels)
    assert not g.w1.any() and not g.b1.any()


def test_backward_ce_uniform_probs_closed_form():
    c = _linear(np.zeros((1, 2)), np.zeros(2))
    x = np.array([[1.0], [1.0], [1.0]])
    y = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    t = forward(c, x)
    g = backward_ce(c, t, y)
    dlogits = (0.5 - y) / 3.0
    assert np.allclose(g.w1, x.T @ dlogits, atol=1e-15)
    assert np.allclose(g.b1, dlogits.sum(axis=0), atol=1e-15)


@pytest.mark.parametrize("hidden", [None, 5])
def test_backward_ce_matches_parameter_fd(hidden):
    rng = np.random.default_rng(8)
    c = _tiny_net(8, hidden=hidden)
    x = rng.normal(size=(4, 3))
    y = np.zeros((4, 3))
    y[np.arange(4), rng.integers(0, 3, size=4)] = 1.0
    g = backward_ce(c, forward(c, x), y)
    loss = lambda cc: cross_entropy(forward(cc, x).probs, y)
    _assert_grads_match_fd(c, g, loss, tol=1e-5)


# ---------------------------------------------------------------------------
# backward_objective
# ---------------------------------------------------------------------------

def test_backward_objective_zero_gradient_passthrough():
    c = _tiny_net(1)
    x = np.random.default_rng(1).normal(size=(3, 3))
    t = forward(c, x)
    g = backward_objective(c, t, np.zeros_like(t.probs))
    assert all(not a.any() for a in _grad_arrays(g))


def test_backward_objective_row_constant_annihilated():
    # The softmax Jacobian kills directions that are constant within a row.
    c = _tiny_net(2)
    x = np.random.default_rng(2).normal(size=(4, 3))
    t = forward(c, x)
    g_a = np.outer([1.0, -2.0, 0.3, 5.0], np.ones(3))
    g = backward_objective(c, t, g_a)
    for a in _grad_arrays(g):
        assert np.abs(a).max() <= 1e-12


@pytest.mark.parametrize("hidden", [None, 4])
def test_backward_objective_bnm_end_to_end_fd(hidden):
    rng = np.random.default_rng(9)
    while True:
        c = init_classifier(3, 4, Xoshiro256pp(int(rng.integers(1 << 30))), hidden=hidden)
        x = rng.normal(size=(5, 3))
        t = forward(c, x)
        if spectrum_gap(t.probs) >= 1e-3:
            break
    ev = evaluate(ObjectiveKind.BNM, t.probs)
    g = backward_objective(c, t, ev.grad)
    loss = lambda cc: evaluate(ObjectiveKind.BNM, forward(cc, x).probs).value
    _assert_grads_match_fd(c, g, loss, tol=1e-4)


def test_two_path_cross_entropy_consistency():
    # Analytic A-gradient of cross-entropy pushed through the softmax
    # Jacobian must reproduce the closed-form (probs - labels) / B path.
    rng = np.random.default_rng(10)
    c = _tiny_net(10, hidden=6)
    x = rng.normal(size=(5, 3))
    y = np.zeros((5, 3))
    y[np.arange(5), rng.integers(0, 3, size=5)] = 1.0
    t = forward(c, x)
    g_closed = backward_ce(c, t, y)
    g_a = -y / (t.probs * y.shape[0])
    g_a[y == 0.0] = 0.0
    g_chain = backward_objective(c, t, g_a)
    for a, b in zip(_grad_arrays(g_closed), _grad_arrays(g_chain)):
        assert np.abs(a - b).max() <= 1e-10


def _assert_grads_match_fd(c, g, loss, tol, step=1e-6):
    params = _param_arrays(c)
    grads = _grad_arrays(g)
    for pi, (p, ga) in enumerate(zip(params, grads)):
        flat = p.reshape(-1)
        for k in range(flat.size):
            def loss_at(v):
                arrays = [q.copy() for q in params]
                arrays[pi].reshape(-1)[k] = v
                if c.w2 is None:
                    cc = Classifier(w1=arrays[0], b1=arrays[1])
                else:
                    cc = Classifier(w1=arrays[0], b1=arrays[1], w2=arrays[2], b2=arrays[3])
                return loss(cc)

            fd = (loss_at(flat[k] + step) - loss_at(flat[k] - step)) / (2.0 * step)
            an = ga.reshape(-1)[k]
            assert abs(an - fd) / max(1.0, abs(an)) < tol


# ---------------------------------------------------------------------------
# sgd_step
# ---------------------------------------------------------------------------

def test_sgd_zero_lr_is_identity():
    c = _tiny_net(3)
    g = backward_ce(c, forward(c, np.zeros((1, 3))), np.array([[1.0, 0.0, 0.0]]))
    assert sgd_step(c, g, 0.0) is c


def test_sgd_scalar_update():
    c = _linear([[1.0]], [0.0])
    from bnmlab.model import Gradients

    g = Gradients(w1=np.array([[2.0]]), b1=np.array([0.0]))
    c2 = sgd_step(c, g, 0.1)
    assert c2.w1[0, 0] == pytest.approx(0.8, abs=1e-15)


def test_sgd_two_steps_equal_one_combined_for_fixed_grads():
    from bnmlab.model import Gradients

    c = _linear([[1.0, -1.0]], [0.5, -0.5])
    g1 = Gradients(w1=np.array([[0.2, -0.1]]), b1=np.array([0.3, 0.0]))
    g2 = Gradients(w1=np.array([[-0.4, 0.6]]), b1=np.array([0.0, 0.1]))
    two = sgd_step(sgd_step(c, g1, 0.05), g2, 0.05)
    combined = sgd_step(c, combine_grads(g1, g2, 1.0), 0.05)
    assert np.allclose(two.w1, combined.w1, atol=1e-15)
    assert np.allclose(two.b1, combined.b1, atol=1e-15)


# ---------------------------------------------------------------------------
# init + prototypes
# ---------------------------------------------------------------------------

def test_init_is_seeded_and_scaled():
    a = init_classifier(4, 3, Xoshiro256pp(7), hidden=8)
    b = init_classifier(4, 3, Xoshiro256pp(7), hidden=8)
    assert np.array_equal(a.w1, b.w1) and np.array_equal(a.w2, b.w2)
    assert np.abs(a.w1).max() <= 0.5 / math.sqrt(4)
    assert np.abs(a.w2).max() <= 0.5 / math.sqrt(8)
    assert not a.b1.any() and not a.b2.any()


def test_prototypes_linear_head():
    c = _tiny_net(4, in_dim=2, n_classes=3)
    p = np.array([1.0, 2.0])
    c2 = with_class_prototypes(c, {2: p})
    assert np.array_equal(c2.w1[:, 2], p)
    assert c2.b1[2] == pytest.approx(-2.5)
    assert np.array_equal(c2.w1[:, 0], c.w1[:, 0])


def test_prototypes_hidden_head():
    c = _tiny_net(5, in_dim=2, n_classes=3, hidden=4)
    p = np.array([0.5, -1.0])
    c2 = with_class_prototypes(c, {1: p})
    h = np.tanh(p @ c.w1 + c.b1)
    assert np.allclose(c2.w2[:, 1], h, atol=1e-15)
    assert c2.b2[1] == pytest.approx(-0.5 * float(h @ h), abs=1e-15)
    assert np.array_equal(c2.w1, c.w1)
