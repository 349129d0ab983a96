import numpy as np
import pytest

from bgcn.graph import build_graph, gcn_adjacency
from bgcn.nn import (AdamState, ShapeError, adam_step, dropout, dropout_backward,
                     gcn_layer_backward, gcn_layer_forward, log_softmax, softmax,
                     softmax_cross_entropy, xavier_init)

from conftest import numeric_grad, random_graph, rel_error

FD_TOL = 1e-5
TRIALS = 20


def test_xavier_bounds_mean_and_determinism():
    w = xavier_init(16, 7, np.random.default_rng(0))
    bound = np.sqrt(6 / 23)
    draws = np.concatenate([xavier_init(16, 7, np.random.default_rng(s)).ravel()
                            for s in range(100)])
    assert draws.size >= 10**4
    assert np.all(np.abs(draws) <= bound)
    big = xavier_init(400, 250, np.random.default_rng(1)).ravel()
    se = np.sqrt(6 / 650) / np.sqrt(3) / np.sqrt(big.size)
    assert abs(big.mean()) < 3 * se
    assert np.array_equal(w, xavier_init(16, 7, np.random.default_rng(0)))


def test_gcn_forward_examples():
    iso = gcn_adjacency(build_graph([], 1))
    out, _ = gcn_layer_forward(iso, np.array([[1.0, -1.0]]), np.eye(2), "relu")
    np.testing.assert_array_equal(out, [[1.0, 0.0]])
    a = gcn_adjacency(build_graph([(0, 1)], 2))
    out, _ = gcn_layer_forward(a, np.array([[1.0], [3.0]]), np.eye(1), "none")
    np.testing.assert_array_equal(out, [[2.0], [2.0]])
    with pytest.raises(ShapeError):
        gcn_layer_forward(a, np.ones((2, 3)), np.eye(2))


def test_gcn_forward_identity_map():
    iso = gcn_adjacency(build_graph([], 1))
    h = np.array([[0.3, -4.0, 2.5]])
    out, _ = gcn_layer_forward(iso, h, np.eye(3), "none")
    np.testing.assert_array_equal(out, h)


def test_gcn_forward_matches_dense_oracle():
    rng = np.random.default_rng(3)
    for _ in range(TRIALS):
        g = random_graph(rng, 6, 0.4)
        a = gcn_adjacency(g)
        h, w = rng.standard_normal((6, 4)), rng.standard_normal((4, 3))
        out, _ = gcn_layer_forward(a, h, w, "relu")
        assert np.max(np.abs(out - np.maximum(a.to_dense() @ h @ w, 0))) <= 1e-12


def test_gcn_backward_zero_and_scalar():
    iso = gcn_adjacency(build_graph([], 1))
    _, cache = gcn_layer_forward(iso, np.array([[2.0]]), np.array([[3.0]]), "none")
    g = gcn_layer_backward(cache, np.array([[0.0]]))
    assert g.grad_w.tolist() == [[0.0]] and g.grad_input.tolist() == [[0.0]]
    g = gcn_layer_backward(cache, np.array([[1.5]]))
    assert g.grad_w.tolist() == [[3.0]]  # d(h w)/dw * 1.5 = 2 * 1.5
    assert g.grad_input.tolist() == [[4.5]]


@pytest.mark.parametrize("activation", ["relu", "none"])
def test_gcn_backward_finite_differences(activation):
    rng = np.random.default_rng(4)
    done = 0
    while done < TRIALS:
        g = random_graph(rng, 5, 0.5)
        a = gcn_adjacency(g)
        h, w = rng.standard_normal((5, 4)), rng.standard_normal((4, 3))
        r = rng.standard_normal((5, 3))
        out, cache = gcn_layer_forward(a, h, w, activation)
        if activation == "relu" and np.min(np.abs(cache.pre)) < 1e-3:
            continue  # too close to the ReLU kink for a 1e-6 step
        grads = gcn_layer_backward(cache, r)
        loss = lambda: float(np.sum(gcn_layer_forward(a, h, w, activation)[0] * r))
        assert rel_error(grads.grad_w, numeric_grad(loss, w)) < FD_TOL
        assert rel_error(grads.grad_input, numeric_grad(loss, h)) < FD_TOL
        done += 1


def test_dropout_modes():
    h = np.arange(12.0).reshape(3, 4)
    rng = np.random.default_rng(0)
    out, mask = dropout(h, 0.5, False, rng)
    assert out is h and mask is None
    out, mask = dropout(h, 1.0, True, rng)
    np.testing.assert_array_equal(out, h)
    assert np.all(mask == 1)
    with pytest.raises(ValueError):
        dropout(h, 0.0, True, rng)


def test_dropout_zero_fraction_and_scaling():
    h = np.ones((1000, 1000))
    out, mask = dropout(h, 0.5, True, np.random.default_rng(1))
    frac = np.mean(out == 0)
    assert abs(frac - 0.5) < 3 * np.sqrt(0.25 / h.size)
    assert set(np.unique(out)) == {0.0, 2.0}
    np.testing.assert_array_equal(dropout_backward(np.ones_like(h), mask, 0.5), out)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(5)
    z = rng.standard_normal((50, 7)) * 30
    assert np.max(np.abs(softmax(z).sum(axis=1) - 1)) <= 1e-12
    np.testing.assert_allclose(np.exp(log_softmax(z)), softmax(z), atol=1e-15)


def test_cross_entropy_examples():
    loss, _ = softmax_cross_entropy(np.zeros((3, 7)), np.array([0, 3, 6]), [0, 1, 2])
    assert loss == pytest.approx(np.log(7), abs=1e-12)
    logits = np.zeros((2, 3))
    logits[0, 1] = logits[1, 2] = 1000.0
    loss, grad = softmax_cross_entropy(logits, np.array([1, 2]), [0, 1])
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.isfinite(grad))
    with pytest.raises(ValueError):
        softmax_cross_entropy(logits, np.array([1, 2]), [])


def test_cross_entropy_finite_differences():
    rng = np.random.default_rng(6)
    for _ in range(TRIALS):
        z = rng.standard_normal((8, 4)) * 2
        y = rng.integers(0, 4, 8)
        mask = np.sort(rng.choice(8, 5, replace=False))
        _, grad = softmax_cross_entropy(z, y, mask)
        num = numeric_grad(lambda: softmax_cross_entropy(z, y, mask)[0], z)
        assert rel_error(grad, num) < FD_TOL
        assert np.all(grad[np.setdiff1d(np.arange(8), mask)] == 0)


def test_adam_zero_grad_is_noop():
    p = [np.array([1.0, -2.0])]
    st = AdamState.zeros_like(p)
    adam_step(p, [np.zeros(2)], st, 0.01)
    np.testing.assert_array_equal(p[0], [1.0, -2.0])
    assert st.step == 1


def test_adam_first_step_is_sign():
    for g in (3.0, -0.02, 1e-3):
        p = [np.array([0.5])]
        adam_step(p, [np.array([g])], AdamState.zeros_like(p), 0.01)
        assert p[0][0] == pytest.approx(0.5 - 0.01 * np.sign(g), abs=1e-7)


def _scalar_adam(x, steps, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    out = []
    for t in range(1, steps + 1):
        g = 2 * x
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x -= lr * (m / (1 - b1 ** t)) / ((v / (1 - b2 ** t)) ** 0.5 + eps)
        out.append(x)
    return out


def test_adam_quadratic_matches_scalar_oracle():
    p = [np.array([1.0])]
    st = AdamState.zeros_like(p)
    xs = []
    for _ in range(20):
        adam_step(p, [2 * p[0]], st, 0.1)
        xs.append(p[0][0])
    np.testing.assert_allclose(xs, _scalar_adam(1.0, 20, 0.1), rtol=0, atol=1e-14)
    # momentum carries x past 0 near step 12, so |x| only falls monotonically until then
    first_cross = next(i for i, x in enumerate(xs) if x < 0)
    mags = [1.0] + [abs(x) for x in xs[:first_cross]]
    assert all(b < a for a, b in zip(mags, mags[1:]))
    assert abs(xs[-1]) < 1.0


def test_adam_shape_mismatch():
    p = [np.zeros(2)]
    with pytest.raises(ShapeError):
        adam_step(p, [np.zeros(3)], AdamState.zeros_like(p), 0.01)
