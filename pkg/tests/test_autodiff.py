import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from epiwave.core import autodiff as ad
from epiwave.core.gradcheck import finite_diff_check


def grad_of(fn, *values):
    """Analytic gradients of scalar fn(*nodes) w.r.t. every input."""
    tape = ad.Tape()
    nodes = [tape.param(v) for v in values]
    out = fn(*nodes)
    tape.backward(out)
    return out.value, [n.grad if n.grad is not None else np.zeros_like(n.value) for n in nodes]


def check_grads(fn, values, tol=1e-4):
    params = {f"x{i}": np.array(v, dtype=float) for i, v in enumerate(values)}

    def loss(p):
        tape = ad.Tape()
        return float(fn(*[tape.const(p[f"x{i}"]) for i in range(len(values))]).value)

    _, grads = grad_of(fn, *params.values())
    report = finite_diff_check(loss, params, {f"x{i}": g for i, g in enumerate(grads)}, tolerance=tol)
    bad = [r for r in report if not r.passed]
    assert not bad, bad


def weighted_sum(node, seed=0):
    """Scalar projection with fixed random weights so every output entry matters."""
    w = np.random.default_rng(seed).uniform(0.5, 1.5, size=node.value.shape)
    prod = ad.mul(node, node.tape.const(w))
    flat = ad.reshape(prod, (1, -1))
    return ad.reshape(ad.matmul(flat, node.tape.const(np.ones((flat.value.shape[1], 1)))), ())


small = arrays(np.float64, (3, 4), elements=st.floats(-1, 1, allow_nan=False))


# --- examples ----------------------------------------------------------------

def test_matmul_examples():
    tape = ad.Tape()
    b = np.arange(6.0).reshape(3, 2)
    assert np.array_equal(ad.matmul(tape.const(np.eye(3)), tape.const(b)).value, b)
    out = ad.matmul(tape.const([[1.0, 2.0], [3.0, 4.0]]), tape.const([[0.0], [1.0]])).value
    assert np.array_equal(out, [[2.0], [4.0]])
    assert np.array_equal(ad.matmul(tape.const(np.zeros((2, 3))), tape.const(b)).value, np.zeros((2, 2)))


def test_matmul_shape_error_names_both_shapes():
    tape = ad.Tape()
    with pytest.raises(ad.ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
        ad.matmul(tape.const(np.zeros((2, 3))), tape.const(np.zeros((2, 2))))


def test_relu_examples():
    tape = ad.Tape()
    assert np.array_equal(ad.relu(tape.const([[-1.0, 2.0]])).value, [[0.0, 2.0]])
    assert np.array_equal(ad.relu(tape.const(-np.ones((2, 2)))).value, np.zeros((2, 2)))
    _, (g,) = grad_of(lambda x: ad.reshape(ad.matmul(ad.relu(x), x.tape.const(np.ones((2, 1)))), ()),
                      np.array([[-1.0, 2.0]]))
    assert np.array_equal(g, [[0.0, 1.0]])


def test_relu_subgradient_at_zero_is_zero():
    _, (g,) = grad_of(lambda x: ad.reshape(ad.matmul(ad.relu(x), x.tape.const(np.ones((1, 1)))), ()),
                      np.array([[0.0]]))
    assert g[0, 0] == 0.0


def test_lstm_cell_zero_weights_zero_state():
    tape = ad.Tape()
    x = tape.const(np.ones((2, 3)))
    h = c = tape.const(np.zeros((2, 4)))
    h2, c2 = ad.lstm_cell(x, h, c, tape.const(np.zeros((3, 16))), tape.const(np.zeros((4, 16))),
                          tape.const(np.zeros(16)))
    assert np.array_equal(h2.value, np.zeros((2, 4)))
    assert np.array_equal(c2.value, np.zeros((2, 4)))


def test_lstm_cell_saturated_forget_keeps_cell():
    hidden = 3
    tape = ad.Tape()
    bias = np.zeros(4 * hidden)
    bias[:hidden] = -1e4  # input gate -> 0
    bias[hidden:2 * hidden] = 1e4  # forget gate -> 1
    c = np.array([[0.3, -0.7, 1.2]])
    _, c2 = ad.lstm_cell(tape.const(np.ones((1, 2))), tape.const(np.full((1, hidden), 0.1)), tape.const(c),
                         tape.const(np.zeros((2, 4 * hidden))), tape.const(np.zeros((hidden, 4 * hidden))),
                         tape.const(bias))
    assert np.array_equal(c2.value, c)


def test_lstm_cell_shape_error():
    tape = ad.Tape()
    with pytest.raises(ad.ShapeError):
        ad.lstm_cell(tape.const(np.ones((1, 2))), tape.const(np.zeros((1, 3))), tape.const(np.zeros((1, 3))),
                     tape.const(np.zeros((5, 12))), tape.const(np.zeros((3, 12))), tape.const(np.zeros(12)))


def test_lstm_cell_gradcheck():
    rng = np.random.default_rng(3)
    hidden = 3

    def fn(x, h, c, w_in, w_rec, b):
        h2, c2 = ad.lstm_cell(x, h, c, w_in, w_rec, b)
        return weighted_sum(ad.concat([h2, c2], axis=-1))

    check_grads(fn, [rng.uniform(-1, 1, (2, 4)), rng.uniform(-1, 1, (2, hidden)), rng.uniform(-1, 1, (2, hidden)),
                     rng.uniform(-1, 1, (4, 4 * hidden)), rng.uniform(-1, 1, (hidden, 4 * hidden)),
                     rng.uniform(-1, 1, 4 * hidden)])


def test_lstm_layer_matches_composed_cells():
    rng = np.random.default_rng(5)
    steps, rows, width, hidden = 6, 3, 2, 4
    vals = [rng.uniform(-1, 1, (steps, rows, width)), rng.uniform(-1, 1, (width, 4 * hidden)),
            rng.uniform(-1, 1, (hidden, 4 * hidden)), rng.uniform(-1, 1, 4 * hidden),
            rng.uniform(-1, 1, (rows, hidden)), rng.uniform(-1, 1, (rows, hidden))]

    def fused(x, w_in, w_rec, b, h0, c0):
        return weighted_sum(ad.lstm_layer(x, w_in, w_rec, b, h0, c0))

    def composed(x, w_in, w_rec, b, h0, c0):
        h, c, outs = h0, c0, []
        for t in range(steps):
            h, c = ad.lstm_cell(ad.take(x, t, axis=0), h, c, w_in, w_rec, b)
            outs.append(ad.reshape(ad.concat([h, c], axis=-1), (1, rows, 2 * hidden)))
        return weighted_sum(ad.concat(outs, axis=0))

    v1, g1 = grad_of(fused, *vals)
    v2, g2 = grad_of(composed, *vals)
    assert np.allclose(v1, v2, rtol=1e-12, atol=1e-12)
    for a, b in zip(g1, g2):
        assert np.allclose(a, b, rtol=1e-10, atol=1e-12)


def test_lstm_layer_gradcheck():
    rng = np.random.default_rng(8)
    check_grads(lambda *n: weighted_sum(ad.lstm_layer(*n)),
                [rng.uniform(-1, 1, (4, 2, 3)), rng.uniform(-1, 1, (3, 8)), rng.uniform(-1, 1, (2, 8)),
                 rng.uniform(-1, 1, 8), rng.uniform(-1, 1, (2, 2)), rng.uniform(-1, 1, (2, 2))])


def test_exp_row_scale_examples():
    tape = ad.Tape()
    x = np.arange(6.0).reshape(2, 3) + 1
    out = ad.exp_row_scale(tape.const(x), tape.const([0.1, 0.0]), 10.0).value
    assert out[0] == pytest.approx(x[0] * 1.10517091807564, rel=1e-12)
    assert np.array_equal(out[1], x[1])
    assert np.array_equal(ad.exp_row_scale(tape.const(x), tape.const([0.7, -2.0]), 0.0).value, x)
    assert np.array_equal(ad.exp_row_scale(tape.const(x), tape.const([0.0, 0.0]), 123.0).value, x)


def test_exp_row_scale_clamps_and_counts():
    tape = ad.Tape()
    x = tape.param(np.ones((2, 1)))
    rate = tape.param(np.array([1.0, 0.1]))
    out = ad.exp_row_scale(x, rate, 100.0)
    assert out.value[0, 0] == pytest.approx(np.exp(50.0))
    assert tape.clamped == 1
    tape.backward(ad.reshape(ad.matmul(ad.transpose(out, (1, 0)), tape.const(np.ones((2, 1)))), ()))
    assert rate.grad[0] == 0.0 and rate.grad[1] != 0.0


def test_squared_error_mean_examples():
    tape = ad.Tape()
    pred = tape.const(np.array([[[1.0, -1.0]]]))  # (B=1, D2=1, n=2)
    assert ad.squared_error_mean(pred, np.zeros((1, 1, 2)), axes=(1, 2)).value[0] == 1.0
    assert ad.squared_error_mean(pred, pred.value, axes=(1, 2)).value[0] == 0.0
    scaled = ad.squared_error_mean(ad.scale(pred, 3.0), np.zeros((1, 1, 2)), axes=(1, 2)).value[0]
    assert scaled == pytest.approx(9.0)


def test_backward_needs_scalar():
    tape = ad.Tape()
    x = tape.param(np.ones(3))
    with pytest.raises(ad.ShapeError):
        tape.backward(ad.scale(x, 2.0))


# --- gradient properties on random inputs ---------------------------------------

@settings(max_examples=25, deadline=None)
@given(small, small)
def test_elementwise_grads(a, b):
    check_grads(lambda x, y: weighted_sum(ad.add(ad.mul(x, y), ad.scale(y, 0.3))), [a, b])
    check_grads(lambda x: weighted_sum(ad.sigmoid(x)), [a])
    check_grads(lambda x: weighted_sum(ad.tanh(x)), [a])


@settings(max_examples=25, deadline=None)
@given(small)
def test_relu_grad_away_from_kinks(a):
    a = np.where(np.abs(a) < 1e-3, 0.5, a)  # central differences use a 1e-5 step; keep it off the kink
    check_grads(lambda x: weighted_sum(ad.relu(x)), [a])


@settings(max_examples=25, deadline=None)
@given(small, arrays(np.float64, (4, 2), elements=st.floats(-1, 1, allow_nan=False)))
def test_matmul_grads(a, b):
    check_grads(lambda x, y: weighted_sum(ad.matmul(x, y)), [a, b])


@settings(max_examples=15, deadline=None)
@given(arrays(np.float64, (2, 3, 3), elements=st.floats(-1, 1, allow_nan=False)), small)
def test_batched_matmul_broadcast_grads(a, b):
    check_grads(lambda x, y: weighted_sum(ad.matmul(x, y)), [a, b])


@settings(max_examples=15, deadline=None)
@given(small, small)
def test_structural_grads(a, b):
    check_grads(lambda x, y: weighted_sum(ad.concat([x, y], axis=0)), [a, b])
    check_grads(lambda x: weighted_sum(ad.take(x, slice(1, 3), axis=1)), [a])
    check_grads(lambda x: weighted_sum(ad.take(x, np.array([0, 2, 2]), axis=0)), [a])
    check_grads(lambda x: weighted_sum(ad.transpose(ad.reshape(x, (2, 6)), (1, 0))), [a])


@settings(max_examples=15, deadline=None)
@given(small, arrays(np.float64, (3,), elements=st.floats(-1, 1, allow_nan=False)))
def test_exp_row_scale_grads(a, lam):
    check_grads(lambda x, r: weighted_sum(ad.exp_row_scale(x, r, 4.0)), [a, lam])


@settings(max_examples=15, deadline=None)
@given(arrays(np.float64, (2, 3, 4), elements=st.floats(-1, 1, allow_nan=False)))
def test_mse_grads(a):
    target = np.linspace(-1, 1, a.size).reshape(a.shape)
    check_grads(lambda x: weighted_sum(ad.squared_error_mean(x, target, axes=(1, 2))), [a])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 4), elements=st.floats(-1, 1)), arrays(np.float64, (4, 5), elements=st.floats(-1, 1)),
       arrays(np.float64, (5, 2), elements=st.floats(-1, 1)))
def test_matmul_associativity(a, b, c):
    assert np.allclose((a @ b) @ c, a @ (b @ c), rtol=0, atol=1e-10)
