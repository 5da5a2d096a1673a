import numpy as np
import pytest

from conftest import central_difference, max_rel_error
from hyperdrift.core import autodiff as ad
from hyperdrift.errors import ContractError, ShapeError


def _check(build, shapes, rng, positive=False):
    arrays = [rng.uniform(0.5, 2.0, s) if positive else rng.normal(size=s) for s in shapes]

    def value():
        tape = ad.Tape()
        leaves = [tape.leaf(a) for a in arrays]
        return float(build(tape, leaves).value)

    tape = ad.Tape()
    leaves = [tape.leaf(a) for a in arrays]
    grads = ad.backward(tape, build(tape, leaves))
    assert max_rel_error(grads, central_difference(value, arrays)) < 1e-6


@pytest.mark.parametrize("op", [ad.add, ad.sub, ad.mul])
def test_broadcasting_elementwise_gradients(op, rng):
    _check(lambda t, l: ad.sum_(op(l[0], l[1]) * l[0]), [(4, 3), (3,)], rng)
    _check(lambda t, l: ad.sum_(op(l[0], l[1]) * l[0]), [(4, 3), (4, 1)], rng)


def test_matmul_relu_mean(rng):
    _check(lambda t, l: ad.mean(ad.relu(l[0] @ l[1])), [(5, 3), (3, 4)], rng)


def test_batched_vecmat(rng):
    _check(lambda t, l: ad.sum_(ad.batched_vecmat(l[0], l[1]) * ad.batched_vecmat(l[0], l[1])),
           [(3, 4), (3, 4, 2)], rng)


def test_exp_log_clip_sum_axis(rng):
    _check(lambda t, l: ad.sum_(ad.log(ad.sum_(ad.exp(ad.clip(l[0], -1.0, 1.0)), axis=1))),
           [(6, 3)], rng)
    _check(lambda t, l: ad.sum_(ad.log(l[0]) * ad.sum_(l[0], axis=0, keepdims=True)), [(3, 2)], rng,
           positive=True)


def test_reshape_transpose(rng):
    _check(lambda t, l: ad.sum_(ad.transpose(ad.reshape(l[0], (2, 6))) @ l[1]), [(3, 4), (2, 3)], rng)


def test_constant_loss_gives_zero_gradients():
    tape = ad.Tape()
    w = tape.leaf(np.ones((2, 2)))
    grads = ad.backward(tape, tape.constant(3.0))
    assert np.array_equal(grads[0], np.zeros((2, 2)))
    assert w.grad is grads[0]


def test_least_squares_closed_form(rng):
    w, x, t = rng.normal(size=(3, 4)), rng.normal(size=(4, 1)), rng.normal(size=(3, 1))
    tape = ad.Tape()
    wv = tape.leaf(w)
    r = wv @ tape.constant(x) - tape.constant(t)
    loss = ad.sum_(r * r) * tape.constant(0.5)
    (g,) = ad.backward(tape, loss)
    np.testing.assert_allclose(g, (w @ x - t) @ x.T, rtol=1e-13, atol=1e-13)


def test_reused_node_accumulates():
    tape = ad.Tape()
    x = tape.leaf(np.array([3.0]))
    (g,) = ad.backward(tape, ad.sum_(x * x * x))
    assert g[0] == pytest.approx(27.0)


def test_backward_contracts():
    tape, other = ad.Tape(), ad.Tape()
    x = tape.leaf(np.ones(3))
    with pytest.raises(ContractError):
        ad.backward(tape, x)
    with pytest.raises(ContractError):
        ad.backward(other, ad.sum_(x))


def test_matmul_shape_error():
    tape = ad.Tape()
    with pytest.raises(ShapeError):
        tape.leaf(np.ones((2, 3))) @ tape.leaf(np.ones((2, 3)))
