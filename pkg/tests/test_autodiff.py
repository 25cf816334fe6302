import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapl import autodiff as ad
from mapl.autodiff import (
    GradientDescent,
    NonFiniteError,
    ShapeError,
    Tape,
    Tensor,
    backward,
    gradient_check,
)


def test_softmax_symmetry():
    out = ad.softmax(Tensor([0.0, 0.0]), axis=0)
    np.testing.assert_allclose(out.data, [0.5, 0.5])


def test_sigmoid_at_zero():
    assert ad.sigmoid(Tensor(0.0)).item() == pytest.approx(0.5)


def test_relu_definition():
    np.testing.assert_allclose(ad.relu(Tensor([-1.0, 2.0])).data, [0.0, 2.0])


def test_backward_square():
    x = Tensor(3.0, requires_grad=True)
    with Tape():
        y = ad.mul(x, x)
        grads = backward(y)
    assert grads[x] == pytest.approx(6.0)


def test_backward_sigmoid_derivative():
    x = Tensor(0.0, requires_grad=True)
    with Tape():
        y = ad.sigmoid(x)
        grads = backward(y)
    assert grads[x] == pytest.approx(0.25)


def test_backward_rejects_non_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with Tape():
        y = ad.mul(x, x)
        with pytest.raises(ShapeError):
            backward(y)


def test_backward_unreachable_param_is_zero():
    x = Tensor(2.0, requires_grad=True)
    unused = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape():
        y = ad.mul(x, x)
        grads = backward(y, wrt=[x, unused])
    assert grads[x] == pytest.approx(4.0)
    np.testing.assert_array_equal(grads[unused], np.zeros((2, 2)))


def test_shape_mismatch_names_both_shapes():
    a = Tensor(np.zeros((2, 3)))
    b = Tensor(np.zeros((4, 2)))
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(4, 2\)"):
        ad.matmul(a, b)


def test_gradient_check_square():
    err = gradient_check(lambda t: ad.mul(t, t), Tensor(3.0), step=1e-3)
    assert err < 1e-6


def test_gradient_check_rejects_bad_step():
    with pytest.raises(ValueError):
        gradient_check(lambda t: ad.mul(t, t), Tensor(1.0), step=0.0)


def test_gradient_check_rejects_non_finite():
    with pytest.raises(NonFiniteError):
        gradient_check(lambda t: ad.mul(t, Tensor(np.nan)), Tensor(1.0))


@pytest.mark.parametrize(
    "name,f,shape",
    [
        ("add", lambda t: ad.tsum(ad.add(t, ad.mul(t, t))), (3, 2)),
        ("sub", lambda t: ad.tsum(ad.sub(ad.mul(t, t), t)), (4,)),
        ("mul", lambda t: ad.tsum(ad.mul(t, ad.add(t, 1.0))), (2, 2)),
        ("matmul", lambda t: ad.tsum(ad.matmul(t, ad.transpose(t))), (3, 4)),
        ("sigmoid", lambda t: ad.tsum(ad.sigmoid(t)), (5,)),
        ("tanh", lambda t: ad.tsum(ad.tanh(t)), (5,)),
        ("relu", lambda t: ad.tsum(ad.relu(t)), (6,)),
        ("softmax", lambda t: ad.tsum(ad.mul(ad.softmax(t, axis=0), Tensor(np.arange(5.0)))), (5,)),
        ("l2norm", lambda t: ad.tsum(ad.l2norm(t, axis=0)), (3, 4)),
        ("l2norm_all", lambda t: ad.l2norm(t), (7,)),
        ("mean", lambda t: ad.mean(t), (3, 3)),
        ("mean_axis", lambda t: ad.tsum(ad.mul(ad.mean(t, axis=0), Tensor(np.arange(4.0)))), (3, 4)),
        ("concat", lambda t: ad.tsum(ad.mul(ad.concat([t, ad.mul(t, t)], axis=0), 0.5)), (2, 3)),
        ("reshape", lambda t: ad.tsum(ad.mul(ad.reshape(t, (6,)), Tensor(np.arange(6.0)))), (2, 3)),
        ("take_rows", lambda t: ad.tsum(ad.take_rows(ad.mul(t, t), [0, 2, 2])), (4, 3)),
        ("broadcast_add", lambda t: ad.tsum(ad.mul(ad.add(t, Tensor(np.arange(3.0))), t)), (4, 3)),
    ],
)
def test_finite_difference_agreement(name, f, shape):
    rng = np.random.default_rng(abs(hash(name)) % 2**32)
    theta = Tensor(rng.uniform(-1.0, 1.0, size=shape).astype(np.float32))
    assert gradient_check(f, theta, step=1e-3) < 1e-4, name


@given(st.lists(st.floats(-8, 8), min_size=2, max_size=12))
@settings(max_examples=50, deadline=None)
def test_softmax_normalization_property(values):
    # the max logit gap (16) keeps exp(-gap) above float32 eps/2, so
    # outputs stay strictly inside (0, 1) after rounding
    out = ad.softmax(Tensor(np.asarray(values, dtype=np.float32)), axis=0).data
    assert abs(out.sum() - 1.0) < 1e-6
    assert np.all(out > 0.0) and np.all(out < 1.0)


def test_softmax_monotone_in_own_logit():
    base = np.array([0.3, 0.1, 0.5], dtype=np.float32)
    lifted = base.copy()
    lifted[1] += 0.7
    a = ad.softmax(Tensor(base), axis=0).data
    b = ad.softmax(Tensor(lifted), axis=0).data
    assert b[1] >= a[1]


def test_tape_replay_bit_identical():
    rng = np.random.default_rng(0)
    x = Tensor(rng.standard_normal((4, 4)).astype(np.float32), requires_grad=True)
    w = Tensor(rng.standard_normal((4, 4)).astype(np.float32), requires_grad=True)
    with Tape() as tape:
        h = ad.relu(ad.matmul(x, w))
        ad.mean(ad.softmax(h, axis=1))
    assert tape.replay() == 4


def test_forward_determinism():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((8, 8)).astype(np.float32)
    w = rng.standard_normal((8, 8)).astype(np.float32)

    def run():
        return ad.sigmoid(ad.matmul(Tensor(x), Tensor(w))).data.tobytes()

    assert run() == run()


def test_optimizer_basic_step():
    p = Tensor(1.0, requires_grad=True)
    opt = GradientDescent([p], learning_rate=0.1)
    opt.step({p: np.asarray(2.0, dtype=np.float32)})
    assert p.data == pytest.approx(0.8)


def test_optimizer_zero_gradient_identity():
    p = Tensor([1.0, -2.0], requires_grad=True)
    before = p.data.copy()
    GradientDescent([p], learning_rate=0.5).step({p: np.zeros(2, dtype=np.float32)})
    np.testing.assert_array_equal(p.data, before)


def test_optimizer_two_steps_on_square():
    # descent on f(x) = x^2 from x=1 with lr 0.25: x -> 0.5 -> 0.25,
    # objective values 0.25 then 0.0625
    x = Tensor(1.0, requires_grad=True)
    opt = GradientDescent([x], learning_rate=0.25)
    seen = []
    for _ in range(2):
        with Tape():
            y = ad.mul(x, x)
            grads = backward(y)
        opt.step(grads)
        seen.append(float(x.data) ** 2)
    assert float(x.data) == pytest.approx(0.25)
    assert seen == pytest.approx([0.25, 0.0625])


def test_optimizer_refuses_non_finite():
    p = Tensor(1.0, requires_grad=True)
    opt = GradientDescent([p], learning_rate=0.1)
    with pytest.raises(NonFiniteError):
        opt.step({p: np.asarray(np.nan, dtype=np.float32)})
    assert p.data == pytest.approx(1.0)


def test_optimizer_touches_only_registered_params():
    p = Tensor(1.0, requires_grad=True)
    q = Tensor(5.0, requires_grad=True)
    GradientDescent([p], learning_rate=0.1).step(
        {p: np.asarray(1.0, dtype=np.float32), q: np.asarray(1.0, dtype=np.float32)}
    )
    assert q.data == pytest.approx(5.0)


def test_truncation_makes_evicted_outputs_leaves():
    x = Tensor(2.0, requires_grad=True)
    with Tape() as tape:
        tape.mark_frame(0)
        h = ad.mul(x, x)
        tape.mark_frame(1)
        tape.evict_before(1)
        y = ad.mul(h, Tensor(3.0))
        grads = backward(y, wrt=[x])
    np.testing.assert_array_equal(grads[x], np.zeros_like(x.data))
