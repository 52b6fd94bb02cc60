"""Gradient correctness of every primitive against central finite differences,
plus the tape's recording/replay/determinism contracts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mib import autodiff as ad
from mib.autodiff import (AutodiffError, DomainError, ShapeMismatch, Tape, Tensor,
                          apply_primitive, backward, check_gradient)

RNG = np.random.default_rng(1234)


def _std(rng, shape):
    return rng.standard_normal(shape)


def _pos(rng, shape):
    return 0.5 + np.abs(rng.standard_normal(shape))


def _away_from(points, margin=0.08):
    def sample(rng, shape):
        x = rng.standard_normal(shape)
        for p in points:
            near = np.abs(x - p) < margin
            x = np.where(near, x + 4 * margin * np.sign(x - p + 1e-12), x)
        return x
    return sample


def _case(rng, name):
    """Freeze all side constants, then return (scalar fn, input point)."""
    w34 = Tensor(rng.standard_normal((3, 4)))
    other = Tensor(rng.standard_normal((3, 4)))
    cases = {
        "add": (lambda t: ad.reduce_sum(ad.add(t, other) * w34), _std(rng, (3, 4))),
        "subtract": (lambda t: ad.reduce_sum(ad.subtract(other, t) * w34), _std(rng, (3, 4))),
        "multiply": (lambda t: ad.reduce_sum(ad.multiply(t, other) * w34), _std(rng, (3, 4))),
        "divide": (lambda t: ad.reduce_sum(ad.divide(other, t) * w34), _pos(rng, (3, 4))),
        "negate": (lambda t: ad.reduce_sum(ad.negate(t) * w34), _std(rng, (3, 4))),
        "exp": (lambda t: ad.reduce_sum(ad.exp(t) * w34), _std(rng, (3, 4))),
        "log": (lambda t: ad.reduce_sum(ad.log(t) * w34), _pos(rng, (3, 4))),
        "sqrt": (lambda t: ad.reduce_sum(ad.sqrt(t) * w34), _pos(rng, (3, 4))),
        "relu": (lambda t: ad.reduce_sum(ad.relu(t) * w34), _away_from([0.0])(rng, (3, 4))),
        "tanh": (lambda t: ad.reduce_sum(ad.tanh(t) * w34), _std(rng, (3, 4))),
        "softplus": (lambda t: ad.reduce_sum(ad.softplus(t) * w34), _std(rng, (3, 4))),
        "logaddexp": (lambda t: ad.reduce_sum(ad.logaddexp(t, other) * w34), _std(rng, (3, 4))),
        "log_mean_exp": (lambda t: ad.log_mean_exp(t), _std(rng, (3, 4))),
        "clip": (lambda t: ad.reduce_sum(ad.clip(t, -1.0, 1.0) * w34),
                 _away_from([-1.0, 1.0])(rng, (3, 4))),
    }
    if name in cases:
        return cases[name]
    if name == "matmul":
        w42, w32 = Tensor(rng.standard_normal((4, 2))), Tensor(rng.standard_normal((3, 2)))
        return lambda t: ad.reduce_sum(ad.matmul(t, w42) * w32), _std(rng, (3, 4))
    if name == "reduce_sum":
        w3 = Tensor(rng.standard_normal(3))
        return lambda t: ad.reduce_sum(ad.reduce_sum(t, axis=1) * w3), _std(rng, (3, 4))
    if name == "reduce_mean":
        w4 = Tensor(rng.standard_normal(4))
        return lambda t: ad.reduce_sum(ad.reduce_mean(t, axis=0) * w4), _std(rng, (3, 4))
    if name == "logsumexp":
        w3 = Tensor(rng.standard_normal(3))
        return lambda t: ad.reduce_sum(ad.logsumexp(t, axis=1) * w3), _std(rng, (3, 4))
    if name == "diagonal":
        w4 = Tensor(rng.standard_normal(4))
        return lambda t: ad.reduce_sum(ad.diagonal(t) * w4), _std(rng, (4, 4))
    if name == "broadcast_to":
        return lambda t: ad.reduce_sum(ad.broadcast_to(t, (3, 4)) * w34), _std(rng, (3, 1))
    if name == "reshape":
        w26 = Tensor(rng.standard_normal((2, 6)))
        return lambda t: ad.reduce_sum(ad.reshape(t, (2, 6)) * w26), _std(rng, (3, 4))
    if name == "transpose":
        w43 = Tensor(rng.standard_normal((4, 3)))
        return lambda t: ad.reduce_sum(ad.transpose(t) * w43), _std(rng, (3, 4))
    if name == "concatenate":
        tail, w54 = Tensor(rng.standard_normal((2, 4))), Tensor(rng.standard_normal((5, 4)))
        return lambda t: ad.reduce_sum(ad.concatenate([t, tail], axis=0) * w54), _std(rng, (3, 4))
    raise KeyError(name)


PRIM_NAMES = sorted(set(ad.PRIMITIVES) - {"stop_gradient"})


@pytest.mark.parametrize("name", PRIM_NAMES)
def test_primitive_gradients_match_finite_differences(name):
    rng = np.random.default_rng(abs(hash(name)) % 2**32)
    worst = 0.0
    for _ in range(100):
        fn, point = _case(rng, name)
        worst = max(worst, check_gradient(fn, point, epsilon=1e-5))
    assert worst < 1e-4, f"{name}: max rel error {worst}"


def test_all_registered_primitives_are_covered():
    for name in PRIM_NAMES:
        _case(np.random.default_rng(0), name)  # raises KeyError if a case is missing


def test_apply_primitive_dispatch():
    out = apply_primitive("add", np.ones(3), np.full(3, 2.0))
    assert np.array_equal(out.values, np.full(3, 3.0))
    with pytest.raises(KeyError):
        apply_primitive("convolve", np.ones(3))


# --- worked examples -------------------------------------------------------


def test_log_sum_exp_two_equal_terms():
    assert ad.logsumexp(Tensor([0.0, 0.0])).item() == pytest.approx(np.log(2.0), abs=1e-12)


def test_softplus_at_zero_is_log_two():
    assert ad.softplus(Tensor(0.0)).item() == pytest.approx(0.6931471805599453, abs=1e-12)


def test_matmul_identity():
    A = RNG.standard_normal((3, 3))
    out = ad.matmul(Tensor(np.eye(3)), Tensor(A))
    np.testing.assert_array_equal(out.values, A)


def test_square_loss_gradient():
    tape = Tape()
    x = tape.parameter("x", 3.0)
    g = backward(x * x)["x"].values
    np.testing.assert_allclose(g, [6.0], atol=1e-12)


def test_log_mean_exp_gradient_uniform_when_entries_equal():
    # frozen from the finite-difference oracle: d lme/dv_i = 1/n at equal entries
    tape = Tape()
    v = tape.parameter("v", np.full(5, 1.7))
    g = backward(ad.log_mean_exp(v))["v"].values
    np.testing.assert_allclose(g, np.full(5, 0.2), atol=1e-12)
    assert check_gradient(lambda t: ad.log_mean_exp(t), np.full(5, 1.7)) < 1e-7


def test_stop_gradient_contract():
    tape = Tape()
    x = tape.parameter("x", 2.0)
    g = backward(ad.stop_gradient(x) * x)["x"].values
    np.testing.assert_allclose(g, [2.0], atol=1e-12)


def test_sum_of_squares_gradcheck_tight():
    err = check_gradient(lambda t: ad.reduce_sum(t * t), RNG.standard_normal(7))
    assert err < 1e-7


def test_shared_subexpression_accumulates_once():
    # diamond graph: z = y + y with y = x * x; dz/dx = 4x
    tape = Tape()
    x = tape.parameter("x", np.array([1.5, -2.0]))
    y = x * x
    g = backward(ad.reduce_sum(y + y))["x"].values
    np.testing.assert_allclose(g, 4.0 * np.array([1.5, -2.0]), atol=1e-12)


def test_unreached_parameter_gets_zero_gradient():
    tape = Tape()
    x = tape.parameter("x", np.ones(3))
    w = tape.parameter("unused", np.ones((2, 2)))
    grads = backward(ad.reduce_sum(x * x))
    np.testing.assert_array_equal(grads["unused"].values, np.zeros((2, 2)))


# --- errors ----------------------------------------------------------------


def test_shape_mismatch_names_primitive_and_shapes():
    with pytest.raises(ShapeMismatch) as e:
        ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    assert "matmul" in str(e.value) and "(2, 3)" in str(e.value)
    with pytest.raises(ShapeMismatch):
        ad.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))


def test_log_of_nonpositive_is_domain_error():
    with pytest.raises(DomainError):
        ad.log(Tensor([1.0, 0.0]))
    with pytest.raises(DomainError):
        ad.divide(Tensor([1.0]), Tensor([0.0]))


def test_backward_rejects_non_scalar_and_off_tape_losses():
    tape = Tape()
    x = tape.parameter("x", np.ones(3))
    with pytest.raises(ShapeMismatch):
        backward(x * x)
    with pytest.raises(AutodiffError):
        backward(Tensor(1.0))  # constant, never recorded


def test_check_gradient_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        check_gradient(lambda t: ad.reduce_sum(t), np.ones(2), epsilon=1e-2)


# --- tape invariants -------------------------------------------------------


def test_tape_replay_reproduces_forward_bit_identically():
    tape = Tape()
    x = tape.parameter("x", RNG.standard_normal((4, 4)))
    y = ad.log_mean_exp(ad.exp(x) + ad.tanh(x), axis=1)
    out = ad.reduce_sum(y * y)
    assert tape.replay()
    assert out.requires_grad


def test_two_forward_passes_bit_identical():
    x = RNG.standard_normal((6, 6))

    def run():
        t = Tensor(x)
        return ad.reduce_sum(ad.log_mean_exp(ad.exp(ad.tanh(t @ Tensor(x))), axis=0)).values
    assert np.array_equal(run(), run())


def test_tensors_from_different_tapes_cannot_mix():
    t1, t2 = Tape(), Tape()
    a = t1.parameter("a", np.ones(2))
    b = t2.parameter("b", np.ones(2))
    with pytest.raises(AutodiffError):
        a + b


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=-700.0, max_value=700.0), min_size=1, max_size=16))
def test_log_mean_exp_finite_up_to_700(v):
    out = ad.log_mean_exp(Tensor(np.asarray(v))).item()
    assert np.isfinite(out)
    m = max(v)
    expected = m + np.log(np.mean(np.exp(np.asarray(v) - m)))
    assert out == expected  # exactly the documented max-shifted form


def test_infonce_objective_gradcheck_8x8():
    from mib import bounds
    S = np.random.default_rng(5).standard_normal((8, 8))
    err = check_gradient(lambda t: bounds.infonce(t).objective, S)
    assert err < 1e-4
