import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskgan.autodiff import Tape
from maskgan.errors import ContractError, NonFiniteError
from maskgan.gradcheck import CASES, grad_check, relative_error, run_suite
from maskgan.objectives import (ObjectiveWeights, bce_gan_losses, generator_objective, l1_recon,
                                lsgan_d_loss, mse)
from maskgan.optim import AdamState, adam_step
from maskgan.rng import Rng
from oracles import adam_scalar

HALF = np.full((4, 1, 1, 1), 0.5)


def test_bce_at_half_is_two_ln_two():
    d_loss, g_loss = bce_gan_losses(HALF, HALF)
    assert float(d_loss.value) == pytest.approx(2 * math.log(2), abs=1e-12)
    assert float(g_loss.value) == pytest.approx(math.log(0.5), abs=1e-12)


def test_bce_clamps_logs_and_validates_range():
    d_loss, _ = bce_gan_losses(np.zeros(3), np.ones(3))
    assert math.isfinite(float(d_loss.value))
    assert float(d_loss.value) == pytest.approx(-2 * math.log(1e-12))
    with pytest.raises(ContractError):
        bce_gan_losses(np.array([1.5]), np.array([0.5]))


def test_lsgan_values():
    assert float(lsgan_d_loss(HALF, HALF).value) == 0.5
    assert float(lsgan_d_loss(np.ones(4), np.zeros(4)).value) == 0.0
    assert float(lsgan_d_loss(np.zeros(4), np.ones(4)).value) == 2.0


def test_generator_objective_closed_form():
    x = np.full((1, 1, 4, 4), 0.6)
    gx = x - 0.1
    val = float(generator_objective(np.zeros(4), x, gx, ObjectiveWeights(0.012)).value)
    assert val == pytest.approx(0.112, abs=1e-9)
    assert float(generator_objective(np.zeros(4), x, gx, ObjectiveWeights(0.0)).value) == \
        pytest.approx(0.1, abs=1e-9)


def test_negative_lambda_rejected():
    with pytest.raises(ContractError):
        ObjectiveWeights(-0.1)


def test_l1_and_mse():
    a = np.zeros((1, 1, 2, 2))
    b = np.array([1.0, -1.0, 2.0, 0.0]).reshape(1, 1, 2, 2)
    assert float(l1_recon(a, b).value) == 1.0
    assert float(mse(a, b).value) == 1.5
    with pytest.raises(ContractError):
        l1_recon(a, b[:, :, :1])


# --- Adam ------------------------------------------------------------------

def test_adam_first_step_moves_by_lr_times_sign():
    # with bias correction the first step is lr * g / (|g| + eps)
    p = {"w": np.array([1.0, -2.0, 0.5])}
    g = {"w": np.array([3.0, -0.001, 0.0])}
    new, state = adam_step(p, g, AdamState.for_params(p, lr=0.1))
    assert np.allclose(new["w"], [0.9, -1.9, 0.5], atol=1e-6)
    assert state.t == 1
    assert np.array_equal(p["w"], [1.0, -2.0, 0.5])   # inputs untouched


def test_adam_matches_scalar_reference():
    p = {"t": np.array([1.0])}
    state = AdamState.for_params(p, lr=0.1, beta1=0.9, beta2=0.999)
    for _ in range(200):
        p, state = adam_step(p, {"t": 2 * p["t"]}, state)
    traj = adam_scalar(lambda t: 2 * t, 1.0, 200, 0.1)
    assert p["t"][0] == pytest.approx(traj[-1], rel=1e-9, abs=1e-12)
    assert abs(p["t"][0]) < 0.1


def test_adam_rejects_non_finite_gradients():
    p = {"a": np.ones(2), "b": np.ones(2)}
    state = AdamState.for_params(p)
    with pytest.raises(NonFiniteError) as info:
        adam_step(p, {"a": np.ones(2), "b": np.array([np.nan, 0.0])}, state)
    assert info.value.where == "b"
    assert state.t == 0


def test_adam_checks_names_and_shapes():
    p = {"a": np.ones(2)}
    with pytest.raises(ContractError):
        adam_step(p, {"b": np.ones(2)}, AdamState.for_params(p))
    with pytest.raises(ContractError):
        adam_step(p, {"a": np.ones(3)}, AdamState.for_params(p))


def test_adam_keeps_float32():
    p = {"w": np.ones(3, dtype=np.float32)}
    new, st_ = adam_step(p, {"w": np.ones(3, dtype=np.float32)}, AdamState.for_params(p))
    assert new["w"].dtype == np.float32 and st_.m["w"].dtype == np.float32


def test_default_hyperparameters():
    s = AdamState()
    assert (s.lr, s.beta1, s.beta2, s.eps) == (0.00013, 0.5, 0.999, 1e-8)
    assert ObjectiveWeights().lam == 0.012


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-10, 10), n=st.floats(-10, 10))
def test_relative_error_properties(a, n):
    e = relative_error(a, n)
    assert e >= 0 and e == relative_error(n, a)
    assert relative_error(a, a) == 0


# --- gradient checker ------------------------------------------------------

def test_grad_check_catches_a_wrong_gradient():
    from maskgan import autodiff as ad
    from maskgan.autodiff import apply

    def bad_square(v):
        return apply("bad", (v,), v.value ** 2, lambda g: (g * 3 * v.value,))

    good = grad_check(lambda p: ad.mean(ad.square(p["x"])), {"x": np.array([0.3, -1.2])})
    bad = grad_check(lambda p: ad.mean(bad_square(p["x"])), {"x": np.array([0.3, -1.2])})
    assert good.ok and good.max_error < 1e-8
    assert not bad.ok and bad.max_error > 0.1


def test_suite_covers_every_layer_and_loss():
    expected = {"conv2d", "conv_transpose2d", "batchnorm_train", "batchnorm_infer",
                "leaky_relu", "sigmoid", "concat_channels", "lsgan_d_loss",
                "generator_objective", "bce_d_loss", "bce_g_loss", "l1_recon", "mse",
                "discriminator_32x32", "generator_unet"}
    assert expected <= set(CASES)


def test_suite_small_run_is_green():
    results = run_suite(instances=2, seed=123)
    for name, r in results.items():
        assert r.ok, (name, r.max_error, r.worst)
        assert r.coords_checked > 0
