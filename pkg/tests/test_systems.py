"""Plant stepping, remote estimation, and controller synthesis."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import solve_discrete_are

from ncsim.errors import ConfigurationError, SynthesisError
from ncsim.systems import (LtiSystem, PendulumParams, control_input,
                           dare_residual, discretize_zoh, estimate_state,
                           lqg_stage_cost, make_preset, pendulum_continuous,
                           solve_dare, step_plant)

PRESETS = ["easy", "mid", "hard", "pendulum"]


def scalar_sys(a=1.0, gain=None):
    return LtiSystem(A=[[a]], B=[[1.0]], noise_cov=[[1.0]], Q=[[100.0]],
                     R=[[1.0]], gain=gain)


# ---- construction / validation -------------------------------------------

def test_dimension_checks():
    with pytest.raises(ConfigurationError):
        LtiSystem(A=[[1.0, 0.0]], B=[[1.0]], noise_cov=[[1.0]],
                  Q=[[1.0]], R=[[1.0]])
    with pytest.raises(ConfigurationError):
        LtiSystem(A=[[1.0]], B=[[1.0], [1.0]], noise_cov=[[1.0]],
                  Q=[[1.0]], R=[[1.0]])


def test_noise_cov_must_be_diagonal_psd():
    with pytest.raises(ConfigurationError):
        LtiSystem(A=np.eye(2), B=np.eye(2), noise_cov=[[1.0, 0.5], [0.5, 1.0]],
                  Q=np.eye(2), R=np.eye(2))
    with pytest.raises(ConfigurationError):
        LtiSystem(A=[[1.0]], B=[[1.0]], noise_cov=[[-1.0]],
                  Q=[[1.0]], R=[[1.0]])


def test_r_must_be_positive_definite():
    with pytest.raises(ConfigurationError):
        LtiSystem(A=[[1.0]], B=[[1.0]], noise_cov=[[1.0]], Q=[[1.0]],
                  R=[[0.0]])


def test_pendulum_params_positive():
    with pytest.raises(ConfigurationError):
        PendulumParams(cart_mass=0.0)


# ---- step_plant ----------------------------------------------------------

def test_step_plant_cancellation():
    sys = scalar_sys(1.0)
    assert step_plant(sys, [2.0], [-2.0], [0.0]) == pytest.approx([0.0])


def test_step_plant_autonomous_growth():
    sys = scalar_sys(1.2)
    assert step_plant(sys, [1.0], [0.0], [0.0]) == pytest.approx([1.2])


def test_step_plant_equilibrium():
    sys = make_preset("pendulum")
    x = step_plant(sys, np.zeros(4), np.zeros(1), np.zeros(4))
    assert np.all(x == 0.0)


def test_step_plant_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        step_plant(scalar_sys(), [1.0, 2.0], [0.0], [0.0])


# ---- estimate_state ------------------------------------------------------

def test_estimate_single_addend():
    assert estimate_state(scalar_sys(1.0), [3.0], [[1.0]]) == pytest.approx([4.0])


def test_estimate_two_steps_autonomous():
    got = estimate_state(scalar_sys(1.2), [1.0], [[0.0], [0.0]])
    assert got == pytest.approx([1.44])


def test_estimate_requires_history():
    with pytest.raises(ConfigurationError):
        estimate_state(scalar_sys(), [1.0], [])


def test_estimate_matches_noiseless_rollout():
    # Oracle: apply the plant map three times with zero noise.
    sys = make_preset("pendulum")
    rng = np.random.default_rng(1)
    x = rng.normal(size=4)
    us = [rng.normal(size=1) for _ in range(3)]
    ref = x
    for u in us:
        ref = step_plant(sys, ref, u, np.zeros(4))
    got = estimate_state(sys, x, us)
    np.testing.assert_allclose(got, ref, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(k=st.integers(min_value=1, max_value=20),
       cls=st.sampled_from(PRESETS), seed=st.integers(0, 10**6))
def test_noiseless_roundtrip_property(k, cls, seed):
    """The estimator replays exactly k noiseless plant steps."""
    sys = make_preset(cls)
    rng = np.random.default_rng(seed)
    x = rng.normal(size=sys.n)
    us = [rng.normal(size=sys.m) for _ in range(k)]
    ref = x
    for u in us:
        ref = step_plant(sys, ref, u, np.zeros(sys.n))
    np.testing.assert_allclose(estimate_state(sys, x, us), ref,
                               rtol=1e-9, atol=1e-12)


def test_estimator_error_is_zero_mean():
    """Averaged over noise, truth minus estimate vanishes (4 SE bound)."""
    for cls in ("hard", "pendulum"):
        sys = make_preset(cls)
        delta, n_draws = 5, 100_000
        rng = np.random.default_rng(7)
        # e = sum_d A^{d-1} w[t-d]; simulate the noise accumulation directly.
        errs = np.zeros((n_draws, sys.n))
        Ak = np.eye(sys.n)
        for _ in range(delta):
            w = rng.normal(size=(n_draws, sys.n)) * sys.noise_std
            errs += w @ Ak.T
            Ak = sys.A @ Ak
        mean = errs.mean(axis=0)
        se = errs.std(axis=0, ddof=1) / np.sqrt(n_draws)
        assert np.all(np.abs(mean) <= 4 * np.maximum(se, 1e-300))


# ---- control_input / lqg_stage_cost --------------------------------------

def test_control_zero_estimate():
    sys = scalar_sys(gain=[[0.9]])
    assert control_input(sys, [0.0]) == pytest.approx([0.0])


def test_control_scalar_product():
    sys = scalar_sys(gain=[[0.9]])
    assert control_input(sys, [2.0]) == pytest.approx([-1.8])


def test_control_requires_gain():
    with pytest.raises(SynthesisError):
        control_input(scalar_sys(), [1.0])


def test_control_unit_cart_offset():
    sys = make_preset("pendulum")
    got = control_input(sys, np.eye(4)[0])
    np.testing.assert_allclose(got, -sys.gain[:, 0])


def test_stage_cost_examples():
    sys = scalar_sys()
    assert lqg_stage_cost(sys, [2.0], [1.0]) == pytest.approx(401.0)
    assert lqg_stage_cost(sys, [0.0], [0.0]) == 0.0
    ip = make_preset("pendulum")
    assert lqg_stage_cost(ip, [0.1, 0.0, 0.05, 0.0], [0.0]) == pytest.approx(50.25)


# ---- solve_dare ----------------------------------------------------------

@pytest.mark.parametrize("cls", PRESETS)
def test_dare_matches_scipy(cls):
    """Independent oracle: scipy's direct Riccati solver."""
    sys = make_preset(cls)
    sol = solve_dare(sys)
    P_ref = solve_discrete_are(sys.A, sys.B, sys.Q, sys.R)
    np.testing.assert_allclose(sol.P, P_ref, rtol=1e-6, atol=1e-9)
    L_ref = np.linalg.solve(sys.R + sys.B.T @ P_ref @ sys.B,
                            sys.B.T @ P_ref @ sys.A)
    np.testing.assert_allclose(sol.gain, L_ref, rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("cls", PRESETS)
def test_dare_residual_and_stability(cls):
    sys = make_preset(cls)
    sol = solve_dare(sys)
    assert dare_residual(sys, sol.P) < 1e-8
    rho = np.max(np.abs(np.linalg.eigvals(sys.A - sys.B @ sol.gain)))
    assert rho < 1.0


def test_dare_zero_cost_limit():
    sys = LtiSystem(A=[[0.5]], B=[[1.0]], noise_cov=[[1.0]], Q=[[0.0]],
                    R=[[1.0]])
    sol = solve_dare(sys)
    np.testing.assert_allclose(sol.P, 0.0, atol=1e-9)
    np.testing.assert_allclose(sol.gain, 0.0, atol=1e-9)


def test_dare_scalar_reference_case():
    sys = scalar_sys(1.0)
    sol = solve_dare(sys)
    assert abs(1.0 - sol.gain[0, 0]) < 1.0
    assert dare_residual(sys, sol.P) < 1e-8


# ---- discretize_zoh ------------------------------------------------------

def test_zoh_zero_dynamics():
    B0 = np.array([[1.0], [2.0]])
    A, B = discretize_zoh(np.zeros((2, 2)), B0, 0.5)
    np.testing.assert_allclose(A, np.eye(2))
    np.testing.assert_allclose(B, 0.5 * B0)


def test_zoh_scalar_exponential():
    A, B = discretize_zoh([[-2.0]], [[0.0]], 0.25)
    assert A[0, 0] == pytest.approx(np.exp(-0.5), rel=1e-12)


def test_zoh_rejects_bad_period():
    with pytest.raises(ConfigurationError):
        discretize_zoh([[0.0]], [[1.0]], 0.0)


def test_pendulum_continuous_shape():
    A_c, B_c = pendulum_continuous()
    assert A_c.shape == (4, 4) and B_c.shape == (4, 1)
    # Position/angle rows are pure integrators of their velocities.
    np.testing.assert_allclose(A_c[0], [0, 1, 0, 0])
    np.testing.assert_allclose(A_c[2], [0, 0, 0, 1])


# ---- presets -------------------------------------------------------------

def test_preset_scalar_classes():
    assert make_preset("easy").A[0, 0] == 1.0
    assert make_preset("hard").A[0, 0] == 1.2


def test_preset_pendulum_noise_entry():
    assert make_preset("pendulum").noise_cov[2, 2] == pytest.approx(2.742e-5)


def test_preset_unknown_class():
    with pytest.raises(ConfigurationError):
        make_preset("impossible")


@pytest.mark.parametrize("cls", PRESETS)
def test_ideal_channel_cost_bounded(cls):
    """With one-period-old information the closed loop never diverges."""
    sys = make_preset(cls)
    rng = np.random.default_rng(3)
    x = np.zeros(sys.n)
    prev_x, prev_u = x.copy(), np.zeros(sys.m)
    total = 0.0
    for t in range(2000):
        xhat = estimate_state(sys, prev_x, [prev_u]) if t else x
        u = control_input(sys, xhat)
        total += lqg_stage_cost(sys, x, u)
        prev_x = x
        w = rng.normal(size=sys.n) * sys.noise_std
        x = step_plant(sys, x, u, w)
        prev_u = u
        assert np.max(np.abs(x)) < 1e12
    assert np.isfinite(total / 2000)
