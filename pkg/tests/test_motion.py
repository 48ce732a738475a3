import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srcool.motion import diffusion_matrix, drift_force, psd_project_and_factor, sample_kick
from srcool.params import DerivedRates, PhysParams
from srcool.spins import SpinMoments

from conftest import random_moments

RATES = DerivedRates(gamma_c=0.1, gamma_delta=0.1, eta=0.005, mass=2.0, g=math.sqrt(40.0))


def single_atom(pop):
    return SpinMoments(np.array([pop]), np.zeros((1, 1), dtype=complex))


def test_force_vanishes_at_antinodes():
    # sin(kx) = 0 at x = 0, pi: no dipole force and no friction
    rng = np.random.default_rng(1)
    m = random_moments(rng, 3)
    x = np.array([0.0, math.pi, 2 * math.pi])
    f = drift_force(x, np.array([3.0, -2.0, 1.0]), m, RATES)
    assert np.allclose(f, 0.0, atol=1e-13)


def test_single_atom_force_hand_value():
    # sin = cos = sqrt(2)/2, pop = 0.6, p = 10: f = -0.03 - 0.0015
    x = np.array([math.pi / 4])
    f = drift_force(x, np.array([10.0]), single_atom(0.6), RATES)
    assert f[0] == pytest.approx(-0.0315, rel=1e-12)


def test_single_atom_friction_matches_analytic_coefficient():
    # the friction part alone is -eta*Gamma_C*sin^2(kx)*pop*p
    x = np.array([1.1])
    p = np.array([7.0])
    m = single_atom(0.37)
    f_total = drift_force(x, p, m, RATES)
    f_static = drift_force(x, np.zeros(1), m, RATES)
    alpha = RATES.eta * RATES.gamma_c * math.sin(1.1) ** 2 * 0.37
    assert f_total[0] - f_static[0] == pytest.approx(-alpha * 7.0, rel=1e-12)


def params_with_kprime(kp, w=1.0):
    return PhysParams(
        n_atoms=1, kappa=200.0, delta=100.0, w=w, omega_r=0.25, gamma_c=0.1, kprime_ratio=kp
    )


def test_diffusion_single_atom_node_value():
    # sin^2 = 1, pop = 0.6, k' = 0: D = Gamma_C * 0.6 = 0.06
    d = diffusion_matrix(np.array([math.pi / 2]), single_atom(0.6), RATES, params_with_kprime(0.0))
    assert d[0, 0] == pytest.approx(0.06, rel=1e-12)


def test_diffusion_repump_recoil_term():
    # k' = k, w = 1, u2bar = 0.4, pop = 0.6: diagonal gains 0.4 * 0.4 = 0.16
    p0 = params_with_kprime(0.0)
    p1 = params_with_kprime(1.0)
    x = np.array([0.3])
    d0 = diffusion_matrix(x, single_atom(0.6), RATES, p0)
    d1 = diffusion_matrix(x, single_atom(0.6), RATES, p1)
    assert d1[0, 0] - d0[0, 0] == pytest.approx(0.16, rel=1e-12)


def test_diffusion_vanishes_at_antinodes_without_recoil():
    rng = np.random.default_rng(3)
    m = random_moments(rng, 2)
    p = PhysParams(n_atoms=2, kappa=200.0, delta=100.0, w=1.0, omega_r=0.25, gamma_c=0.1)
    d = diffusion_matrix(np.array([0.0, math.pi]), m, RATES, p)
    assert np.allclose(d, 0.0, atol=1e-14)


@given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=2**31))
@settings(max_examples=60, deadline=None)
def test_diffusion_symmetric(n, seed):
    rng = np.random.default_rng(seed)
    m = random_moments(rng, n)
    x = rng.uniform(0, 2 * np.pi, n)
    p = PhysParams(
        n_atoms=n, kappa=200.0, delta=100.0, w=0.7, omega_r=0.25, gamma_c=0.1, kprime_ratio=0.8
    )
    d = diffusion_matrix(x, m, RATES, p)
    assert np.max(np.abs(d - d.T)) < 1e-12 * max(1.0, np.max(np.abs(d)))


def test_psd_factor_zero_matrix():
    f = psd_project_and_factor(np.zeros((3, 3)))
    assert np.allclose(f.factor, 0.0)
    assert f.clamped_mass == 0.0


def test_psd_factor_diagonal():
    # ascending diagonal input: the eigenbasis is the standard basis
    f = psd_project_and_factor(np.diag([0.06, 0.16]))
    assert np.allclose(f.factor @ f.factor.T, np.diag([0.06, 0.16]), atol=1e-15)
    assert np.allclose(np.abs(f.factor), np.diag([math.sqrt(0.06), math.sqrt(0.16)]), atol=1e-15)


def test_psd_factor_clamps_tiny_negative_eigenvalue():
    eps = 1e-7
    d = np.array([[1.0, 1.0 + eps], [1.0 + eps, 1.0]])
    f = psd_project_and_factor(d)
    vals = np.linalg.eigvalsh(f.d_psd)
    assert f.clamped_mass == pytest.approx(eps, rel=1e-6)
    assert vals[0] >= -1e-10 * vals[-1]
    assert vals[-1] == pytest.approx(2.0 + eps, rel=1e-9)


def test_psd_factor_rejects_asymmetric_input():
    with pytest.raises(ValueError):
        psd_project_and_factor(np.array([[1.0, 0.5], [0.2, 1.0]]))


@given(st.integers(min_value=1, max_value=8), st.integers(min_value=0, max_value=2**31))
@settings(max_examples=60, deadline=None)
def test_psd_factor_reconstruction(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    d = 0.5 * (a + a.T)  # generally indefinite
    f = psd_project_and_factor(d)
    scale = max(np.max(np.abs(f.d_psd)), 1e-30)
    assert np.max(np.abs(f.factor @ f.factor.T - f.d_psd)) <= 1e-10 * scale
    assert np.linalg.eigvalsh(f.d_psd)[0] >= -1e-10 * scale


def test_sample_kick_zero_factor():
    f = psd_project_and_factor(np.zeros((2, 2)))
    assert np.allclose(sample_kick(f, 0.1, np.random.default_rng(0)), 0.0)


def test_sample_kick_deterministic_with_seed():
    f = psd_project_and_factor(np.diag([0.06, 0.16]))
    a = sample_kick(f, 0.1, np.random.default_rng(42))
    b = sample_kick(f, 0.1, np.random.default_rng(42))
    assert np.array_equal(a, b)


def _kick_covariance_check(d, n_draws=100000, dt=0.1, seed=5):
    f = psd_project_and_factor(d)
    rng = np.random.default_rng(seed)
    kicks = np.array([sample_kick(f, dt, rng) for _ in range(n_draws)])
    cov = kicks.T @ kicks / n_draws
    target = f.d_psd * dt
    # standard error of a covariance entry for Gaussian samples
    se = np.sqrt((np.outer(np.diag(target), np.diag(target)) + target**2) / n_draws)
    assert np.all(np.abs(cov - target) <= 3.0 * np.maximum(se, 1e-12))


def test_kick_covariance_diagonal():
    _kick_covariance_check(np.diag([0.06, 0.16]))


def test_kick_covariance_rank_one():
    v = np.array([0.3, -0.2, 0.5])
    _kick_covariance_check(np.outer(v, v))


def test_kick_covariance_near_singular():
    _kick_covariance_check(np.array([[1.0, 1.0 + 1e-7], [1.0 + 1e-7, 1.0]]))


def test_friction_quadratic_form_dissipative_after_projection():
    # Sum_jl (s_j p_j) Re[M]_jl (s_l p_l) >= 0 once Re[M] is PSD-projected
    rng = np.random.default_rng(9)
    for _ in range(20):
        n = rng.integers(2, 7)
        a = rng.normal(size=(n, n))
        raw = 0.5 * (a + a.T)  # raw closure-level Re[M], possibly indefinite
        f = psd_project_and_factor(raw)
        q = rng.normal(size=n)  # stands for sin(kx_j) * p_j
        assert q @ f.d_psd @ q >= -1e-10 * max(1.0, np.max(np.abs(f.d_psd)))
