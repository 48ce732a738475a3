import math

import numpy as np
import pytest

from srcool.params import ConfigurationError, PhysParams, derive_rates
from srcool.spins import SpinMoments
from srcool.trajectory import (
    InitConfig,
    StepConfig,
    TrajectoryFailure,
    auto_dt,
    init_trajectory,
    make_trajectory_rng,
    run_trajectory,
    sample_steps,
    step,
    validate_step_config,
)


@pytest.fixture
def small_system():
    p = PhysParams(n_atoms=3, kappa=200.0, delta=100.0, w=0.3, omega_r=0.25, gamma_c=0.1)
    return p, derive_rates(p)


class _ZeroNoise:
    """Stand-in generator: no kicks, fixed uniform draws."""

    def __init__(self, inner):
        self._inner = inner

    def random(self, n):
        return self._inner.random(n)

    def standard_normal(self, n):
        return np.zeros(n)


class _MirrorNoise:
    """Negates every normal draw of an identically seeded stream."""

    def __init__(self, inner):
        self._inner = inner

    def random(self, n):
        return self._inner.random(n)

    def standard_normal(self, n):
        return -self._inner.standard_normal(n)


def test_init_deterministic(small_system):
    p, r = small_system
    a = init_trajectory(p, InitConfig(dp0=5.0), 42, 3, rates=r)
    b = init_trajectory(p, InitConfig(dp0=5.0), 42, 3, rates=r)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.p, b.p)
    c = init_trajectory(p, InitConfig(dp0=5.0), 42, 4, rates=r)
    assert not np.array_equal(a.x, c.x)


def test_init_zero_momentum_spread(small_system):
    p, r = small_system
    st = init_trajectory(p, InitConfig(dp0=0.0), 1, 0, rates=r)
    assert np.all(st.p == 0.0)


def test_init_momentum_variance():
    p = PhysParams(n_atoms=1, kappa=200.0, delta=100.0, w=0.15, omega_r=0.25, gamma_c=0.1)
    r = derive_rates(p)
    draws = np.concatenate(
        [init_trajectory(p, InitConfig(dp0=15.0), 9, i, rates=r).p for i in range(10000)]
    )
    var = draws.var()
    se = 225.0 * math.sqrt(2.0 / draws.size)
    assert abs(var - 225.0) <= 3.0 * se


def test_init_population_matches_local_steady_state(small_system):
    p, r = small_system
    st = init_trajectory(p, InitConfig(dp0=5.0), 11, 0, rates=r)
    expected = p.w / (p.w + r.gamma_c * np.cos(st.x) ** 2)
    assert np.allclose(st.spins.pop, expected, rtol=1e-14)
    assert np.allclose(st.spins.coh, 0.0)


def test_rng_key_space_separates_runs():
    a = make_trajectory_rng(7, 5, run_id=0).standard_normal(4)
    b = make_trajectory_rng(7, 5, run_id=1).standard_normal(4)
    assert not np.array_equal(a, b)


def test_step_config_validation(small_system):
    p, r = small_system
    validate_step_config(StepConfig(dt=auto_dt(p, r, 5.0)), p, r, 5.0)
    with pytest.raises(ConfigurationError):
        validate_step_config(StepConfig(dt=1.0), p, r, 5.0)
    with pytest.raises(ConfigurationError):
        validate_step_config(StepConfig(dt=0.01, spin_scheme="rk2"), p, r, 5.0)
    with pytest.raises(ConfigurationError):
        validate_step_config(StepConfig(dt=0.01, spin_substeps=0), p, r, 5.0)
    with pytest.raises(ConfigurationError):
        validate_step_config(StepConfig(dt=0.01, noise_factor="cholesky"), p, r, 5.0)


def test_auto_dt_respects_all_rates():
    p = PhysParams(n_atoms=60, kappa=200.0, delta=100.0, w=1.3, omega_r=0.25, gamma_c=0.1)
    r = derive_rates(p)
    assert auto_dt(p, r, 1.0) == pytest.approx(0.1 / 6.0)  # N*Gamma_C dominates
    assert auto_dt(p, r, 30.0) == pytest.approx(0.1 / 15.0)  # Doppler rate dominates


def test_empty_system_fixed_point():
    # w -> 0: ground-state atoms feel no force, no noise, no spin motion
    p = PhysParams(n_atoms=2, kappa=200.0, delta=100.0, w=1e-12, omega_r=0.25, gamma_c=0.1)
    r = derive_rates(p)
    st = init_trajectory(p, InitConfig(dp0=0.0), 3, 0, rates=r)
    st.spins = SpinMoments(np.zeros(2), np.zeros((2, 2), dtype=complex))
    st.p = np.array([1.0, -2.0])
    x0 = st.x.copy()
    cfg = StepConfig(dt=0.05)
    for _ in range(10):
        step(st, p, r, cfg)
    assert np.allclose(st.p, [1.0, -2.0], atol=1e-10)
    assert np.allclose(st.spins.pop, 0.0, atol=1e-10)
    assert np.allclose(st.x, x0 + 10 * 0.05 * st.p / r.mass, atol=1e-12)


def test_node_atom_pumps_to_full_inversion():
    p = PhysParams(n_atoms=1, kappa=200.0, delta=100.0, w=0.3, omega_r=0.25, gamma_c=0.1)
    r = derive_rates(p)
    st = init_trajectory(p, InitConfig(dp0=0.0), 5, 0, rates=r)
    st.x = np.array([math.pi / 2])  # node: cos = 0, sin = 1
    st.spins = SpinMoments(np.array([0.5]), np.zeros((1, 1), dtype=complex))
    st.rng = _ZeroNoise(st.rng)
    cfg = StepConfig(dt=0.1 / 0.3)
    from srcool.motion import diffusion_matrix, drift_force

    # emission is off (cos = 0) but friction/diffusion are maximal (sin = 1)
    assert drift_force(st.x, np.zeros(1), st.spins, r)[0] == pytest.approx(0.0, abs=1e-12)
    assert diffusion_matrix(st.x, st.spins, r, p)[0, 0] == pytest.approx(0.1 * 0.5, rel=1e-12)
    for _ in range(200):
        step(st, p, r, cfg)
    assert st.spins.pop[0] > 0.999


def test_deterministic_dt_convergence_first_order():
    p = PhysParams(n_atoms=2, kappa=200.0, delta=100.0, w=0.3, omega_r=0.25, gamma_c=0.1)
    r = derive_rates(p)

    def run(dt, n):
        st = init_trajectory(p, InitConfig(dp0=3.0), 17, 0, rates=r)
        st.rng = _ZeroNoise(st.rng)
        cfg = StepConfig(dt=dt)
        for _ in range(n):
            step(st, p, r, cfg)
        return st.p.copy()

    exact = run(0.0025, 3200)
    err1 = np.max(np.abs(run(0.02, 400) - exact))
    err2 = np.max(np.abs(run(0.01, 800) - exact))
    assert err1 > 0
    assert err1 / err2 == pytest.approx(2.0, rel=0.5)  # first-order in dt


def test_run_trajectory_zero_time(small_system):
    p, r = small_system
    st = init_trajectory(p, InitConfig(dp0=5.0), 2, 0, rates=r)
    series = run_trajectory(st, p, r, StepConfig(dt=0.05), 0.0, sample_stride=10)
    assert series.times.size == 1 and series.times[0] == 0.0


def test_run_trajectory_large_stride(small_system):
    p, r = small_system
    st = init_trajectory(p, InitConfig(dp0=5.0), 2, 0, rates=r)
    series = run_trajectory(st, p, r, StepConfig(dt=0.05), 1.0, sample_stride=10**6)
    assert series.times.size == 2  # initial + final only
    assert series.times[1] == pytest.approx(1.0)


def test_sample_steps_grid():
    assert sample_steps(10, 3).tolist() == [0, 3, 6, 9, 10]
    assert sample_steps(9, 3).tolist() == [0, 3, 6, 9]
    assert sample_steps(0, 5).tolist() == [0]


def test_translation_invariance(small_system):
    p, r = small_system
    cfg = StepConfig(dt=0.02)
    a = init_trajectory(p, InitConfig(dp0=4.0), 23, 0, rates=r)
    b = init_trajectory(p, InitConfig(dp0=4.0), 23, 0, rates=r)
    b.x = b.x + 2.0 * math.pi
    sa = run_trajectory(a, p, r, cfg, 2.0, 5)
    sb = run_trajectory(b, p, r, cfg, 2.0, 5)
    assert np.allclose(sa.p2, sb.p2, rtol=1e-12)
    assert np.allclose(sb.final_x - sa.final_x, 2.0 * math.pi, atol=1e-9)


def test_parity_inversion(small_system):
    p, r = small_system
    cfg = StepConfig(dt=0.02)
    a = init_trajectory(p, InitConfig(dp0=4.0), 29, 0, rates=r)
    b = init_trajectory(p, InitConfig(dp0=4.0), 29, 0, rates=r)
    b.x = -b.x.copy()
    b.p = -b.p.copy()
    b.spins = SpinMoments(a.spins.pop.copy(), a.spins.coh.copy())
    b.rng = _MirrorNoise(init_trajectory(p, InitConfig(dp0=4.0), 29, 0, rates=r).rng)
    sa = run_trajectory(a, p, r, cfg, 2.0, 5)
    sb = run_trajectory(b, p, r, cfg, 2.0, 5)
    assert np.allclose(sb.final_p, -sa.final_p, atol=1e-12)
    assert np.allclose(sb.final_x, -sa.final_x, atol=1e-12)


def test_population_overshoot_aborts(small_system):
    # a closure-violating coherence drives a full population past 1
    p, r = small_system
    st = init_trajectory(p, InitConfig(dp0=1.0), 31, 0, rates=r)
    st.x = np.array([math.acos(0.01), 0.0, 2.0])
    st.p = np.zeros(3)
    st.spins = SpinMoments(np.array([1.0, 0.9, 0.5]), np.zeros((3, 3), dtype=complex))
    st.spins.coh[0, 1] = -0.9
    with pytest.raises(TrajectoryFailure) as exc:
        step(st, p, r, StepConfig(dt=0.05))
    assert exc.value.diagnostics["max_overshoot"] > 1e-6
