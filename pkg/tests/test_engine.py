import numpy as np
import pytest

from srcool.engine import run_trajectory_fast
from srcool.params import PhysParams, derive_rates
from srcool.trajectory import (
    InitConfig,
    StepConfig,
    TrajectoryFailure,
    init_trajectory,
    run_trajectory,
)


@pytest.fixture
def system():
    p = PhysParams(
        n_atoms=3, kappa=200.0, delta=100.0, w=0.3, omega_r=0.25, gamma_c=0.1, kprime_ratio=1.0
    )
    return p, derive_rates(p)


@pytest.mark.parametrize("scheme", ["rk4", "euler"])
@pytest.mark.parametrize("noise_factor", ["exact", "structured"])
def test_engine_matches_reference(system, scheme, noise_factor):
    # same Philox stream, same formulas: short runs must agree very tightly
    p, r = system
    cfg = StepConfig(dt=0.01, spin_scheme=scheme, noise_factor=noise_factor)
    init = InitConfig(dp0=8.0)
    st = init_trajectory(p, init, 42, 7, rates=r)
    ref = run_trajectory(st, p, r, cfg, 1.0, 10)
    fast = run_trajectory_fast(p, r, cfg, init, 1.0, 10, 42, 7)
    assert np.array_equal(ref.times, fast.times)
    assert np.allclose(ref.p2, fast.p2, rtol=1e-9)
    assert np.allclose(ref.corr, fast.corr, rtol=1e-7, atol=1e-12)
    assert np.allclose(ref.inversion, fast.inversion, rtol=1e-9)
    assert np.allclose(ref.final_p, fast.final_p, atol=1e-9)
    assert np.allclose(ref.final_x, fast.final_x, atol=1e-9)


def test_engine_refactor_interval_matches_reference(system):
    p, r = system
    cfg = StepConfig(dt=0.01, refactor_interval=7, noise_factor="exact")
    init = InitConfig(dp0=8.0)
    st = init_trajectory(p, init, 19, 2, rates=r)
    ref = run_trajectory(st, p, r, cfg, 0.8, 20)
    fast = run_trajectory_fast(p, r, cfg, init, 0.8, 20, 19, 2)
    assert np.allclose(ref.final_p, fast.final_p, atol=1e-9)


def test_engine_single_atom_matches_reference():
    p = PhysParams(n_atoms=1, kappa=200.0, delta=100.0, w=0.15, omega_r=0.25, gamma_c=0.1)
    r = derive_rates(p)
    cfg = StepConfig(dt=0.01)
    init = InitConfig(dp0=15.0)
    st = init_trajectory(p, init, 4, 0, rates=r)
    ref = run_trajectory(st, p, r, cfg, 2.0, 50)
    fast = run_trajectory_fast(p, r, cfg, init, 2.0, 50, 4, 0)
    assert np.allclose(ref.final_p, fast.final_p, atol=1e-10)
    assert np.isnan(fast.corr).all()


def test_engine_bitwise_deterministic(system):
    p, r = system
    cfg = StepConfig(dt=0.01)
    init = InitConfig(dp0=8.0)
    a = run_trajectory_fast(p, r, cfg, init, 1.0, 10, 5, 1)
    b = run_trajectory_fast(p, r, cfg, init, 1.0, 10, 5, 1)
    assert np.array_equal(a.p2, b.p2)
    assert np.array_equal(a.final_p, b.final_p)


def test_engine_chunk_boundaries_do_not_matter(system, monkeypatch):
    import srcool.engine as eng

    p, r = system
    cfg = StepConfig(dt=0.01)
    init = InitConfig(dp0=8.0)
    big = run_trajectory_fast(p, r, cfg, init, 2.0, 20, 5, 1)
    monkeypatch.setattr(eng, "_CHUNK", 17)
    small = run_trajectory_fast(p, r, cfg, init, 2.0, 20, 5, 1)
    assert np.array_equal(big.final_p, small.final_p)
    assert np.array_equal(big.p2, small.p2)


def test_engine_failure_on_blowup(system):
    # a deliberately absurd step size blows the spin integration up
    p, r = system
    cfg = StepConfig(dt=50.0, spin_scheme="euler")
    with pytest.raises(TrajectoryFailure):
        run_trajectory_fast(p, r, cfg, InitConfig(dp0=8.0), 5000.0, 10, 6, 0)


def test_engine_zero_steps(system):
    p, r = system
    out = run_trajectory_fast(p, r, StepConfig(dt=0.01), InitConfig(dp0=8.0), 0.0, 10, 6, 0)
    assert out.times.size == 1
    assert out.p2[0] == pytest.approx(np.mean(out.final_p**2))
