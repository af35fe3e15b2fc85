import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from interconnect.spectral import (GridFunction, ModalTrajectory, SpectralSystem,
                                   TimeGrid, UncontrollableModeError,
                                   control_moments, evolve_modal, moment_targets,
                                   phi_functions, terminal_norm)


def _system(lam, b, x0, t1=1.0):
    return SpectralSystem(lam, b, x0, t1)


def test_zero_input_is_pure_decay():
    grid = TimeGrid(1.0, 50)
    traj = evolve_modal(_system([-1.0], [0.0], [1.0]), GridFunction(grid, np.sin(grid.nodes)))
    assert traj.terminal[0] == pytest.approx(np.exp(-1.0), rel=1e-14)


def test_integrator_of_constant():
    grid = TimeGrid(1.0, 7)
    traj = evolve_modal(_system([0.0], [1.0], [0.0]), GridFunction(grid, 1.0))
    assert traj.terminal[0] == pytest.approx(1.0, rel=1e-14)


def test_decaying_mode_constant_control():
    grid = TimeGrid(1.0, 10)
    traj = evolve_modal(_system([-2.0], [1.0], [0.0]), GridFunction(grid, 1.0))
    assert traj.terminal[0] == pytest.approx((1 - np.exp(-2)) / 2, rel=1e-13)
    # cross-check against fine quadrature of exp(-2 (1 - s))
    s = np.linspace(0, 1, 20001)
    from scipy.integrate import simpson
    assert traj.terminal[0] == pytest.approx(simpson(np.exp(-2 * (1 - s)), x=s), rel=1e-10)


def test_moment_targets_examples():
    assert np.all(moment_targets(_system([-1.0, -4.0], [1.0, 2.0], [0.0, 0.0])).values == 0)
    m = moment_targets(_system([-1.0], [2.0], [3.0]))
    assert m.values[0] == pytest.approx(-1.5)
    m = moment_targets(_system([-1.0, -4.0], [1.0, 0.0], [1.0, 0.0]))
    assert m.values[1] == 0.0 and m.inert.tolist() == [False, True]
    with pytest.raises(UncontrollableModeError) as err:
        moment_targets(_system([-1.0], [0.0], [1.0]))
    assert err.value.index == 0


def test_terminal_norm_examples():
    grid = TimeGrid(1.0, 2)
    assert terminal_norm(ModalTrajectory(grid, np.zeros((2, 3)))) == 0
    assert terminal_norm(ModalTrajectory(grid, [[0, 0, 3.0]])) == 3
    assert terminal_norm(ModalTrajectory(grid, [[0, 1, 3.0], [0, 2, 4.0]])) == 5


def test_system_validation():
    with pytest.raises(ValueError):
        _system([-1.0, -4.0], [1.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        _system([-1.0, -1.0], [1.0, 1.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        _system([-4.0, -1.0], [1.0, 1.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        _system([-1.0], [np.nan], [0.0])
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1)
    with pytest.raises(ValueError):
        evolve_modal(_system([-1.0], [1.0], [0.0], t1=2.0), GridFunction(TimeGrid(1.0, 4), 0.0))


def test_phi_functions_series_matches_direct_formula_at_cutoff():
    for z in (0.49, 0.51, 0.5j, -0.5, 0.3 + 0.4j):
        z = np.complex128(z)
        p1, p2 = phi_functions(np.array([z]))
        assert p1[0] == pytest.approx((np.exp(z) - 1) / z, rel=1e-13)
        assert p2[0] == pytest.approx((np.exp(z) - 1 - z) / z**2, rel=1e-12)
    p1, p2 = phi_functions(np.array([0.0]))
    assert (p1[0], p2[0]) == (1.0, 0.5)


rates = st.floats(-40.0, -0.01)


@settings(max_examples=40, deadline=None)
@given(lam=rates, b=st.floats(-3, 3), x0=st.floats(-3, 3),
       c0=st.floats(-2, 2), c1=st.floats(-2, 2))
def test_affine_control_is_exact(lam, b, x0, c0, c1):
    grid = TimeGrid(1.0, 5)
    v = GridFunction(grid, c0 + c1 * grid.nodes)
    got = evolve_modal(_system([lam], [b], [x0]), v).terminal[0]
    # x(1) = e^lam x0 + b int_0^1 e^{lam (1-s)} (c0 + c1 s) ds
    e = np.exp(lam)
    i0 = (e - 1) / lam
    i1 = (e - 1 - lam) / lam**2
    expect = e * x0 + b * (c0 * i0 + c1 * i1)
    assert got == pytest.approx(expect, rel=1e-9, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_terminal_state_is_moment_identity(seed):
    rng = np.random.default_rng(seed)
    lam = -np.sort(rng.choice(np.arange(1, 30), size=3, replace=False)).astype(float)
    b = rng.uniform(0.5, 2, 3) * rng.choice([-1, 1], 3)
    x0 = rng.normal(size=3)
    grid = TimeGrid(1.0, int(rng.integers(2, 60)))
    v = GridFunction(grid, rng.normal(size=grid.M + 1))
    system = _system(lam, b, x0)
    term = evolve_modal(system, v).terminal
    mom = control_moments(system, v)
    np.testing.assert_allclose(term, np.exp(lam) * (x0 + b * mom), rtol=1e-9, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(-3, 3), c=st.floats(-3, 3))
def test_evolution_is_linear(seed, a, c):
    rng = np.random.default_rng(seed)
    grid = TimeGrid(1.0, 20)
    lam = np.array([-1.0, -4.0, -9.0])
    b = rng.normal(size=3)
    v1, v2 = rng.normal(size=(2, 21))
    sys0 = _system(lam, b, np.zeros(3))
    f = lambda v: evolve_modal(sys0, GridFunction(grid, v)).mode_values
    np.testing.assert_allclose(f(a * v1 + c * v2), a * f(v1) + c * f(v2), atol=1e-10)
