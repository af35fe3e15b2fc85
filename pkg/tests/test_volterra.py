import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from interconnect.spectral import GridFunction, TimeGrid
from interconnect.volterra import (CaseClassification, CaseTag, ConvolutionKernel,
                                   DistributionalControl, MisclassificationError,
                                   ResolventDivergenceError, SecondKindProblem,
                                   StepSizeError, differentiate_antiderivative,
                                   resolvent_series, second_kind_residual,
                                   solve_interconnection, solve_second_kind_direct)

GRID = TimeGrid(1.0, 1000)
T = GRID.nodes


def ones(t):
    return np.ones_like(t)


def test_constant_kernel_oracle():
    prob = SecondKindProblem(1.0, ones, GridFunction(GRID, T))
    exact = 1 - np.exp(-T)
    U = solve_second_kind_direct(prob).values
    assert np.max(np.abs(U - exact)) <= 1e-4
    assert U[-1] == pytest.approx(0.632121, abs=1e-6)
    R = resolvent_series(prob, tol=1e-10).values
    assert np.max(np.abs(R - exact)) <= 1e-4


def test_kernel_free_case():
    prob = SecondKindProblem(5.0, np.zeros_like, GridFunction(GRID, np.sin(T)))
    np.testing.assert_allclose(solve_second_kind_direct(prob).values, np.sin(T) / 5, atol=1e-15)
    res = resolvent_series(prob, return_details=True)
    assert np.all(res.resolvent == 0)
    np.testing.assert_allclose(res.U.values, np.sin(T) / 5, atol=1e-15)


def test_exponential_kernel_self_convergence():
    k = lambda t: np.exp(-t)
    coarse = solve_second_kind_direct(SecondKindProblem(1.0, k, GridFunction(GRID, T)))
    fine_grid = TimeGrid(1.0, 20000)
    fine = solve_second_kind_direct(
        SecondKindProblem(1.0, k, GridFunction(fine_grid, fine_grid.nodes)))
    assert np.max(np.abs(coarse.values - fine.values[::20])) <= 1e-5


def test_linear_kernel_solvers_agree():
    prob = SecondKindProblem(1.0, lambda t: t, GridFunction(GRID, T**2 / 2))
    diff = solve_second_kind_direct(prob).values - resolvent_series(prob).values
    assert np.max(np.abs(diff)) <= 1e-5


def test_resolvent_divergence_reports_terms():
    prob = SecondKindProblem(1e-3, ones, GridFunction(GRID, T))
    with pytest.raises(ResolventDivergenceError) as err:
        resolvent_series(prob, max_terms=5)
    assert len(err.value.term_norms) == 5


def test_step_size_error():
    grid = TimeGrid(1.0, 10)
    prob = SecondKindProblem(1.0, lambda t: -20.0 * np.ones_like(t), GridFunction(grid, grid.nodes))
    with pytest.raises(StepSizeError):
        solve_second_kind_direct(prob)


def test_w_must_vanish_at_zero():
    with pytest.raises(ValueError):
        SecondKindProblem(1.0, ones, GridFunction(GRID, 1.0 + T))


def test_differentiate_antiderivative():
    np.testing.assert_allclose(differentiate_antiderivative(GridFunction(GRID, T)).values, 1.0)
    d = differentiate_antiderivative(GridFunction(GRID, np.sin(T))).values
    assert np.max(np.abs(d - np.cos(T))) <= 1e-5
    assert np.all(differentiate_antiderivative(GridFunction(GRID, 0.0)).values == 0)


def test_regular_interconnection():
    kern = ConvolutionKernel(lambda t: 1.0 + t, ones)
    regular = CaseClassification(CaseTag.REGULAR)
    ctrl = solve_interconnection(regular, GridFunction(GRID, 0.0), kern)
    assert ctrl.order == 0 and np.all(ctrl.antiderivative.values == 0)
    assert np.all(ctrl.u_values.values == 0)
    ctrl = solve_interconnection(regular, GridFunction(GRID, T), kern)
    assert ctrl.order == 0
    assert np.max(np.abs(ctrl.u_values.values - np.exp(-T))) <= 1e-3


def test_singular_interconnection_order_one():
    kern = ConvolutionKernel(lambda t: t, ones, second_derivative=np.zeros_like)
    case = CaseClassification(CaseTag.SINGULAR, 1)
    assert case.label == "Singular(1)"
    ctrl = solve_interconnection(case, GridFunction(GRID, T), kern)
    assert ctrl.order == 1 and ctrl.u_values is None
    np.testing.assert_allclose(ctrl.antiderivative.values, T, atol=1e-14)


def test_misclassification_and_unsupported():
    kern = ConvolutionKernel(lambda t: 1.0 + t, ones, second_derivative=np.zeros_like)
    with pytest.raises(MisclassificationError):
        solve_interconnection(CaseClassification(CaseTag.SINGULAR, 1), GridFunction(GRID, T), kern)
    flat = ConvolutionKernel(lambda t: t, ones)
    with pytest.raises(MisclassificationError):
        solve_interconnection(CaseClassification(CaseTag.REGULAR), GridFunction(GRID, T), flat)
    with pytest.raises(NotImplementedError):
        solve_interconnection(CaseClassification(CaseTag.UNSUPPORTED), GridFunction(GRID, T), flat)
    with pytest.raises(NotImplementedError):
        solve_interconnection(CaseClassification(CaseTag.SINGULAR, 3), GridFunction(GRID, T), flat)


def test_distributional_control_validation():
    with pytest.raises(ValueError):
        DistributionalControl(0, GridFunction(GRID, T))
    with pytest.raises(ValueError):
        DistributionalControl(1, GridFunction(GRID, T), GridFunction(GRID, 1.0))
    with pytest.raises(ValueError):
        DistributionalControl(1, GridFunction(GRID, 1.0 + T))


def test_smoothness_check():
    assert ConvolutionKernel(np.cos, lambda t: -np.sin(t)).check_smoothness(1.0)
    assert not ConvolutionKernel(np.sqrt, lambda t: np.ones_like(t)).check_smoothness(1.0)


def test_residual_converges_at_second_order():
    k = lambda t: np.exp(-t) * np.cos(3 * t)
    res = []
    for M in (500, 1000, 2000):
        grid = TimeGrid(1.0, M)
        prob = SecondKindProblem(1.0, k, GridFunction(grid, np.sin(grid.nodes)))
        res.append(second_kind_residual(prob, solve_second_kind_direct(prob)))
    assert res[0] / res[1] > 3 and res[1] / res[2] > 3


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-2, 2), b=st.floats(0, 3), c=st.floats(-1, 1),
       kappa=st.floats(0.5, 3), freq=st.floats(0.5, 4))
def test_direct_and_resolvent_agree(a, b, c, kappa, freq):
    k = lambda t: a * np.exp(-b * t) + c * t
    prob = SecondKindProblem(kappa, k, GridFunction(GRID, np.sin(freq * T)))
    U = solve_second_kind_direct(prob).values
    diff = np.max(np.abs(U - resolvent_series(prob).values))
    # both are O(h^2) schemes; the gap scales with the solution and kernel size
    scale = max(1.0, np.max(np.abs(U))) * (1.0 + (abs(a) + abs(c)) / kappa)
    assert diff <= 1e-6 * scale


@settings(max_examples=20, deadline=None)
@given(s1=st.floats(-2, 2), s2=st.floats(-2, 2))
def test_direct_solver_is_linear(s1, s2):
    grid = TimeGrid(1.0, 200)
    t = grid.nodes
    k = lambda t: np.cos(2 * t)
    solve = lambda w: solve_second_kind_direct(SecondKindProblem(2.0, k, GridFunction(grid, w))).values
    w1, w2 = t**2, np.sin(t)
    np.testing.assert_allclose(solve(s1 * w1 + s2 * w2), s1 * solve(w1) + s2 * solve(w2), atol=1e-12)
