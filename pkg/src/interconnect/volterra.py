"""Convolution Volterra equations that invert the interconnection.

The upstream control ``u`` must reproduce ``w(t) = v(t) - v(0)`` through the
first-kind equation ``w = int_0^t K(t - s) u(s) ds``. With ``u = U'`` and
``U(0) = 0`` an integration by parts gives the second-kind equation

    kappa U(t) + int_0^t K1(t - s) U(s) ds = w(t),   kappa = K(0), K1 = K',

which is what gets solved. When ``K(0) = 0`` the same step is applied once
more to ``K'`` and the control is only a distribution.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spectral import GridFunction, TimeGrid


class CaseTag(str, enum.Enum):
    REGULAR = "Regular"
    DUAL = "Dual"
    SINGULAR = "Singular"
    UNSUPPORTED = "Unsupported"


@dataclass(frozen=True)
class CaseClassification:
    """Which second-kind equation applies.

    ``order`` is the singular chain length ``m`` (0 for Regular/Dual).
    ``inner_products`` records the quantities the decision was based on.
    """

    tag: CaseTag
    order: int = 0
    inner_products: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        if self.tag is CaseTag.SINGULAR:
            return f"Singular({self.order})"
        return self.tag.value


@dataclass(frozen=True)
class ConvolutionKernel:
    """Kernel ``K`` on ``[0, t1]`` with optional derivative ``K'``.

    ``lift()`` returns the kernel ``K'`` (with ``K''`` as derivative when the
    kernel knows it), which is what the singular case needs.
    """

    evaluator: Callable
    derivative: Callable | None = None
    smooth: bool = True
    second_derivative: Callable | None = None
    third_derivative: Callable | None = None

    def __post_init__(self):
        if self.smooth and self.derivative is None:
            raise ValueError("a smooth kernel needs its derivative")

    @property
    def k0(self) -> float:
        return float(np.asarray(self(np.array([0.0])))[0])

    def __call__(self, t):
        return np.asarray(self.evaluator(np.asarray(t, dtype=float)), dtype=float)

    def d(self, t):
        return np.asarray(self.derivative(np.asarray(t, dtype=float)), dtype=float)

    def lift(self) -> "ConvolutionKernel":
        if self.derivative is None:
            raise ValueError("kernel derivative unknown; cannot lift")
        return ConvolutionKernel(self.derivative, self.second_derivative,
                                 smooth=self.second_derivative is not None,
                                 second_derivative=self.third_derivative)

    def check_smoothness(self, t1: float, steps=3) -> bool:
        """Taylor-remainder test ``|K(h) - K(0) - h K'(0)| = O(h^2)``.

        Halving ``h`` three times must shrink the remainder by roughly 4 each
        time (ratio above 3, or the remainder already at rounding level).
        """
        if self.derivative is None:
            return False
        ts = np.linspace(0.0, t1, 257)
        if not (np.all(np.isfinite(self(ts))) and np.all(np.isfinite(self.d(ts)))):
            return False
        k0, d0 = self(np.array([0.0]))[0], self.d(np.array([0.0]))[0]
        scale = max(abs(k0), abs(d0) * t1, 1.0)
        hs = t1 * 2.0 ** -np.arange(4, 5 + steps)
        rem = np.abs(self(hs) - k0 - hs * d0)
        for a, b in zip(rem[:-1], rem[1:]):
            if a < 1e-12 * scale:
                continue
            if a / max(b, 1e-300) < 3.0:
                return False
        return True


@dataclass(frozen=True)
class SecondKindProblem:
    """``kappa U(t) + int_0^t K1(t-s) U(s) ds = w(t)`` with ``w(0) = 0``."""

    kappa: float
    kernel: Callable
    w: GridFunction

    def __post_init__(self):
        if self.kappa == 0 or not np.isfinite(self.kappa):
            raise ValueError("kappa must be finite and nonzero")
        if abs(self.w.values[0]) > 1e-12 * max(1.0, np.max(np.abs(self.w.values))):
            raise ValueError(f"w(0) must vanish, got {self.w.values[0]!r}")

    @property
    def grid(self) -> TimeGrid:
        return self.w.grid

    def kernel_samples(self) -> np.ndarray:
        """``K1(k h)`` for ``k = 0..M``."""
        vals = np.asarray(self.kernel(self.grid.nodes), dtype=float)
        if vals.shape == ():
            vals = np.full(self.grid.M + 1, float(vals))
        return vals


@dataclass(frozen=True)
class DistributionalControl:
    """Control ``u`` stored through an antiderivative.

    ``order = 0``: ``u = U'`` is square integrable and ``u_values`` holds its
    samples. ``order = m >= 1``: ``u`` is the ``m``-th distributional
    derivative of the square-integrable ``U'``; ``antiderivative`` holds the
    continuous ``U_m`` with ``u = U_m^{(m+1)}`` and ``u_values`` is None.
    """

    order: int
    antiderivative: GridFunction
    u_values: GridFunction | None = None

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("order must be nonnegative")
        if abs(self.antiderivative.values[0]) > 1e-12:
            raise ValueError("antiderivative must vanish at t = 0")
        if self.order == 0 and self.u_values is None:
            raise ValueError("order 0 control needs u samples")
        if self.order > 0 and self.u_values is not None:
            raise ValueError("distributional control has no pointwise samples")


class StepSizeError(ArithmeticError):
    pass


class ResolventDivergenceError(ArithmeticError):
    def __init__(self, message, term_norms):
        self.term_norms = term_norms
        super().__init__(message)


class MisclassificationError(ValueError):
    pass


def solve_second_kind_direct(problem: SecondKindProblem) -> GridFunction:
    """Product-trapezoidal time stepping.

    At node ``i``::

        kappa U_i + h (K1(t_i) U_0/2 + sum_{0<j<i} K1(t_i - t_j) U_j
                       + K1(0) U_i/2) = w_i

    solved forward with ``U_0 = 0``.
    """
    grid = problem.grid
    h = grid.h
    kv = problem.kernel_samples()
    w = problem.w.values
    kappa = problem.kappa
    diag = kappa + 0.5 * h * kv[0]
    if abs(diag) < 1e-14 * abs(kappa):
        raise StepSizeError(
            f"kappa + h K1(0)/2 = {diag:.3e} vanishes at h = {h:.3e}; "
            "refine the grid")
    U = np.zeros(grid.M + 1)
    for i in range(1, grid.M + 1):
        # kv[i-1:0:-1] pairs K1(t_i - t_j) with U_j for j = 1..i-1
        hist = np.dot(kv[i - 1:0:-1], U[1:i]) if i > 1 else 0.0
        U[i] = (w[i] - h * (hist + 0.5 * kv[i] * U[0])) / diag
    return GridFunction(grid, U)


def _trap_convolve(a, b, h):
    """Trapezoidal ``int_0^{t_i} a(t_i - s) b(s) ds`` for every node ``i``."""
    full = np.convolve(a, b)[: a.size]
    return h * (full - 0.5 * a * b[0] - 0.5 * a[0] * b)


@dataclass(frozen=True)
class ResolventResult:
    U: GridFunction
    resolvent: np.ndarray
    term_norms: np.ndarray


def resolvent_series(problem: SecondKindProblem, tol: float = 1e-12,
                     max_terms: int = 64, return_details: bool = False):
    """Solve through the resolvent built from repeated kernels.

    With ``k = K1/kappa`` the repeated kernels are ``k_1 = k`` and
    ``k_{n+1}(t) = int_0^t k(t - s) k_n(s) ds`` (trapezoid on the grid). The
    resolvent ``R = sum_{n>=0} (-1)^{n+1} k_{n+1}`` is truncated once a term's
    max-norm falls below ``tol``, and

        U(t) = w(t)/kappa + int_0^t R(t - s) w(s)/kappa ds.
    """
    grid = problem.grid
    h = grid.h
    k1 = problem.kernel_samples() / problem.kappa
    wn = problem.w.values / problem.kappa
    term = k1.copy()
    res = np.zeros_like(k1)
    norms = []
    sign = -1.0
    for _ in range(max_terms):
        res += sign * term
        norms.append(float(np.max(np.abs(term))))
        term = _trap_convolve(k1, term, h)
        sign = -sign
        if np.max(np.abs(term)) <= tol:
            norms.append(float(np.max(np.abs(term))))
            break
    else:
        raise ResolventDivergenceError(
            f"resolvent series not converged after {max_terms} terms; last "
            f"term norms {norms[-3:]}", np.array(norms))
    U = wn + _trap_convolve(res, wn, h)
    U[0] = 0.0
    out = GridFunction(grid, U)
    if return_details:
        return ResolventResult(out, res, np.array(norms))
    return out


def differentiate_antiderivative(U: GridFunction) -> GridFunction:
    """Second-order finite differences: centered inside, one-sided at the ends."""
    if abs(U.values[0]) > 1e-12 * max(1.0, np.max(np.abs(U.values))):
        raise ValueError("antiderivative must vanish at t = 0")
    return GridFunction(U.grid, np.gradient(U.values, U.grid.h, edge_order=2))


def pl_convolution(kernel: Callable, U: GridFunction, points: int = 6) -> np.ndarray:
    """``int_0^{t_i} K(t_i - s) U(s) ds`` with ``U`` linear between nodes.

    Each panel uses Gauss-Legendre quadrature on the product of the kernel
    and the linear interpolant, so only the kernel is approximated. The lag
    ``t_i - s`` depends on ``i - k`` only, which turns the sum into one
    discrete convolution per quadrature point.
    """
    grid = U.grid
    h = grid.h
    vals = U.values
    x, wq = np.polynomial.legendre.leggauss(points)
    frac = (x + 1.0) / 2.0
    # U at quadrature point q of panel k, shape (M, points)
    u_q = vals[:-1, None] + np.diff(vals)[:, None] * frac[None, :]
    lags = np.arange(1, grid.M + 1)[:, None] - frac[None, :]
    k_q = np.asarray(kernel((lags * h).ravel()), dtype=float)
    k_q = np.broadcast_to(k_q, (lags.size,)).reshape(lags.shape)
    out = np.zeros(grid.M + 1)
    for q in range(points):
        conv = np.convolve(k_q[:, q], u_q[:, q])[: grid.M]
        out[1:] += 0.5 * h * wq[q] * conv
    return out


def second_kind_residual(problem: SecondKindProblem, U: GridFunction,
                         points: int = 6) -> float:
    """Max nodal residual of ``U`` plugged back into the equation.

    The convolution is evaluated by :func:`pl_convolution`, independent of the
    trapezoid sums used by the solvers, so the residual exposes the O(h^2)
    discretization error instead of vanishing identically.
    """
    conv = pl_convolution(problem.kernel, U, points)
    return float(np.max(np.abs(problem.kappa * U.values + conv - problem.w.values)))


@dataclass(frozen=True)
class InterconnectKernels:
    """Kernels available to :func:`solve_interconnection`.

    ``base`` is the first-kind kernel ``K(t) = (c, S2(t) b2)`` (regular case);
    ``dual`` optionally overrides the second-kind kernel with
    ``(c, S2(t) A2 b2)`` for the dual case. The singular case lifts ``base``.
    """

    base: ConvolutionKernel
    dual: Callable | None = None


@dataclass(frozen=True)
class InterconnectSolution:
    control: DistributionalControl
    problem: SecondKindProblem
    residual: float


def solve_interconnection(case: CaseClassification, w: GridFunction,
                          kernels: InterconnectKernels | ConvolutionKernel, *,
                          solver: str = "direct", kappa_tol: float = 1e-12,
                          resolvent_tol: float = 1e-12,
                          with_residual: bool = False):
    """Recover the upstream control from ``w = v - v(0)``.

    Regular and Dual cases solve ``K(0) U + int K'(t-s) U(s) ds = w`` and
    return ``u = U'`` (order 0). ``Singular(m)`` lifts the kernel ``m`` times,
    solves for ``U_m`` and returns it as an order-``m`` distribution.

    Raises
    ------
    MisclassificationError
        If the multiplier of the selected equation vanishes.
    NotImplementedError
        For Singular(m) with m > 2 or Unsupported cases.
    """
    if isinstance(kernels, ConvolutionKernel):
        kernels = InterconnectKernels(kernels)
    if abs(w.values[0]) > 1e-12 * max(1.0, np.max(np.abs(w.values))):
        raise ValueError("w(0) must vanish")
    if case.tag is CaseTag.UNSUPPORTED:
        raise NotImplementedError("no nonzero chain moment; case unsupported")
    if case.tag is CaseTag.SINGULAR:
        m = case.order
        if m < 1:
            raise MisclassificationError("singular case needs order >= 1")
        if m > 2:
            raise NotImplementedError(f"singular chains of order {m} > 2")
        kern = kernels.base
        if abs(kern.k0) > kappa_tol:
            raise MisclassificationError(
                f"K(0) = {kern.k0:.3e} is nonzero; the case is regular")
        for _ in range(m):
            kern = kern.lift()
        kappa, k1 = kern.k0, kern.derivative
    else:
        kern = kernels.base
        kappa = kern.k0
        k1 = kern.derivative
        if case.tag is CaseTag.DUAL and kernels.dual is not None:
            k1 = kernels.dual
        m = 0
    if abs(kappa) <= kappa_tol:
        raise MisclassificationError(
            f"multiplier {kappa:.3e} vanishes for case {case.label}")
    if k1 is None:
        raise ValueError("second-kind kernel unavailable")
    problem = SecondKindProblem(kappa, k1, w)
    if solver == "direct":
        U = solve_second_kind_direct(problem)
    elif solver == "resolvent":
        U = resolvent_series(problem, resolvent_tol)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    if m == 0:
        ctrl = DistributionalControl(0, U, differentiate_antiderivative(U))
    else:
        ctrl = DistributionalControl(m, U)
    if with_residual:
        return InterconnectSolution(ctrl, problem, second_kind_residual(problem, U))
    return ctrl
