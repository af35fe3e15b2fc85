"""Smooth null-steering controls from the exponential moment problem.

The downstream system is extended by an integrator ``v' = u, v(0) = alpha``.
Null steering of the extended state is a moment problem for ``u`` against
``{1, exp(-lambda_j t)}``; the minimum-norm solution lies in the span of the
same functions and is obtained from their Gram matrix.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .minimality import ExponentialFamily, gram_matrix
from .spectral import (GridFunction, SpectralSystem, TimeGrid,
                       UncontrollableModeError, evolve_modal, phi_functions,
                       terminal_norm)


class DegenerateSystemError(ValueError):
    pass


class MomentResidualWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MomentProblem:
    """Moments ``int_0^t1 w_k exp(mu_k t) u(t) dt = target_k``.

    When ``includes_zero_moment`` the first target belongs to the constant
    test function (``int u = -alpha``) and ``test_rates`` lists the remaining
    rates only.
    """

    test_rates: np.ndarray
    test_weights: np.ndarray
    targets: np.ndarray
    t1: float
    includes_zero_moment: bool = True
    zero_target: float = 0.0
    modes: np.ndarray = field(default=None)

    def __post_init__(self):
        rates = np.atleast_1d(np.asarray(self.test_rates, dtype=float))
        tg = np.atleast_1d(np.asarray(self.targets, dtype=float))
        if rates.shape != tg.shape:
            raise ValueError("one target per test rate")
        if not (np.all(np.isfinite(tg)) and np.isfinite(self.zero_target)):
            raise ValueError("moment targets must be finite")
        if np.unique(rates).size != rates.size:
            raise ValueError("test rates must be distinct")

    def all_targets(self) -> np.ndarray:
        if self.includes_zero_moment:
            return np.concatenate(([self.zero_target], self.targets))
        return np.asarray(self.targets)

    def family(self) -> ExponentialFamily:
        return ExponentialFamily(self.test_weights, self.test_rates, self.t1,
                                 has_constant=self.includes_zero_moment)

    def __len__(self):
        return self.targets.size + int(self.includes_zero_moment)


@dataclass(frozen=True)
class SmoothControl:
    """``v`` with ``v(0) = alpha``, ``v(t1) = 0`` and derivative ``u``.

    ``coefficients`` hold the expansion of ``u`` over the test family, so
    both ``u`` and ``v`` can be evaluated off the grid.
    """

    alpha: float
    grid: TimeGrid
    v_values: np.ndarray
    u_values: np.ndarray
    coefficients: np.ndarray = None
    family: ExponentialFamily = None
    residual: float = 0.0
    ridge: float = 0.0
    warnings: tuple = ()

    @property
    def v(self) -> GridFunction:
        return GridFunction(self.grid, self.v_values)

    @property
    def u(self) -> GridFunction:
        return GridFunction(self.grid, self.u_values)

    def u_at(self, t):
        return self.coefficients @ self.family.evaluate(t)

    def v_at(self, t):
        t = np.asarray(t, dtype=float)
        rates = self.family.all_rates()
        w = self.family.all_weights() * self.coefficients
        zero = rates == 0.0
        safe = np.where(zero, 1.0, rates)
        prim = np.where(zero[:, None], t[None, :],
                        np.expm1(np.outer(safe, t)) / safe[:, None])
        return self.alpha + w @ prim


def build_moment_problem(system: SpectralSystem, alpha: float) -> MomentProblem:
    """Moment conditions on ``u`` that null the extended state at ``t1``.

    Given the zero moment ``int u = -alpha``, mode ``j`` vanishes iff
    ``int exp(-lambda_j t) u dt = -lambda_j x0_j/b_j - alpha``. Each condition
    is multiplied by ``exp(lambda_j t1)``, so the test functions become
    ``exp(lambda_j (t1 - t))`` and a residual ``r_j`` leaves the mode at
    ``(b_j/lambda_j) r_j``. Inert modes (zero input and zero initial data) are
    dropped.
    """
    lam = system.eigenvalues
    b = system.input_coeffs
    x0 = system.initial_coeffs
    if np.any((lam == 0.0) & (b == 0.0)):
        raise DegenerateSystemError(
            "zero eigenvalue with zero input coefficient")
    if np.any(lam == 0.0):
        raise DegenerateSystemError(
            "a zero eigenvalue in the downstream system needs a polynomial "
            "test function; only nonzero eigenvalues are supported")
    inert = b == 0.0
    bad = np.flatnonzero(inert & (x0 != 0.0))
    if bad.size:
        raise UncontrollableModeError(int(bad[0]))
    active = np.flatnonzero(~inert)
    lam_a, b_a, x0_a = lam[active], b[active], x0[active]
    # weight exp(lambda t1) turns exp(-lambda t) into exp(lambda (t1 - t)),
    # bounded on [0, t1] for decaying modes
    weights = np.exp(lam_a * system.t1)
    targets = weights * (-lam_a * x0_a / b_a - alpha)
    return MomentProblem(-lam_a, weights, targets, system.t1,
                         includes_zero_moment=True, zero_target=-float(alpha),
                         modes=active)


def _solve_spd(g, m, ridge):
    """Solve ``(G + ridge I) a = m`` after unit-diagonal rescaling."""
    n = g.shape[0]
    a_mat = g + ridge * np.eye(n)
    d = 1.0 / np.sqrt(np.diag(a_mat))
    scaled = a_mat * d[:, None] * d[None, :]
    try:
        y = linalg.solve(scaled, d * m, assume_a="pos")
    except linalg.LinAlgError:
        y = linalg.lstsq(scaled, d * m)[0]
    return d * y


def solve_moment_problem(problem: MomentProblem, grid: TimeGrid, ridge: float = 0.0,
                         alpha: float | None = None, rtol: float = 1e-9) -> SmoothControl:
    """Minimum-L2-norm ``u`` meeting all moments, and ``v = alpha + int u``.

    Parameters
    ----------
    problem : MomentProblem
    grid : TimeGrid
        Sampling grid; its horizon must match the problem's.
    ridge : float
        Tikhonov shift added to the Gram matrix (0 keeps the moments exact).
    alpha : float, optional
        ``v(0)``; defaults to ``-zero_target`` of the problem.
    rtol : float
        Residuals ``||G a - m||_inf`` above ``rtol ||m||_inf`` are recorded as
        warnings on the returned control.
    """
    if not np.isclose(grid.t1, problem.t1, rtol=1e-12, atol=0.0):
        raise ValueError("grid horizon does not match the moment problem")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    if len(problem) == 0:
        raise ValueError("empty moment problem")
    if alpha is None:
        alpha = -problem.zero_target if problem.includes_zero_moment else 0.0
    fam = problem.family()
    g = gram_matrix(fam, len(fam)).entries
    m = problem.all_targets()
    a = _solve_spd(g, m, ridge) if np.any(m) else np.zeros_like(m)
    residual = float(np.max(np.abs(g @ a - m)))
    notes = []
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    if residual > rtol * max(scale, np.finfo(float).tiny):
        msg = (f"moment residual {residual:.3e} exceeds {rtol:g} x "
               f"max target {scale:.3e}")
        notes.append(msg)
        warnings.warn(msg, MomentResidualWarning, stacklevel=2)
    if ridge:
        notes.append(f"ridge {ridge:g} applied to the Gram matrix")
    ctrl = SmoothControl(float(alpha), grid, None, None, a, fam, residual,
                         float(ridge), tuple(notes))
    t = grid.nodes
    u = ctrl.u_at(t)
    v = ctrl.v_at(t)
    v[0] = alpha
    for arr in (u, v):
        arr.setflags(write=False)
    object.__setattr__(ctrl, "u_values", u)
    object.__setattr__(ctrl, "v_values", v)
    return ctrl


def _exact_terminal(system: SpectralSystem, control: SmoothControl) -> np.ndarray:
    """Terminal modes under the closed-form ``v = alpha + sum c_k w_k P_k``.

    ``P_k(s) = (e^{mu_k s} - 1)/mu_k`` (``s`` for ``mu_k = 0``), and every
    integral ``int_0^T e^{r s} P_k(s) ds`` is written with ``phi1``/``phi2``
    so no grid enters.
    """
    T = control.grid.t1
    lam = system.eigenvalues
    mu = control.family.all_rates()
    c = control.family.all_weights() * control.coefficients

    def expint(r):
        # int_0^T e^{r s} ds
        return T * phi_functions(np.asarray(r, dtype=float) * T)[0]

    r = -lam
    base = expint(r)
    total = control.alpha * base
    for ck, mk in zip(c, mu):
        if mk == 0.0:
            p1, p2 = phi_functions(r * T)
            total = total + ck * T**2 * (p1 - p2)
        else:
            total = total + ck * (expint(r + mk) - base) / mk
    return np.exp(lam * T) * (system.initial_coeffs + system.input_coeffs * total)


def verify_smooth_null(system: SpectralSystem, control: SmoothControl, *,
                       boundary_tol: float = 1e-10, exact: bool = True) -> float:
    """Terminal modal norm of the system driven by ``control.v``.

    With ``exact`` the closed form of ``v`` is integrated analytically, so the
    result measures the moment solve alone; otherwise the grid samples are
    evolved as a piecewise-linear control (adds an O(h^2) term). Also checks
    ``v(0) = alpha`` and ``v(t1) = 0`` up to ``boundary_tol (1 + |alpha|)`` and
    raises if either fails.
    """
    v = control.v_values
    tol = boundary_tol * (1.0 + abs(control.alpha))
    if abs(v[0] - control.alpha) > tol:
        raise ValueError(f"v(0) = {v[0]!r} differs from alpha = {control.alpha!r}")
    if abs(v[-1]) > tol:
        raise ValueError(f"v(t1) = {v[-1]!r} is not zero")
    if exact and control.family is not None:
        return float(np.linalg.norm(_exact_terminal(system, control)))
    return terminal_norm(evolve_modal(system, control.v))
