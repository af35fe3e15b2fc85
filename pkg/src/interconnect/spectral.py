"""Diagonal evolution systems driven by a scalar control.

A system is stored by its modal data: eigenvalues ``lambda_j``, input
coefficients ``b_j`` and initial coefficients ``x0_j``. Each mode obeys

    x_j'(t) = lambda_j x_j(t) + b_j v(t),    x_j(0) = x0_j,

and is integrated exactly for piecewise-linear controls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _frozen(values, dtype=float):
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``0 = t_0 < ... < t_M = t1``."""

    t1: float
    M: int

    def __post_init__(self):
        if not np.isfinite(self.t1) or self.t1 <= 0:
            raise ValueError(f"horizon must be positive, got {self.t1}")
        if int(self.M) != self.M or self.M < 2:
            raise ValueError(f"grid needs at least 2 intervals, got M={self.M}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "t1", float(self.t1))

    @property
    def h(self) -> float:
        return self.t1 / self.M

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.t1, self.M + 1)

    def sample(self, func) -> "GridFunction":
        return GridFunction(self, func(self.nodes))


@dataclass(frozen=True)
class GridFunction:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape == ():
            vals = np.full(self.grid.M + 1, float(vals))
        if vals.shape != (self.grid.M + 1,):
            raise ValueError(
                f"expected {self.grid.M + 1} samples, got shape {vals.shape}")
        object.__setattr__(self, "values", _frozen(vals))

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class SpectralSystem:
    """Modal data of a diagonal system on the horizon ``[0, t1]``.

    Eigenvalues must be pairwise distinct and ordered by non-decreasing
    absolute value.
    """

    eigenvalues: np.ndarray
    input_coeffs: np.ndarray
    initial_coeffs: np.ndarray
    t1: float

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.eigenvalues, dtype=float))
        b = np.atleast_1d(np.asarray(self.input_coeffs, dtype=float))
        x0 = np.atleast_1d(np.asarray(self.initial_coeffs, dtype=float))
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("eigenvalues must be a non-empty 1-d sequence")
        if not (lam.shape == b.shape == x0.shape):
            raise ValueError(
                "eigenvalues, input_coeffs and initial_coeffs differ in length: "
                f"{lam.size}, {b.size}, {x0.size}")
        for name, arr in (("eigenvalues", lam), ("input_coeffs", b),
                          ("initial_coeffs", x0)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if np.unique(lam).size != lam.size:
            raise ValueError("eigenvalues must be pairwise distinct")
        if np.any(np.diff(np.abs(lam)) < 0):
            raise ValueError(
                "eigenvalues must be sorted by non-decreasing absolute value")
        if not np.isfinite(self.t1) or self.t1 <= 0:
            raise ValueError(f"horizon must be positive, got {self.t1}")
        object.__setattr__(self, "eigenvalues", _frozen(lam))
        object.__setattr__(self, "input_coeffs", _frozen(b))
        object.__setattr__(self, "initial_coeffs", _frozen(x0))
        object.__setattr__(self, "t1", float(self.t1))

    @property
    def N(self) -> int:
        return self.eigenvalues.size

    def with_initial(self, x0, t1=None) -> "SpectralSystem":
        return SpectralSystem(self.eigenvalues, self.input_coeffs, x0,
                              self.t1 if t1 is None else t1)


@dataclass(frozen=True)
class ModalTrajectory:
    """Mode values on a grid; ``mode_values[j, i]`` is mode ``j`` at ``t_i``."""

    grid: TimeGrid
    mode_values: np.ndarray

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.mode_values))
        if vals.shape[1] != self.grid.M + 1:
            raise ValueError("each mode sequence must have M+1 entries")
        object.__setattr__(self, "mode_values", _frozen(vals, vals.dtype))

    @property
    def terminal(self) -> np.ndarray:
        return self.mode_values[:, -1]


@dataclass(frozen=True)
class MomentTargets:
    """Targets ``m_j`` of ``int_0^t1 exp(-lambda_j t) v(t) dt = m_j``.

    ``inert[j]`` marks modes with zero input and zero initial data; their
    target is 0 and they need no steering.
    """

    values: np.ndarray
    inert: np.ndarray = field(default=None)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return len(self.values)


class UncontrollableModeError(ValueError):
    """A mode with zero input coefficient carries nonzero initial data."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or
                         f"mode {index} has b=0 but nonzero initial data; "
                         "it cannot be steered")


_SERIES_CUTOFF = 0.5
_SERIES_TERMS = 18


def phi_functions(z):
    """Return ``(phi1(z), phi2(z))`` for real or complex ``z``.

    ``phi1(z) = (e^z - 1)/z`` and ``phi2(z) = (e^z - 1 - z)/z^2`` with their
    limits 1 and 1/2 at the origin. Arguments below 0.5 in modulus go through
    a truncated Taylor series to avoid cancellation.
    """
    z = np.asarray(z)
    small = np.abs(z) < _SERIES_CUTOFF
    zs = np.where(small, 1.0, z)
    if np.iscomplexobj(z):
        a, b = zs.real, zs.imag
        em1 = (np.expm1(a) * np.cos(b) - 2.0 * np.sin(b / 2) ** 2
               + 1j * np.exp(a) * np.sin(b))
    else:
        em1 = np.expm1(zs)
    phi1 = em1 / zs
    phi2 = (em1 - zs) / zs**2
    # phi1 = sum z^k/(k+1)!, phi2 = sum z^k/(k+2)!, Horner from the top
    zt = np.where(small, z, 0.0)
    p1 = np.zeros_like(zt)
    p2 = np.zeros_like(zt)
    for k in range(_SERIES_TERMS, -1, -1):
        p1 = p1 * zt + 1.0 / math.factorial(k + 1)
        p2 = p2 * zt + 1.0 / math.factorial(k + 2)
    return np.where(small, p1, phi1), np.where(small, p2, phi2)


def _check_control(system_t1, control):
    if not np.isclose(control.grid.t1, system_t1, rtol=1e-12, atol=0.0):
        raise ValueError(
            f"control horizon {control.grid.t1} does not match system "
            f"horizon {system_t1}")
    if not np.all(np.isfinite(control.values)):
        raise ValueError("control contains non-finite values")


def linear_step_weights(rates, h):
    """Weights ``(e^{r h}, h phi1(r h), h phi2(r h))`` of one exact step.

    For ``y' = r y + g(t)`` with ``g`` linear on ``[t_i, t_i + h]``::

        y_{i+1} = e^{rh} y_i + h phi1(rh) g_i + h phi2(rh) (g_{i+1} - g_i)
    """
    z = np.asarray(rates) * h
    p1, p2 = phi_functions(z)
    return np.exp(z), h * p1, h * p2


def evolve_modal(system: SpectralSystem, control: GridFunction) -> ModalTrajectory:
    """Integrate every mode under the piecewise-linear interpolant of ``control``.

    The per-step integral of ``exp(lambda (h - s)) v(t_i + s)`` is evaluated in
    closed form, so affine controls are reproduced to rounding regardless of
    the grid size.
    """
    _check_control(system.t1, control)
    grid = control.grid
    lam = system.eigenvalues
    b = system.input_coeffs
    v = control.values
    decay, w1, w2 = linear_step_weights(lam, grid.h)
    # forcing per step for every mode at once: shape (N, M)
    forcing = b[:, None] * (w1[:, None] * v[None, :-1]
                            + w2[:, None] * np.diff(v)[None, :])
    out = np.empty((system.N, grid.M + 1))
    out[:, 0] = system.initial_coeffs
    x = out[:, 0].copy()
    for i in range(grid.M):
        x = decay * x + forcing[:, i]
        out[:, i + 1] = x
    return ModalTrajectory(grid, out)


def control_moments(system: SpectralSystem, control: GridFunction) -> np.ndarray:
    """Exact ``int_0^t1 exp(-lambda_j t) v(t) dt`` for piecewise-linear ``v``."""
    _check_control(system.t1, control)
    grid = control.grid
    lam = system.eigenvalues
    v = control.values
    # integral over step i of exp(-lam t) v: substitute t = t_{i+1} - s
    # int_0^h exp(-lam (t_{i+1} - s)) [v_{i+1} - (v_{i+1}-v_i) s/h] ds
    h = grid.h
    t_right = grid.nodes[1:]
    z = lam * h
    p1, p2 = phi_functions(z)
    # int_0^h e^{lam s} ds = h phi1(lam h); int_0^h e^{lam s} s/h ds = h (phi1 - phi2)
    base = h * p1
    ramp = h * (p1 - p2)
    scale = np.exp(-np.outer(lam, t_right))
    per_step = scale * (base[:, None] * v[None, 1:]
                        - ramp[:, None] * np.diff(v)[None, :])
    return per_step.sum(axis=1)


def moment_targets(system: SpectralSystem) -> MomentTargets:
    """Moments that make each mode vanish at ``t1``.

    Null steering of mode ``j`` is equivalent to
    ``int_0^t1 exp(-lambda_j t) v(t) dt = -x0_j / b_j``.

    Raises
    ------
    UncontrollableModeError
        If some ``b_j = 0`` while ``x0_j != 0``.
    """
    b = system.input_coeffs
    x0 = system.initial_coeffs
    inert = b == 0.0
    bad = np.flatnonzero(inert & (x0 != 0.0))
    if bad.size:
        raise UncontrollableModeError(int(bad[0]))
    m = np.zeros_like(x0)
    active = ~inert
    m[active] = -x0[active] / b[active]
    return MomentTargets(_frozen(m), _frozen(inert, bool))


def terminal_norm(traj: ModalTrajectory) -> float:
    return float(np.sqrt(np.sum(np.abs(traj.terminal) ** 2)))
