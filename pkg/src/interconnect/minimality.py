"""Strong-minimality evidence for real exponential families.

A family ``{beta_k exp(mu_k t)}`` on ``[0, t1]`` (optionally headed by the
constant function 1) is strongly minimal when its Gram quadratic form is
bounded below by ``gamma * sum |c_k|^2`` uniformly in the number of terms.
Only finitely many terms are ever available, so this module reports the
sequence of smallest Gram eigenvalues of the leading blocks together with a
heuristic verdict, and separately checks the Dirichlet-series sufficient
condition on the weights and rates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .spectral import SpectralSystem

# exp(709.78) is the largest finite double
_EXP_LIMIT = 709.0

STRONG = "strong-evidence-minimal"
INCONCLUSIVE = "inconclusive"
DEGENERATE = "degenerate"


class GramRangeError(ArithmeticError):
    """Gram entries overflow double precision.

    ``largest_usable`` is the largest block order whose entries are finite.
    """

    def __init__(self, largest_usable, message=None):
        self.largest_usable = largest_usable
        super().__init__(
            message or
            "Gram entries overflow double precision beyond order "
            f"{largest_usable}; reduce the number of modes or the horizon, "
            "or use the scaled bound on the usable block")


class DegenerateFamilyError(ValueError):
    """The family cannot be strongly minimal (zero element or repeated rate)."""


@dataclass(frozen=True)
class ExponentialFamily:
    """Weighted exponentials ``beta_k exp(mu_k t)`` on ``[0, t1]``.

    With ``has_constant`` the function 1 is prepended as element 0.
    """

    weights: np.ndarray
    rates: np.ndarray
    t1: float
    has_constant: bool = False

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float)).copy()
        r = np.atleast_1d(np.asarray(self.rates, dtype=float)).copy()
        if w.shape != r.shape or w.ndim != 1:
            raise ValueError("weights and rates must be 1-d of equal length")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(r))):
            raise ValueError("weights and rates must be finite")
        if not np.isfinite(self.t1) or self.t1 <= 0:
            raise ValueError(f"horizon must be positive, got {self.t1}")
        if np.any(w == 0):
            raise DegenerateFamilyError(
                f"zero weight at entry {int(np.flatnonzero(w == 0)[0])}")
        if np.unique(r).size != r.size:
            raise DegenerateFamilyError("rates must be pairwise distinct")
        if self.has_constant and np.any(r == 0):
            raise DegenerateFamilyError(
                "a zero rate duplicates the constant element")
        w.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "rates", r)
        object.__setattr__(self, "t1", float(self.t1))

    def __len__(self):
        return self.weights.size + int(self.has_constant)

    def all_weights(self) -> np.ndarray:
        """Weights including the constant element, in Gram order."""
        if self.has_constant:
            return np.concatenate(([1.0], self.weights))
        return np.asarray(self.weights)

    def all_rates(self) -> np.ndarray:
        if self.has_constant:
            return np.concatenate(([0.0], self.rates))
        return np.asarray(self.rates)

    def evaluate(self, t) -> np.ndarray:
        """Element values, shape ``(len(self), len(t))``."""
        t = np.asarray(t, dtype=float)
        return self.all_weights()[:, None] * np.exp(np.outer(self.all_rates(), t))

    def shifted(self, shift: float) -> "ExponentialFamily":
        """Multiply every element by ``exp(shift t)``.

        The constant element becomes ``exp(shift t)`` with weight 1.
        """
        return ExponentialFamily(self.all_weights(), self.all_rates() + shift,
                                 self.t1, has_constant=False)


@dataclass(frozen=True)
class GramMatrix:
    order: int
    entries: np.ndarray

    def __post_init__(self):
        g = np.array(self.entries, dtype=float)
        if g.shape != (self.order, self.order):
            raise ValueError("Gram entries must be order x order")
        if not np.allclose(g, g.T, rtol=1e-13, atol=0.0):
            raise ValueError("Gram matrix must be symmetric")
        if np.any(np.diag(g) <= 0):
            raise ValueError("Gram diagonal must be strictly positive")
        g.setflags(write=False)
        object.__setattr__(self, "entries", g)


@dataclass(frozen=True)
class DirichletCheck:
    reciprocal_rate_sum_estimate: float
    abscissa_estimate: float
    hypothesis_holds: bool
    window: tuple = (0, 0)
    rate_growth_exponent: float = float("nan")
    shift: float = 0.0
    notes: tuple = ()


@dataclass(frozen=True)
class MinimalityReport:
    gamma_sequence: np.ndarray
    certified_lower_bound: float
    verdict: str
    dirichlet: DirichletCheck | None = None
    floor: float = 1e-12
    decrement_rate: float = 0.5
    last_relative_decrement: float = 0.0
    notes: tuple = field(default=())


def _log_abs_core(s, t1):
    """``log|(e^{s t1} - 1)/s|`` elementwise, finite for any real ``s``."""
    x = s * t1
    out = np.empty_like(x)
    zero = x == 0.0
    pos = x > 0
    neg = ~(zero | pos)
    out[zero] = np.log(t1)
    # e^x - 1 = e^x (1 - e^{-x}) for x > 0
    out[pos] = x[pos] + np.log(-np.expm1(-x[pos])) - np.log(s[pos])
    out[neg] = np.log(-np.expm1(x[neg])) - np.log(-s[neg])
    return out


def _log_entries(weights, rates, t1):
    s = rates[:, None] + rates[None, :]
    logw = np.log(np.abs(weights))
    return logw[:, None] + logw[None, :] + _log_abs_core(s, t1)


def gram_matrix(family: ExponentialFamily, n: int) -> GramMatrix:
    """Exact L2[0, t1] Gram matrix of the first ``n`` family elements.

    Entries are ``beta_i beta_j (e^{(mu_i+mu_j) t1} - 1)/(mu_i+mu_j)`` with
    the value ``beta_i beta_j t1`` when the rates cancel. They are formed in
    the log domain, so small weights may offset large rates.

    Raises
    ------
    GramRangeError
        When an entry overflows; the error records the largest block that
        can be assembled.
    """
    if n < 1 or n > len(family):
        raise ValueError(f"block order {n} outside 1..{len(family)}")
    w = family.all_weights()[:n]
    r = family.all_rates()[:n]
    logs = _log_entries(w, r, family.t1)
    too_big = logs > _EXP_LIMIT
    if too_big.any():
        bad = np.flatnonzero(too_big.any(axis=1))
        raise GramRangeError(int(bad.min()))
    g = np.outer(np.sign(w), np.sign(w)) * np.exp(logs)
    return GramMatrix(n, (g + g.T) / 2)


def _unit_diagonal(g):
    d = 1.0 / np.sqrt(np.diag(g))
    return g * d[:, None] * d[None, :], d


def _smallest_eigenvalue(g):
    """``lambda_min(G)`` for a graded positive definite ``G``.

    Exponential Gram matrices have diagonals spread over many orders of
    magnitude, and a dense eigensolve on ``G`` only resolves eigenvalues
    above ``eps ||G||``. Instead ``G^{-1} = D (D G D)^{-1} D`` is formed from a
    Cholesky factor of the well-scaled ``D G D`` and the answer is
    ``1 / lambda_max(G^{-1})``. If the factorization fails the plain
    eigensolve is returned (then at or near zero).
    """
    g = np.asarray(g, dtype=float)
    if g.shape[0] == 1:
        return float(g[0, 0])
    g_hat, d = _unit_diagonal(g)
    try:
        factor = linalg.cho_factor(g_hat, lower=True)
    except linalg.LinAlgError:
        return float(linalg.eigvalsh(g, subset_by_index=[0, 0])[0])
    inv = linalg.cho_solve(factor, np.eye(g.shape[0]))
    inv = d[:, None] * ((inv + inv.T) / 2) * d[None, :]
    top = float(linalg.eigvalsh(inv, subset_by_index=[g.shape[0] - 1] * 2)[0])
    return 1.0 / top


def scaled_lower_bound(g) -> float:
    """Lower bound on ``lambda_min(G)`` from the unit-diagonal rescaling.

    With ``D = diag(G_ii^{-1/2})``, ``c^T G c >= lambda_min(D G D) min_i G_ii
    |c|^2``. A rounding allowance ``n eps ||D G D||`` is subtracted from the
    scaled eigenvalue; entries are formed to relative accuracy, so the
    allowance belongs to the scaled matrix rather than to ``G``.
    """
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    g_hat, _ = _unit_diagonal(g)
    lam_hat = float(linalg.eigvalsh(g_hat, subset_by_index=[0, 0])[0])
    allowance = n * np.finfo(float).eps * np.linalg.norm(g_hat, 2)
    return (lam_hat - allowance) * float(np.diag(g).min())


def strong_minimality_constant(family: ExponentialFamily | None, n_max: int, *,
                               floor: float = 1e-12, decrement_rate: float = 0.5,
                               gram: np.ndarray | None = None) -> MinimalityReport:
    """Smallest eigenvalues ``gamma_n`` of the leading Gram blocks.

    Parameters
    ----------
    family : ExponentialFamily
        Family to assess; may be None when ``gram`` is given.
    n_max : int
        Largest block order.
    floor : float
        ``gamma_{n_max}`` at or below this value gives a degenerate verdict.
    decrement_rate : float
        Evidence of minimality requires the last relative decrement
        ``(gamma_{n-1} - gamma_n)/gamma_{n-1}`` to stay below this rate.
    gram : array, optional
        Precomputed Gram matrix used instead of assembling one from
        ``family`` (lets callers inject synthetic forms).

    Returns
    -------
    MinimalityReport
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if gram is None:
        g = gram_matrix(family, n_max).entries
    else:
        g = np.asarray(gram, dtype=float)[:n_max, :n_max]
        if g.shape != (n_max, n_max):
            raise ValueError("injected Gram matrix smaller than n_max")
    gammas = np.array([_smallest_eigenvalue(g[:n, :n]) for n in range(1, n_max + 1)])
    bound = scaled_lower_bound(g)
    last = gammas[-1]
    if n_max > 1 and gammas[-2] > 0:
        rel_dec = float((gammas[-2] - last) / gammas[-2])
    else:
        rel_dec = 0.0
    if last <= floor:
        verdict = DEGENERATE
    elif rel_dec < decrement_rate:
        verdict = STRONG
    else:
        verdict = INCONCLUSIVE
    gammas.setflags(write=False)
    return MinimalityReport(gammas, bound, verdict, floor=floor,
                            decrement_rate=decrement_rate,
                            last_relative_decrement=rel_dec)


def _power_fit(idx, vals):
    """Least-squares slope of log(vals) against log(idx)."""
    return float(np.polyfit(np.log(idx), np.log(vals), 1)[0])


def dirichlet_hypothesis(family: ExponentialFamily, *, window_fraction: float = 0.5,
                         shift: float = 1.0, growth_margin: float = 0.05,
                         divergence_slope: float = 0.25) -> DirichletCheck:
    """Finite-data check of the Dirichlet-series sufficient condition.

    The condition asks for positive rates with ``sum 1/mu_n`` convergent and
    ``sum exp(-mu_n a)/beta_n`` convergent for some ``a > 0``. Both limits are
    replaced by estimates over the supplied entries, so the result is
    evidence, not a proof.

    A family headed by the constant is first rewritten as
    ``g_n exp((mu_n + shift) t)`` with ``g_0 = 1, mu_0 = 0``; this keeps every
    rate positive without changing minimality on a bounded interval.

    The reciprocal sum is the partial sum plus an integral tail bound from a
    power law ``mu_n ~ C n^p`` fitted over the trailing window; it is finite
    only for increasing rates with ``p > 1 + growth_margin``. The abscissa is
    the maximum of ``log(1/|beta_n|)/mu_n`` over the window, set to +inf when
    that ratio itself grows like a power of ``n`` with exponent above
    ``divergence_slope``.
    """
    notes = []
    used_shift = 0.0
    if family.has_constant:
        used_shift = float(shift)
        family = family.shifted(used_shift)
        notes.append(f"constant element absorbed by exp({used_shift:g} t) shift")
    beta = np.asarray(family.weights)
    mu = np.asarray(family.rates)
    if mu.size < 3:
        raise ValueError("need at least 3 exponential entries")
    idx = np.arange(1, mu.size + 1, dtype=float)
    start = int(np.floor(mu.size * (1.0 - window_fraction)))
    start = min(start, mu.size - 2)
    window = (start, mu.size)
    notes.append("evidence check over finitely many entries, not a proof")

    if np.any(mu <= 0):
        k = int(np.flatnonzero(mu <= 0)[0])
        notes.append(f"rate {mu[k]:g} at entry {k} is not positive")
        return DirichletCheck(float("inf"), float("inf"), False, window,
                              float("nan"), used_shift, tuple(notes))

    widx, wmu = idx[start:], mu[start:]
    increasing = bool(np.all(np.diff(mu) > 0))
    p = _power_fit(widx, wmu) if increasing else float("nan")
    partial = float(np.sum(1.0 / mu))
    if increasing and p > 1.0 + growth_margin:
        c = float(mu[-1] / idx[-1] ** p)
        tail = idx[-1] ** (1.0 - p) / (c * (p - 1.0))
        recip = partial + tail
    else:
        recip = float("inf")
        notes.append("rates do not grow faster than linearly; reciprocal sum "
                     "treated as divergent")

    ratio = np.log(1.0 / np.abs(beta)) / mu
    wratio = ratio[start:]
    abscissa = float(np.max(wratio))
    if np.all(wratio > 0) and np.all(np.diff(wratio) > 0):
        slope = _power_fit(widx, wratio)
        if slope > divergence_slope:
            abscissa = float("inf")
            notes.append(f"log(1/|beta_n|)/mu_n grows like n^{slope:.2f}; "
                         "no finite abscissa")
    holds = bool(np.isfinite(recip) and np.isfinite(abscissa))
    return DirichletCheck(recip, abscissa, holds, window, p, used_shift,
                          tuple(notes))


def augmented_family(system: SpectralSystem) -> ExponentialFamily:
    """Family ``{1, (b_j/lambda_j) exp(-lambda_j t)}`` of the system extended by
    an integrator on its input.

    Rates are stored as ``mu_j = -lambda_j``. A zero eigenvalue with nonzero
    input is represented by the constant element.

    Raises
    ------
    DegenerateFamilyError
        For a zero eigenvalue with zero input, or any zero input coefficient
        (the element vanishes identically).
    """
    lam = system.eigenvalues
    b = system.input_coeffs
    zero = lam == 0.0
    if np.any(zero & (b == 0.0)):
        raise DegenerateFamilyError(
            "zero eigenvalue with zero input coefficient: the extended system "
            "is not controllable (only b_0 != 0 is admissible)")
    keep = ~zero
    if np.any(b[keep] == 0.0):
        j = int(np.flatnonzero(keep & (b == 0.0))[0])
        raise DegenerateFamilyError(f"mode {j} has zero input coefficient")
    return ExponentialFamily(b[keep] / lam[keep], -lam[keep], system.t1,
                             has_constant=True)
