"""Centred normal CDFs in one, two and three dimensions.

The bivariate CDF integrates the conditional univariate CDF along one axis
with adaptive Gauss-Kronrod quadrature; the trivariate CDF conditions on one
coordinate and integrates the bivariate CDF of the remaining pair.  Both are
deterministic, so repeated calls return bit-identical results.

Thresholds may be ``math.inf``/``-math.inf`` (:data:`UNBOUNDED`), which is
handled by exact marginalisation.  Zero-variance coordinates are unit steps
at zero, and perfectly correlated pairs collapse onto one coordinate, which
is how singular covariances get evaluated.
"""

from __future__ import annotations

import math
import warnings
from typing import Sequence

import numpy as np
from scipy import integrate, optimize, special

from .errors import NegativeVariance, NotPSD, OutOfRange

UNBOUNDED = math.inf

# Beyond this many standard deviations the normal tail is < 1e-315, below
# double resolution of any probability we return.
TAIL_Z = 38.0
# |rho| above this is treated as exactly +-1.
RHO_DEGENERATE = 1.0 - 1e-13
# breakpoints closer than this to an integration limit are dropped
BREAK_GAP = 1e-6

_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)

# absolute tolerances: standalone bivariate, and the two levels of the
# nested trivariate integral
INNER_EPSABS = 1e-12
OUTER_EPSABS = 1e-9
NESTED_INNER_EPSABS = 1e-10


def _ncdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def phi1(t, var: float):
    """``P(Y <= t)`` for ``Y ~ N(0, var)``; ``var == 0`` gives a unit step at 0.

    Accepts scalars or arrays for ``t``.
    """
    if var < 0:
        raise NegativeVariance(f"variance must be >= 0, got {var!r}")
    if np.ndim(t) == 0:
        t = float(t)
        if var == 0 or math.isinf(t):
            return 1.0 if t >= 0 else 0.0
        return _ncdf(t / math.sqrt(var))
    t = np.asarray(t, dtype=np.float64)
    if var == 0:
        return (t >= 0).astype(np.float64)
    return special.ndtr(t / math.sqrt(var))


def phi1_inv(q: float, var: float) -> float:
    """Threshold ``t`` with ``phi1(t, var) == q`` by bracketed root search."""
    if not (0.0 < q < 1.0):
        raise OutOfRange(f"quantile level must lie in (0, 1), got {q!r}")
    if not var > 0:
        raise NegativeVariance(f"quantile needs a positive variance, got {var!r}")
    # the standard CDF is strictly increasing on the bracket
    root = optimize.brentq(
        lambda x: special.ndtr(x) - q, -TAIL_Z, TAIL_Z, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500
    )
    return root * math.sqrt(var)


def marginal(cov: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Principal submatrix of ``cov`` on the 1-based coordinates in ``keep``."""
    keep = tuple(int(k) for k in keep)
    dim = np.shape(cov)[0]
    if not keep or list(keep) != sorted(set(keep)) or keep[0] < 1 or keep[-1] > dim:
        raise OutOfRange(f"marginal index must be a sorted, duplicate-free subset of 1..{dim}, got {keep}")
    idx = [k - 1 for k in keep]
    return np.asarray(cov, dtype=np.float64)[np.ix_(idx, idx)]


def check_cov(cov, dim: int) -> np.ndarray:
    c = np.array(cov, dtype=np.float64)
    if c.shape != (dim, dim):
        raise NotPSD(f"expected a {dim}x{dim} covariance, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise NotPSD("covariance has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(c))))
    if np.max(np.abs(c - c.T)) > 1e-12 * scale:
        raise NotPSD("covariance is not symmetric")
    c = 0.5 * (c + c.T)
    if np.any(np.diag(c) < 0):
        raise NegativeVariance("covariance has a negative diagonal entry")
    if np.linalg.eigvalsh(c)[0] < -1e-12 * scale:
        raise NotPSD("covariance is not positive semidefinite")
    return c


def _reduce(t: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray] | float:
    """Drop coordinates that are satisfied almost surely.

    Returns the reduced problem, or a float when the answer is already known
    (0.0 if some coordinate is violated almost surely).
    """
    keep = []
    for i in range(len(t)):
        v = c[i, i]
        ti = t[i]
        if ti == -math.inf:
            return 0.0
        if ti == math.inf:
            continue
        if v <= 0.0:
            if ti >= 0:
                continue
            return 0.0
        zi = ti / math.sqrt(v)
        if zi > TAIL_Z:
            continue
        if zi < -TAIL_Z:
            return 0.0
        keep.append(i)
    if not keep:
        return 1.0
    return t[keep], c[np.ix_(keep, keep)]


def _breaks(pts: list[float], lo: float, hi: float) -> list[float] | None:
    """Sorted breakpoints strictly inside ``(lo, hi)``, away from both ends."""
    # a break hugging an endpoint leaves quad a degenerate subinterval
    keep = sorted({p for p in pts if lo + BREAK_GAP < p < hi - BREAK_GAP})
    return keep or None


def _bvn_std(h: float, k: float, rho: float, epsabs: float = INNER_EPSABS) -> float:
    """``P(X <= h, Y <= k)`` for standard normals with correlation ``rho``."""
    if rho >= RHO_DEGENERATE:
        return _ncdf(min(h, k))
    if rho <= -RHO_DEGENERATE:
        return max(0.0, _ncdf(h) - _ncdf(-k))
    if rho == 0.0:
        return _ncdf(h) * _ncdf(k)
    r = math.sqrt((1.0 - rho) * (1.0 + rho))
    inv = 1.0 / (r * _SQRT2)

    def integrand(x: float) -> float:
        return _INV_SQRT2PI * math.exp(-0.5 * x * x) * 0.5 * math.erfc((rho * x - k) * inv)

    lo, hi = -TAIL_Z, min(h, TAIL_Z)
    if hi <= lo:
        return 0.0
    # conditional CDF switches around x = k / rho
    pts = [0.0]
    if abs(k) < TAIL_Z * abs(rho):
        pts.append(k / rho)
    val, _ = integrate.quad(integrand, lo, hi, points=_breaks(pts, lo, hi), epsabs=epsabs, epsrel=epsabs, limit=200)
    return min(max(val, 0.0), 1.0)


def _cdf2(t: np.ndarray, c: np.ndarray, epsabs: float = INNER_EPSABS) -> float:
    s1, s2 = math.sqrt(c[0, 0]), math.sqrt(c[1, 1])
    rho = c[0, 1] / (s1 * s2)
    return _bvn_std(t[0] / s1, t[1] / s2, max(-1.0, min(1.0, rho)), epsabs)


def _cdf3(t: np.ndarray, c: np.ndarray) -> float:
    # condition on the coordinate with the largest variance
    j = int(np.argmax(np.diag(c)))
    rest = [i for i in range(3) if i != j]
    sj = math.sqrt(c[j, j])
    beta = c[rest, j] / c[j, j]
    cc = c[np.ix_(rest, rest)] - np.outer(c[rest, j], c[rest, j]) / c[j, j]
    cc = 0.5 * (cc + cc.T)
    tr = t[rest]
    tj = t[j]

    def integrand(x: float) -> float:
        # x is the standardised conditioning coordinate
        y = x * sj
        return _INV_SQRT2PI * math.exp(-0.5 * x * x) * _cond_cdf2(tr - beta * y, cc)

    lo, hi = -TAIL_Z, min(tj / sj, TAIL_Z)
    if hi <= lo:
        return 0.0
    pts = [0.0]
    for b, ti in zip(beta, tr):
        if abs(ti) < TAIL_Z * abs(b) * sj:
            pts.append(ti / (b * sj))
    # a near-singular conditional block makes the integrand step-like; quad still converges
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(
            integrand, lo, hi, points=_breaks(pts, lo, hi), epsabs=OUTER_EPSABS, epsrel=OUTER_EPSABS, limit=200
        )
    return min(max(val, 0.0), 1.0)


def _cond_cdf2(t: np.ndarray, c: np.ndarray) -> float:
    red = _reduce(t, c)
    if isinstance(red, float):
        return red
    tr, cr = red
    if len(tr) == 1:
        return _ncdf(tr[0] / math.sqrt(cr[0, 0]))
    return _cdf2(tr, cr, NESTED_INNER_EPSABS)


def mvn_cdf(t: Sequence[float], cov) -> float:
    """Centred normal CDF ``P(Y <= t)`` for dimension 1 to 3."""
    t = np.array(t, dtype=np.float64).reshape(-1)
    if np.any(np.isnan(t)):
        raise OutOfRange("threshold is NaN")
    c = check_cov(cov, len(t))
    if len(t) > 3:
        raise OutOfRange("only dimensions 1 to 3 are supported")
    red = _reduce(t, c)
    if isinstance(red, float):
        return red
    tr, cr = red
    if len(tr) == 1:
        return _ncdf(tr[0] / math.sqrt(cr[0, 0]))
    if len(tr) == 2:
        return _cdf2(tr, cr)
    return _cdf3(tr, cr)


def phi2(t1: float, t2: float, cov) -> float:
    """Bivariate centred normal CDF."""
    return mvn_cdf((t1, t2), cov)


def phi3(t1: float, t2: float, t3: float, cov) -> float:
    """Trivariate centred normal CDF."""
    return mvn_cdf((t1, t2, t3), cov)
