"""First- and second-order Slepian-Wolf regions.

Anchors ``(a1, a2)`` are first-order rate pairs.  Their position relative to
the Slepian-Wolf polygon is read off three slacks

    d1 = a1 - H(X1|X2),  d2 = a2 - H(X2|X1),  d3 = a1 + a2 - H(X1X2)

snapped to zero within ``tol_snap``.  On the boundary, the second-order
region is a superlevel set ``{(L1, L2) : P >= 1 - eps}`` of a Gaussian CDF over
the coordinates whose slack is zero, evaluated at ``(L1, L2, L1 + L2)``.

All functions accept :class:`SourceStats` in either unit; rates, second-order
rates and ``tol_snap`` are read in the same unit (``tol_snap`` is given in
nats and rescaled).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import gaussian
from .errors import DegenerateComponentSigma, DegenerateSigma, NoSolution, OutOfRange, UnsupportedCase
from .source_model import UNIT_SCALE, MixedSource, SourceStats, compute_stats

TOL_SNAP = 1e-9
# variances below this (nats^2) count as zero
ZERO_VAR = 1e-10
BISECT_TOL = 1e-9
BISECT_MAXITER = 200


@dataclass(frozen=True)
class RegionQuery:
    """First-order anchor ``(a1, a2)`` and target error ``epsilon`` in [0, 1)."""

    a1: float
    a2: float
    epsilon: float

    def __post_init__(self):
        if not (math.isfinite(self.a1) and math.isfinite(self.a2)):
            raise OutOfRange("anchor rates must be finite")
        if not (0.0 <= self.epsilon < 1.0):
            raise OutOfRange(f"epsilon must lie in [0, 1), got {self.epsilon!r}")


@dataclass(frozen=True)
class SecondOrderPoint:
    L1: float
    L2: float

    def __post_init__(self):
        if not (math.isfinite(self.L1) and math.isfinite(self.L2)):
            raise OutOfRange("second-order rates must be finite")

    @property
    def thresholds(self) -> tuple[float, float, float]:
        return (self.L1, self.L2, self.L1 + self.L2)


class CaseKind(enum.Enum):
    INTERIOR = "interior"
    EXTERIOR = "exterior"
    CORNER = "corner"
    NON_CORNER = "non-corner"
    FULL_SIDE = "full-side"


@dataclass(frozen=True)
class BoundaryCase:
    """Position of an anchor relative to the Slepian-Wolf polygon.

    ``which`` is 1 or 2 for corners and full sides: corner 1 is
    ``(H(X1|X2), H(X2))`` and side 1 is ``a1 = H(X1|X2)``.  ``double`` marks
    the corner of an independent pair, where both corners coincide.
    ``lam`` is the convex weight of a non-corner anchor on the sum-rate facet.
    """

    kind: CaseKind
    which: int | None = None
    lam: float | None = None
    double: bool = False

    def coords(self) -> tuple[int, ...]:
        """1-based Gaussian coordinates the limit CDF is taken over."""
        if self.kind is CaseKind.CORNER:
            if self.double:
                return (1, 2)
            return (1, 3) if self.which == 1 else (2, 3)
        if self.kind is CaseKind.NON_CORNER:
            return (3,)
        if self.kind is CaseKind.FULL_SIDE:
            return (self.which,)
        return ()

    @property
    def label(self) -> str:
        if self.kind is CaseKind.CORNER:
            return "corner-double" if self.double else f"corner{self.which}"
        if self.kind is CaseKind.NON_CORNER:
            return f"caseII:{self.lam:.9g}"
        if self.kind is CaseKind.FULL_SIDE:
            return "caseIII-a" if self.which == 1 else "caseIII-b"
        return self.kind.value


class VerdictKind(enum.Enum):
    MEMBER = "member"
    NON_MEMBER = "non-member"
    ALL_OF_PLANE = "all-of-plane"
    EMPTY = "empty"


@dataclass(frozen=True)
class RegionVerdict:
    kind: VerdictKind
    probability: float | None = None

    @property
    def contains(self) -> bool:
        return self.kind in (VerdictKind.MEMBER, VerdictKind.ALL_OF_PLANE)


@dataclass(frozen=True)
class Polygon:
    """Slepian-Wolf polygon: three half-planes and two corner vertices."""

    r1_min: float
    r2_min: float
    sum_min: float
    corner1: tuple[float, float]
    corner2: tuple[float, float]

    def contains(self, r1: float, r2: float) -> bool:
        return r1 >= self.r1_min and r2 >= self.r2_min and r1 + r2 >= self.sum_min


def _unit_factor(stats: SourceStats) -> float:
    return UNIT_SCALE[stats.units]


def first_order_region(stats: SourceStats) -> Polygon:
    return Polygon(
        r1_min=stats.h1_given_2,
        r2_min=stats.h2_given_1,
        sum_min=stats.h12,
        corner1=(stats.h1_given_2, stats.h2),
        corner2=(stats.h1, stats.h2_given_1),
    )


def slacks(stats: SourceStats, a1: float, a2: float) -> tuple[float, float, float]:
    return (a1 - stats.h1_given_2, a2 - stats.h2_given_1, a1 + a2 - stats.h12)


def _classify_slacks(d: Sequence[float], tol: float, mutual_info: float) -> BoundaryCase:
    if any(x < -tol for x in d):
        return BoundaryCase(CaseKind.EXTERIOR)
    zero = tuple(i + 1 for i, x in enumerate(d) if abs(x) <= tol)
    if not zero:
        return BoundaryCase(CaseKind.INTERIOR)
    if zero == (3,):
        return BoundaryCase(CaseKind.NON_CORNER, lam=d[0] / mutual_info)
    if zero in ((1,), (2,)):
        return BoundaryCase(CaseKind.FULL_SIDE, which=zero[0])
    if zero == (1, 3):
        return BoundaryCase(CaseKind.CORNER, which=1)
    if zero == (2, 3):
        return BoundaryCase(CaseKind.CORNER, which=2)
    # d1 = d2 = 0 forces d3 = -I, so this is the independent corner
    return BoundaryCase(CaseKind.CORNER, which=1, double=True)


def classify(stats: SourceStats, q: RegionQuery, tol_snap: float = TOL_SNAP) -> BoundaryCase:
    """Locate the anchor of ``q`` on the polygon, snapping slacks within ``tol_snap`` nats."""
    tol = tol_snap * _unit_factor(stats)
    return _classify_slacks(slacks(stats, q.a1, q.a2), tol, stats.mutual_info)


def resolve_anchor(stats: SourceStats, spec: str | tuple[float, float], tol_snap: float = TOL_SNAP) -> tuple[float, float]:
    """Turn a symbolic anchor into ``(a1, a2)`` built from the exact entropies.

    Accepted forms are ``corner1``, ``corner2``, ``caseII:<lam>``,
    ``caseIII-a[:<offset>]``, ``caseIII-b[:<offset>]`` and ``"a1,a2"``.
    Full-side anchors sit ``offset`` (default 0.1, in the units of ``stats``)
    beyond the adjacent corner.
    """
    if not isinstance(spec, str):
        a1, a2 = spec
        return float(a1), float(a2)
    name, _, arg = spec.strip().partition(":")
    if name == "corner1":
        return stats.h1_given_2, stats.h2
    if name == "corner2":
        return stats.h1, stats.h2_given_1
    if name == "caseII":
        try:
            lam = float(arg)
        except ValueError:
            raise OutOfRange(f"caseII anchor needs a weight, e.g. caseII:0.5; got {spec!r}") from None
        if not (0.0 < lam < 1.0):
            raise OutOfRange(f"caseII weight must lie in (0, 1), got {lam!r}")
        if stats.mutual_info <= 2 * tol_snap * _unit_factor(stats):
            raise DegenerateSigma("independent sources have no non-corner points on the sum-rate facet")
        return (
            lam * stats.h1 + (1 - lam) * stats.h1_given_2,
            (1 - lam) * stats.h2 + lam * stats.h2_given_1,
        )
    if name in ("caseIII-a", "caseIII-b"):
        off = float(arg) if arg else 0.1
        if not off > 0:
            raise OutOfRange("full-side offset must be positive")
        if name == "caseIII-a":
            return stats.h1_given_2, stats.h2 + off
        return stats.h1 + off, stats.h2_given_1
    try:
        a1, a2 = (float(x) for x in spec.split(","))
    except ValueError:
        raise OutOfRange(f"unrecognised anchor {spec!r}") from None
    return a1, a2


def _require_variances(sigma: np.ndarray, coords: Iterable[int], floor: float, exc=DegenerateSigma) -> None:
    for i in coords:
        if sigma[i - 1, i - 1] <= floor:
            raise exc(f"coordinate {i} of the dispersion matrix has zero variance")


def case_probability(stats: SourceStats, case: BoundaryCase, pt: SecondOrderPoint) -> float:
    """Limit probability of the boundary case at ``pt`` (1 inside, 0 outside)."""
    if case.kind is CaseKind.INTERIOR:
        return 1.0
    if case.kind is CaseKind.EXTERIOR:
        return 0.0
    coords = case.coords()
    f = _unit_factor(stats)
    _require_variances(stats.sigma, coords, ZERO_VAR * f * f)
    t = pt.thresholds
    if len(coords) == 1:
        i = coords[0]
        return gaussian.phi1(t[i - 1], stats.sigma[i - 1, i - 1])
    i, j = coords
    return gaussian.phi2(t[i - 1], t[j - 1], gaussian.marginal(stats.sigma, coords))


def membership(
    stats: SourceStats, q: RegionQuery, pt: SecondOrderPoint, tol_snap: float = TOL_SNAP
) -> RegionVerdict:
    """Whether ``pt`` lies in the asymptotic second-order region at the anchor of ``q``."""
    case = classify(stats, q, tol_snap)
    if case.kind is CaseKind.INTERIOR:
        return RegionVerdict(VerdictKind.ALL_OF_PLANE, 1.0)
    if case.kind is CaseKind.EXTERIOR:
        return RegionVerdict(VerdictKind.EMPTY, 0.0)
    p = case_probability(stats, case, pt)
    kind = VerdictKind.MEMBER if p >= 1.0 - q.epsilon else VerdictKind.NON_MEMBER
    return RegionVerdict(kind, p)


def canonical_membership(stats: SourceStats, q: RegionQuery, pt: SecondOrderPoint, n: float) -> float:
    """Finite-``n`` Gaussian probability with the slacks scaled by ``sqrt(n)``.

    The anchor is in the finite-``n`` region iff the result is ``>= 1 - eps``.
    """
    if not n >= 1:
        raise OutOfRange(f"blocklength must be >= 1, got {n!r}")
    if not stats.positive_definite:
        raise DegenerateSigma("dispersion matrix is not positive definite")
    rn = math.sqrt(n)
    d = slacks(stats, q.a1, q.a2)
    t = [rn * di + li for di, li in zip(d, pt.thresholds)]
    return gaussian.phi3(t[0], t[1], t[2], stats.sigma)


def _threshold(var: float, epsilon: float) -> float:
    return gaussian.phi1_inv(1.0 - epsilon, var)


def _bisect_increasing(func, target: float, scale: float) -> float:
    """Smallest ``s`` (to ``BISECT_TOL``) with ``func(s) >= target``."""
    lo, hi = -scale, scale
    for _ in range(BISECT_MAXITER):
        if func(hi) >= target:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NoSolution("bracket expansion did not reach the target level")
    for _ in range(BISECT_MAXITER):
        if func(lo) < target:
            break
        hi, lo = lo, 2.0 * lo
    else:
        raise NoSolution("bracket expansion did not leave the target level")
    for _ in range(BISECT_MAXITER):
        if hi - lo <= BISECT_TOL:
            break
        mid = 0.5 * (lo + hi)
        if func(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def boundary_curve(
    stats: SourceStats, q: RegionQuery, grid: Sequence[float], tol_snap: float = TOL_SNAP
) -> list[tuple[float, float]]:
    """Points ``(L1, L2)`` on the boundary of the second-order region.

    ``grid`` holds abscissae of the free coordinate: ``L1`` for corner 1, the
    independent corner, the sum-rate facet and side 2; ``L2`` for corner 2
    and side 1 (where the boundary is the vertical line ``L1 = T``).
    Corner abscissae at or below the asymptote raise :class:`NoSolution`.
    """
    if not (0.0 < q.epsilon < 1.0):
        raise OutOfRange("boundary curves need 0 < epsilon < 1")
    case = classify(stats, q, tol_snap)
    if case.kind in (CaseKind.INTERIOR, CaseKind.EXTERIOR):
        raise UnsupportedCase(f"the region is {'all of the plane' if case.kind is CaseKind.INTERIOR else 'empty'}")
    f = _unit_factor(stats)
    sig = stats.sigma
    _require_variances(sig, case.coords(), ZERO_VAR * f * f)
    level = 1.0 - q.epsilon
    grid = [float(g) for g in grid]
    if case.kind is CaseKind.NON_CORNER:
        t = _threshold(sig[2, 2], q.epsilon)
        return [(g, t - g) for g in grid]
    if case.kind is CaseKind.FULL_SIDE:
        t = _threshold(sig[case.which - 1, case.which - 1], q.epsilon)
        return [(t, g) for g in grid] if case.which == 1 else [(g, t) for g in grid]

    if case.double:
        cov = gaussian.marginal(sig, (1, 2))
        free_var = sig[0, 0]
        scale = math.sqrt(sig[1, 1])
        solve = lambda g: _bisect_increasing(lambda s: gaussian.phi2(g, s, cov), level, scale)  # noqa: E731
        emit = lambda g, s: (g, s)  # noqa: E731
    else:
        k = case.which
        cov = gaussian.marginal(sig, (k, 3))
        free_var = sig[k - 1, k - 1]
        scale = math.sqrt(sig[2, 2])
        solve = lambda g: _bisect_increasing(lambda s: gaussian.phi2(g, s, cov), level, scale)  # noqa: E731
        emit = (lambda g, s: (g, s - g)) if k == 1 else (lambda g, s: (s - g, g))
    out = []
    for g in grid:
        if gaussian.phi1(g, free_var) <= level:
            raise NoSolution(f"abscissa {g!r} is at or below the asymptote of the boundary")
        out.append(emit(g, solve(g)))
    return out


def boundary_anchors(stats: SourceStats, count: int = 9, side_extent: float = 0.5) -> list[tuple[float, float]]:
    """Sample anchors along the polygon boundary.

    Returns points on side 1 above corner 1 (out to ``side_extent``), the
    corners, ``count`` non-corner points on the sum-rate facet (none for an
    independent pair) and points on side 2.
    """
    out = []
    for off in np.linspace(side_extent, 0, 3, endpoint=False):
        out.append((stats.h1_given_2, stats.h2 + float(off)))
    out.append((stats.h1_given_2, stats.h2))
    if stats.mutual_info > 2 * TOL_SNAP * _unit_factor(stats):
        for lam in np.linspace(0, 1, count + 2)[1:-1]:
            out.append(resolve_anchor(stats, f"caseII:{float(lam)!r}"))
        out.append((stats.h1, stats.h2_given_1))
    for off in np.linspace(0, side_extent, 4)[1:]:
        out.append((stats.h1 + float(off), stats.h2_given_1))
    return out


def _normal_point(stats: SourceStats, case: BoundaryCase, epsilon: float) -> tuple[float, float]:
    """Second-order boundary point along the outward normal of the facet."""
    sig = stats.sigma
    if case.kind is CaseKind.NON_CORNER:
        t = _threshold(sig[2, 2], epsilon)
        return (0.5 * t, 0.5 * t)
    if case.kind is CaseKind.FULL_SIDE:
        t = _threshold(sig[case.which - 1, case.which - 1], epsilon)
        return (t, 0.0) if case.which == 1 else (0.0, t)
    # corners: walk the diagonal L1 = L2
    cov = gaussian.marginal(sig, case.coords())
    if case.double:
        func = lambda s: gaussian.phi2(s, s, cov)  # noqa: E731
    else:
        func = lambda s: gaussian.phi2(s, 2.0 * s, cov)  # noqa: E731
    s = _bisect_increasing(func, 1.0 - epsilon, math.sqrt(sig[2, 2]))
    return (s, s)


def finite_n_boundary(
    stats: SourceStats,
    epsilon: float,
    n: float,
    anchors: Iterable[tuple[float, float]],
    tol_snap: float = TOL_SNAP,
) -> list[tuple[float, float]]:
    """Gaussian-approximate finite-``n`` boundary ``anchor + L*/sqrt(n)``.

    ``L*`` is the point of the second-order boundary along the facet normal
    (the diagonal at corners).  This is an approximation of the achievable
    set at blocklength ``n``, not an exact guarantee.
    """
    if not (0.0 < epsilon < 1.0):
        raise OutOfRange("finite-n boundaries need 0 < epsilon < 1")
    if not n >= 1:
        raise OutOfRange(f"blocklength must be >= 1, got {n!r}")
    rn = math.sqrt(n)
    f = _unit_factor(stats)
    out = []
    for a1, a2 in anchors:
        case = classify(stats, RegionQuery(a1, a2, epsilon), tol_snap)
        if case.kind in (CaseKind.INTERIOR, CaseKind.EXTERIOR):
            raise UnsupportedCase(f"anchor ({a1!r}, {a2!r}) is not on the polygon boundary")
        _require_variances(stats.sigma, case.coords(), ZERO_VAR * f * f)
        l1, l2 = _normal_point(stats, case, epsilon)
        out.append((a1 + l1 / rn, a2 + l2 / rn))
    return out


# ---------------------------------------------------------------- mixtures


@dataclass(frozen=True)
class ComponentTerm:
    """Contribution of one mixture component at an anchor."""

    weight: float
    coords: tuple[int, ...]  # empty: constant contribution
    constant: float  # 0 or 1 when coords is empty
    value: float


def _component_terms(
    mix: MixedSource, q: RegionQuery, pt: SecondOrderPoint, units: str, tol_snap: float
) -> list[ComponentTerm]:
    tol = tol_snap * UNIT_SCALE[units]
    floor = ZERO_VAR * UNIT_SCALE[units] ** 2
    t = pt.thresholds
    terms = []
    for w, pmf in mix.components:
        st = compute_stats(pmf).in_units(units)
        d = slacks(st, q.a1, q.a2)
        if any(x < -tol for x in d):
            terms.append(ComponentTerm(w, (), 0.0, 0.0))
            continue
        eq = tuple(i + 1 for i, x in enumerate(d) if abs(x) <= tol)
        if not eq:
            terms.append(ComponentTerm(w, (), 1.0, 1.0))
            continue
        _require_variances(st.sigma, eq, floor, DegenerateComponentSigma)
        cov = gaussian.marginal(st.sigma, eq)
        val = gaussian.mvn_cdf([t[i - 1] for i in eq], cov)
        terms.append(ComponentTerm(w, eq, float("nan"), val))
    return terms


def mixed_limit_value(
    mix: MixedSource, q: RegionQuery, pt: SecondOrderPoint, units: str = "nats", tol_snap: float = TOL_SNAP
) -> float:
    """Weighted limit probability from a per-coordinate sign classification."""
    return math.fsum(term.weight * term.value for term in _component_terms(mix, q, pt, units, tol_snap))


def mixed_membership(
    mix: MixedSource, q: RegionQuery, pt: SecondOrderPoint, units: str = "nats", tol_snap: float = TOL_SNAP
) -> RegionVerdict:
    """Second-order membership for a finite mixture.

    Components with every slack positive contribute their full weight,
    components with a negative slack contribute nothing, and the rest
    contribute the Gaussian CDF over their zero-slack coordinates.  The region
    is the whole plane when the constant part alone reaches ``1 - eps``, and
    empty when even the supremum of the varying part cannot exceed it (the
    Gaussian CDFs never reach 1 at finite arguments).
    """
    terms = _component_terms(mix, q, pt, units, tol_snap)
    level = 1.0 - q.epsilon
    const = math.fsum(tm.weight for tm in terms if not tm.coords and tm.constant == 1.0)
    varying = math.fsum(tm.weight for tm in terms if tm.coords)
    value = math.fsum(tm.weight * tm.value for tm in terms)
    if const >= level:
        return RegionVerdict(VerdictKind.ALL_OF_PLANE, value)
    if const + varying <= level:
        return RegionVerdict(VerdictKind.EMPTY, value)
    return RegionVerdict(VerdictKind.MEMBER if value >= level else VerdictKind.NON_MEMBER, value)


def lambda_set(stats: SourceStats, a1: float, a2: float, tol: float) -> int | None:
    """Index 0..5 of the set an anchor falls in for one component, ``45`` for
    the overlap of sets 4 and 5, or ``None`` when the component contributes 0.
    """

    def eq(x, y):
        return abs(x - y) <= tol

    def gt(x, y):
        return x > y + tol

    h1g2, h2g1, h12, h1, h2 = stats.h1_given_2, stats.h2_given_1, stats.h12, stats.h1, stats.h2
    in4 = eq(a1, h1g2) and eq(a2, h2)
    in5 = eq(a1, h1) and eq(a2, h2g1)
    if in4 and in5:
        return 45
    if in4:
        return 4
    if in5:
        return 5
    if gt(a1, h1g2) and gt(a2, h2g1) and gt(a1 + a2, h12):
        return 0
    if eq(a1, h1g2) and gt(a2, h2):
        return 1
    if gt(a1, h1) and eq(a2, h2g1):
        return 2
    if gt(a1, h1g2) and gt(a2, h2g1) and eq(a1 + a2, h12):
        return 3
    return None


def mixed_phi_lambda(
    mix: MixedSource, q: RegionQuery, pt: SecondOrderPoint, units: str = "nats", tol_snap: float = TOL_SNAP
) -> float:
    """Weighted limit probability assembled set-by-set over the components.

    Anchors outside all six sets have some slack strictly negative for that
    component; its error probability then tends to one and it contributes 0.
    """
    tol = tol_snap * UNIT_SCALE[units]
    floor = ZERO_VAR * UNIT_SCALE[units] ** 2
    L1, L2 = pt.L1, pt.L2
    parts = []
    for w, pmf in mix.components:
        st = compute_stats(pmf).in_units(units)
        sig = st.sigma
        which = lambda_set(st, q.a1, q.a2, tol)
        if which is None:
            continue
        if which == 0:
            parts.append(w)
            continue
        need = {1: (1,), 2: (2,), 3: (3,), 4: (1, 3), 5: (2, 3), 45: (1, 2)}[which]
        _require_variances(sig, need, floor, DegenerateComponentSigma)
        if which == 1:
            v = gaussian.phi1(L1, sig[0, 0])
        elif which == 2:
            v = gaussian.phi1(L2, sig[1, 1])
        elif which == 3:
            v = gaussian.phi1(L1 + L2, sig[2, 2])
        elif which == 4:
            v = gaussian.phi2(L1, L1 + L2, sig[np.ix_([0, 2], [0, 2])])
        elif which == 5:
            v = gaussian.phi2(L2, L1 + L2, sig[np.ix_([1, 2], [1, 2])])
        else:
            v = gaussian.phi2(L1, L2, sig[:2, :2])
        parts.append(w * v)
    return math.fsum(parts)
