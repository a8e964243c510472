"""Gallager-type exponents and the three-parameter Koshelev error bound.

For a joint pmf ``P`` the exponents are (nats, ``0 <= s <= 1``)

    E1(s) = log sum_x2 ( sum_x1 P(x1,x2)^(1/(1+s)) )^(1+s)
    E2(s) = log sum_x1 ( sum_x2 P(x1,x2)^(1/(1+s)) )^(1+s)
    E3(s) = (1+s) log sum_{x1,x2} P(x1,x2)^(1/(1+s))

each convex with ``E(0) = 0``, ``E'(0)`` the matching entropy and ``E''(0)``
the matching diagonal dispersion entry.  The bound on the error of a
random-binning code at rates ``(R1, R2)`` is

    sum_i  min_{0<=s<=1} exp(-n (R_i s - E_i(s))),   R_3 = R1 + R2,

with the three parameters optimised independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import OutOfRange, SignConstraintViolated, UnsupportedCase
from .region import BoundaryCase, CaseKind, SecondOrderPoint, case_probability
from .source_model import JointPmf, SourceStats

GOLDEN_TOL = 1e-10
SCAN_POINTS = 64
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class ExponentFn:
    """One of the three exponent functions of ``pmf`` (``which`` in 1, 2, 3)."""

    which: int
    pmf: JointPmf

    def __post_init__(self):
        if self.which not in (1, 2, 3):
            raise OutOfRange(f"exponent index must be 1, 2 or 3, got {self.which!r}")

    def __call__(self, s: float) -> float:
        return exponent(self, s)


def _log_table(pmf: JointPmf) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(pmf.p)


def exponent_value(which: int, pmf: JointPmf, s: float) -> float:
    """Exponent without the range check; analytic for ``s > -1``."""
    if not s > -1.0:
        raise OutOfRange("exponent is defined for s > -1")
    lp = _log_table(pmf)
    r = 1.0 + s
    if which == 3:
        return float(r * logsumexp(lp / r))
    # E1 sums x1 inside (axis 0), E2 sums x2 inside (axis 1)
    inner = logsumexp(lp / r, axis=0 if which == 1 else 1)
    return float(logsumexp(r * inner))


def exponent(e: ExponentFn, s: float) -> float:
    if not (0.0 <= s <= 1.0):
        raise OutOfRange(f"s must lie in [0, 1], got {s!r}")
    return exponent_value(e.which, e.pmf, s)


def _maximise_concave(g, tol: float = GOLDEN_TOL) -> tuple[float, float]:
    """Maximise ``g`` on [0, 1]: grid scan, then golden section around the best node."""
    nodes = np.linspace(0.0, 1.0, SCAN_POINTS + 1)
    vals = [g(float(x)) for x in nodes]
    k = int(np.argmax(vals))
    a = float(nodes[max(k - 1, 0)])
    b = float(nodes[min(k + 1, SCAN_POINTS)])
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    gc, gd = g(c), g(d)
    while b - a > tol:
        if gc >= gd:
            b, d, gd = d, c, gc
            c = b - _INVPHI * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + _INVPHI * (b - a)
            gd = g(d)
    best_s, best_v = float(nodes[k]), vals[k]
    for s in (a, b, 0.5 * (a + b)):
        v = g(s)
        if v > best_v:
            best_s, best_v = s, v
    return best_s, best_v


@dataclass(frozen=True)
class KoshelevTerm:
    which: int
    rate: float
    s: float
    exponent: float  # max_s (R s - E(s)), nats per symbol
    value: float  # exp(-n * exponent)


@dataclass(frozen=True)
class KoshelevBound:
    terms: tuple[KoshelevTerm, KoshelevTerm, KoshelevTerm]
    unclamped: float
    value: float

    @property
    def clamped(self) -> bool:
        return self.unclamped > 1.0


def koshelev_terms(pmf: JointPmf, R1: float, R2: float, n: float) -> tuple[KoshelevTerm, ...]:
    if not n >= 1:
        raise OutOfRange(f"blocklength must be >= 1, got {n!r}")
    if not (math.isfinite(R1) and math.isfinite(R2)):
        raise OutOfRange("rates must be finite")
    out = []
    for which, rate in ((1, R1), (2, R2), (3, R1 + R2)):
        s, ex = _maximise_concave(lambda s, w=which, r=rate: r * s - exponent_value(w, pmf, s))
        # s = 0 always gives exponent 0
        ex = max(ex, 0.0)
        out.append(KoshelevTerm(which, rate, s, ex, math.exp(-n * ex)))
    return tuple(out)


def koshelev_details(pmf: JointPmf, R1: float, R2: float, n: float) -> KoshelevBound:
    terms = koshelev_terms(pmf, R1, R2, n)
    raw = math.fsum(t.value for t in terms)
    return KoshelevBound(terms, raw, min(1.0, raw))


def koshelev_bound(pmf: JointPmf, R1: float, R2: float, n: float) -> float:
    """Upper bound on the ensemble error at rates ``(R1, R2)`` nats, clamped to [0, 1]."""
    return koshelev_details(pmf, R1, R2, n).value


def _tail(L: float, var: float) -> float:
    if var <= 0.0:
        return 1.0 if L == 0 else 0.0
    return math.exp(-L * L / (2.0 * var))


def gaussian_tail_bound(stats: SourceStats, case: BoundaryCase, pt: SecondOrderPoint) -> float:
    """Large-``n`` form of the Koshelev bound at a boundary anchor.

    Sums ``exp(-L^2 / 2 var)`` over the coordinates of the case, which needs
    each of the involved thresholds to be nonnegative.  The independent
    double corner keeps all three terms.
    """
    if case.kind in (CaseKind.INTERIOR, CaseKind.EXTERIOR):
        raise UnsupportedCase("tail forms exist only for boundary anchors")
    if case.kind is CaseKind.CORNER:
        coords = (1, 2, 3) if case.double else (case.which, 3)
    else:
        coords = case.coords()
    t = pt.thresholds
    bad = [i for i in coords if t[i - 1] < 0]
    if bad:
        names = {1: "L1", 2: "L2", 3: "L1+L2"}
        raise SignConstraintViolated(f"{', '.join(names[i] for i in bad)} must be >= 0 for this case")
    return math.fsum(_tail(t[i - 1], stats.sigma[i - 1, i - 1]) for i in coords)


@dataclass(frozen=True)
class ComparisonRow:
    L1: float
    L2: float
    err_second_order: float
    err_koshelev: float  # nan where the tail form's sign constraints fail


def comparison_table(
    stats: SourceStats, case: BoundaryCase, points: Iterable[tuple[float, float]]
) -> list[ComparisonRow]:
    """Second-order error ``1 - P_case`` next to the Koshelev tail form."""
    rows = []
    for L1, L2 in points:
        pt = SecondOrderPoint(float(L1), float(L2))
        second = 1.0 - case_probability(stats, case, pt)
        try:
            kosh = gaussian_tail_bound(stats, case, pt)
        except SignConstraintViolated:
            kosh = float("nan")
        rows.append(ComparisonRow(pt.L1, pt.L2, second, kosh))
    return rows


def rect_grid(l1: Sequence[float], l2: Sequence[float]) -> list[tuple[float, float]]:
    """Row-major rectangular grid (``L2`` varies fastest)."""
    return [(float(a), float(b)) for a in l1 for b in l2]


def diagonal(values: Sequence[float]) -> list[tuple[float, float]]:
    return [(float(v), float(v)) for v in values]


def sum_line(sums: Sequence[float]) -> list[tuple[float, float]]:
    """Points with ``L1 = L2 = s/2``, a one-parameter sweep of ``L1 + L2``."""
    return [(0.5 * float(s), 0.5 * float(s)) for s in sums]
