"""Finite-``n`` information-spectrum probabilities.

For an i.i.d. pair the three self-informations of a length-``n`` block,

    S1 = -log P(x1^n | x2^n),  S2 = -log P(x2^n | x1^n),  S3 = -log P(x1^n, x2^n),

depend only on the joint type, so the probability that any of them reaches a
threshold is a finite sum of multinomial masses.  :func:`exact_Fn` evaluates
it by enumerating types, pruning counts whose conditional binomial tail mass
is below ``1e-18``; :func:`mc_Fn` estimates it from sampled sequences.
The event is ``S_i >= n a_i + sqrt(n) L_i`` for some ``i`` (``a3 = a1 + a2``,
``L3 = L1 + L2``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import BudgetExceeded, OutOfRange
from .region import RegionQuery, SecondOrderPoint, case_probability, classify
from .source_model import JointPmf, compute_stats

MAX_CELLS = 8
MAX_N = 2000
MAX_TYPES = 3e8
PRUNE_DELTA = 1e-18
TIE_RTOL = 1e-9
DEFAULT_GAMMA = 0.5


@dataclass(frozen=True)
class SpectrumTriple:
    """Normalised self-information sums ``(S_i - n a_i) / sqrt(n)``, one entry per sample."""

    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray

    def violates(self, pt: SecondOrderPoint) -> np.ndarray:
        return (self.u1 >= pt.L1) | (self.u2 >= pt.L2) | (self.u3 >= pt.L1 + pt.L2)


@dataclass(frozen=True)
class TypeClass:
    """Joint type: cell counts over the support, and its multinomial log-mass."""

    counts: tuple[int, ...]
    log_prob: float


def _support_cells(pmf: JointPmf) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities and ``(3, k)`` self-information of the support cells, row-major."""
    mask = pmf.support.ravel()
    p = pmf.p.ravel()[mask]
    info = pmf.self_information().reshape(3, -1)[:, mask]
    return p, info


def _sum_thresholds(L1: float, L2: float) -> float:
    if L1 == -math.inf or L2 == -math.inf:
        return -math.inf
    return L1 + L2


def _bernstein_halfwidth(m: int, p: float) -> float:
    """Half-width beyond which a Bin(m, p) two-sided tail is below ``PRUNE_DELTA``."""
    lg = math.log(2.0 / PRUNE_DELTA)
    v = m * p * (1.0 - p)
    return lg / 3.0 + math.sqrt((lg / 3.0) ** 2 + 2.0 * v * lg)


def _window(m: int, p: float) -> tuple[int, int]:
    if p >= 1.0:
        return m, m
    hw = _bernstein_halfwidth(m, p)
    mu = m * p
    return max(0, math.floor(mu - hw)), min(m, math.ceil(mu + hw))


def estimate_types(k: int, n: int, p: Sequence[float]) -> float:
    """Rough count of the type classes visited after pruning."""
    est = 1.0
    rem = 1.0
    for i in range(k - 1):
        cond = min(1.0, p[i] / rem) if rem > 0 else 1.0
        lo, hi = _window(n, cond)
        est *= hi - lo + 1
        rem -= p[i]
    return est


def _check_budget(k: int, n: int, p: Sequence[float]) -> None:
    if k > MAX_CELLS:
        raise BudgetExceeded(f"{k} support cells exceed the enumeration limit of {MAX_CELLS}")
    if n > MAX_N:
        raise BudgetExceeded(f"blocklength {n} exceeds the enumeration limit of {MAX_N}")
    est = estimate_types(k, n, p)
    if est > MAX_TYPES:
        raise BudgetExceeded(f"about {est:.3g} type classes would be visited (limit {MAX_TYPES:.3g})")


def exact_event_probability(pmf: JointPmf, n: int, thresholds: Sequence[float]) -> float:
    """``P(S1 >= t1 or S2 >= t2 or S3 >= t3)`` by type enumeration.

    Thresholds are in nats and may be infinite.
    """
    n = int(n)
    if n < 1:
        raise OutOfRange(f"blocklength must be >= 1, got {n}")
    thr = np.array(thresholds, dtype=np.float64)
    p, info = _support_cells(pmf)
    k = len(p)
    _check_budget(k, n, p)
    if np.any(thr == -math.inf):
        return 1.0
    active = np.flatnonzero(np.isfinite(thr))
    if active.size == 0:
        return 0.0
    # counts whose sums sit within rounding of a threshold count as reaching it
    thr = thr[active] - TIE_RTOL * max(1.0, n)
    info = info[active]

    lg = gammaln(np.arange(n + 1) + 1.0)
    lp = np.log(p)
    hits: list[float] = []

    def block(prefix: list[int], rem: int, rem_p: float) -> None:
        # the last one or two free cells are vectorised; the final cell takes the remainder
        base_lm = lg[n] - sum(lg[c] for c in prefix) + sum(c * lp[i] for i, c in enumerate(prefix))
        base_s = info[:, : len(prefix)] @ np.array(prefix, dtype=np.float64) if prefix else np.zeros(len(active))
        j = len(prefix)
        if k - j == 1:
            counts = [np.array([rem])]
        elif k - j == 2:
            lo, hi = _window(rem, min(1.0, p[j] / rem_p))
            a = np.arange(lo, hi + 1)
            counts = [a, rem - a]
        else:
            lo, hi = _window(rem, min(1.0, p[j] / rem_p))
            cond_b = min(1.0, p[j + 1] / (rem_p - p[j])) if rem_p > p[j] else 1.0
            b_lo = _window(rem - hi, cond_b)[0]
            b_hi = _window(rem - lo, cond_b)[1]
            a = np.arange(lo, hi + 1)[:, None]
            b = np.arange(b_lo, b_hi + 1)[None, :]
            c = rem - a - b
            ok = c >= 0
            a, b = np.broadcast_arrays(a, b)
            a, b, c = a[ok], b[ok], c[ok]
            counts = [a, b, c]
        lm = np.full(counts[0].shape, base_lm)
        s = np.repeat(base_s[:, None], counts[0].size, axis=1)
        for off, cnt in enumerate(counts):
            cell = j + off
            lm = lm - lg[cnt] + cnt * lp[cell]
            s = s + info[:, cell : cell + 1] * cnt
        viol = np.any(s >= thr[:, None], axis=0)
        if np.any(viol):
            hits.append(float(np.sum(np.exp(lm[viol]))))

    def recurse(prefix: list[int], rem: int, rem_p: float) -> None:
        j = len(prefix)
        if k - j <= 3:
            block(prefix, rem, rem_p)
            return
        lo, hi = _window(rem, min(1.0, p[j] / rem_p))
        for c in range(lo, hi + 1):
            recurse(prefix + [c], rem - c, rem_p - p[j])

    recurse([], n, 1.0)
    hits.sort(reverse=True)
    return min(1.0, math.fsum(hits))


def fn_thresholds(n: int, q: RegionQuery, pt: SecondOrderPoint) -> tuple[float, float, float]:
    rn = math.sqrt(n)
    L3 = _sum_thresholds(pt.L1, pt.L2)
    a = (q.a1, q.a2, q.a1 + q.a2)
    out = []
    for ai, li in zip(a, (pt.L1, pt.L2, L3)):
        out.append(li if math.isinf(li) else n * ai + rn * li)
    return tuple(out)


def _point(pt) -> SecondOrderPoint:
    # exact_Fn accepts infinite thresholds, which SecondOrderPoint refuses
    if isinstance(pt, SecondOrderPoint):
        return pt
    L1, L2 = pt
    obj = object.__new__(SecondOrderPoint)
    object.__setattr__(obj, "L1", float(L1))
    object.__setattr__(obj, "L2", float(L2))
    return obj


def exact_Fn(pmf: JointPmf, n: int, q: RegionQuery, pt) -> float:
    """Exact probability that a normalised self-information sum reaches its threshold.

    ``q`` and ``pt`` are in nats; ``pt`` may be a ``(L1, L2)`` pair with
    infinite entries.
    """
    return exact_event_probability(pmf, n, fn_thresholds(n, q, _point(pt)))


def sample_pairs(pmf: JointPmf, n: int, samples: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``samples`` i.i.d. sequence pairs of length ``n`` as symbol indices."""
    flat = pmf.p.ravel()
    cells = rng.choice(flat.size, size=(samples, n), p=flat)
    return np.divmod(cells, pmf.cols)


def spectrum_triples(pmf: JointPmf, q: RegionQuery, x1: np.ndarray, x2: np.ndarray) -> SpectrumTriple:
    n = x1.shape[1]
    info = pmf.self_information()
    rn = math.sqrt(n)
    s = [info[i][x1, x2].sum(axis=1) for i in range(3)]
    a = (q.a1, q.a2, q.a1 + q.a2)
    return SpectrumTriple(*((si - n * ai) / rn for si, ai in zip(s, a)))


def mc_Fn(
    pmf: JointPmf,
    n: int,
    q: RegionQuery,
    pt,
    samples: int,
    seed: int,
    chunk: int = 4096,
) -> tuple[float, float]:
    """Monte-Carlo estimate of :func:`exact_Fn` with its binomial standard error."""
    if samples < 1:
        raise OutOfRange("samples must be >= 1")
    pt = _point(pt)
    L3 = _sum_thresholds(pt.L1, pt.L2)
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        x1, x2 = sample_pairs(pmf, n, m, rng)
        tr = spectrum_triples(pmf, q, x1, x2)
        v = (tr.u1 >= pt.L1) | (tr.u2 >= pt.L2) | (tr.u3 >= L3)
        hits += int(np.count_nonzero(v))
        done += m
    est = hits / samples
    return est, math.sqrt(est * (1.0 - est) / samples)


@dataclass(frozen=True)
class ThresholdBound:
    value: float
    unclamped: float
    event_probability: float
    z: float
    gamma: float

    @property
    def clamped(self) -> bool:
        return self.unclamped != self.value


def _log_size(m) -> float:
    if m <= 0:
        raise OutOfRange(f"code sizes must be positive, got {m!r}")
    return math.log(m)


def lemma1_upper(pmf: JointPmf, n: int, M1, M2, gamma: float = DEFAULT_GAMMA) -> ThresholdBound:
    """Achievability bound: event probability at ``log M + log z`` plus ``3 z``,
    with ``z = exp(-n^(1/4) gamma)``; clamped at 1.
    """
    if not gamma > 0:
        raise OutOfRange("gamma must be positive")
    lz = -(n**0.25) * gamma
    l1, l2 = _log_size(M1), _log_size(M2)
    ev = exact_event_probability(pmf, n, (l1 + lz, l2 + lz, l1 + l2 + lz))
    z = math.exp(lz)
    raw = ev + 3.0 * z
    return ThresholdBound(min(1.0, raw), raw, ev, z, gamma)


def lemma2_lower(pmf: JointPmf, n: int, M1, M2, gamma: float = DEFAULT_GAMMA) -> ThresholdBound:
    """Converse bound: event probability at ``log M - log z`` minus ``3 z``,
    with ``z = exp(-sqrt(n) gamma)``; clamped at 0.
    """
    if not gamma > 0:
        raise OutOfRange("gamma must be positive")
    lz = -math.sqrt(n) * gamma
    l1, l2 = _log_size(M1), _log_size(M2)
    ev = exact_event_probability(pmf, n, (l1 - lz, l2 - lz, l1 + l2 - lz))
    z = math.exp(lz)
    raw = ev - 3.0 * z
    return ThresholdBound(max(0.0, raw), raw, ev, z, gamma)


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    exact: float
    gaussian: float
    gap: float


def convergence_report(
    pmf: JointPmf, q: RegionQuery, pt: SecondOrderPoint, n_list: Iterable[int]
) -> list[ConvergenceRow]:
    """Exact ``F_n`` next to its Gaussian limit ``1 - P_case`` (all in nats)."""
    stats = compute_stats(pmf)
    gauss = 1.0 - case_probability(stats, classify(stats, q), pt)
    rows = []
    for n in sorted(int(v) for v in n_list):
        ex = exact_Fn(pmf, n, q, pt)
        rows.append(ConvergenceRow(n, ex, gauss, abs(ex - gauss)))
    return rows


def type_classes(pmf: JointPmf, n: int) -> list[TypeClass]:
    """Every joint type of length ``n`` over the support (small ``n`` only)."""
    p, _ = _support_cells(pmf)
    k = len(p)
    if math.comb(n + k - 1, k - 1) > 10**6:
        raise BudgetExceeded("too many type classes to list")
    lp = np.log(p)
    out = []

    def rec(prefix, rem):
        if len(prefix) == k - 1:
            c = tuple(prefix) + (rem,)
            lm = math.lgamma(n + 1) + sum(ci * lp[i] - math.lgamma(ci + 1) for i, ci in enumerate(c))
            out.append(TypeClass(c, float(lm)))
            return
        for ci in range(rem + 1):
            rec(prefix + [ci], rem - ci)

    rec([], n)
    return out
