"""Random-binning Slepian-Wolf codes with exact maximum-likelihood decoding.

Sequences of length ``n`` are indexed in base ``|X|`` with the first symbol
most significant.  Bins are 0-based.  Every sequence pair's log-probability is
tabulated once from integer cell counts accumulated in a fixed cell order, so
pairs of equal type compare exactly equal and ties are broken
lexicographically by ``(x1 index, x2 index)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import binomtest

from .errors import BudgetExceeded, EmptyBinPair, InvalidTrials, OutOfRange
from .source_model import JointPmf

MAX_PAIRS = 2**20


@dataclass(frozen=True, eq=False)
class BinningCode:
    n: int
    M1: int
    M2: int
    bin1: np.ndarray  # bin of each X1 sequence
    bin2: np.ndarray
    seed: int | tuple[int, ...]

    def encode(self, x1: int, x2: int) -> tuple[int, int]:
        return int(self.bin1[x1]), int(self.bin2[x2])


def _check_sizes(n: int, rows: int, cols: int, M1: int, M2: int, max_pairs: int) -> None:
    if n < 1:
        raise OutOfRange(f"blocklength must be >= 1, got {n}")
    if M1 < 1 or M2 < 1:
        raise OutOfRange("bin counts must be >= 1")
    if rows**n * cols**n > max_pairs:
        raise BudgetExceeded(f"{rows}^{n} x {cols}^{n} sequence pairs exceed the decoding cap of {max_pairs}")


def _draw_bins(rng: np.random.Generator, n: int, rows: int, cols: int, M1: int, M2: int):
    return rng.integers(0, M1, size=rows**n), rng.integers(0, M2, size=cols**n)


def draw_code(
    n: int, M1: int, M2: int, seed, rows: int = 2, cols: int = 2, max_pairs: int = MAX_PAIRS
) -> BinningCode:
    """Uniform independent bin assignment for every sequence, reproducible from ``seed``."""
    M1, M2 = int(M1), int(M2)
    _check_sizes(n, rows, cols, M1, M2, max_pairs)
    b1, b2 = _draw_bins(np.random.default_rng(seed), n, rows, cols, M1, M2)
    return BinningCode(n, M1, M2, b1, b2, seed)


def _digits(count: int, n: int, base: int) -> np.ndarray:
    idx = np.arange(count)
    out = np.empty((count, n), dtype=np.int64)
    for t in range(n - 1, -1, -1):
        idx, out[:, t] = np.divmod(idx, base)
    return out


@lru_cache(maxsize=8)
def _pair_table_cached(key: bytes, rows: int, cols: int, n: int) -> np.ndarray:
    p = np.frombuffer(key, dtype=np.float64).reshape(rows, cols)
    d1 = _digits(rows**n, n, rows)
    d2 = _digits(cols**n, n, cols)
    table = np.zeros((rows**n, cols**n))
    for u in range(rows):
        a = (d1 == u).astype(np.float64)
        for v in range(cols):
            b = (d2 == v).astype(np.float64)
            counts = a @ b.T  # exact small integers
            if p[u, v] > 0:
                table += counts * math.log(p[u, v])
            else:
                table[counts > 0] = -np.inf
    table.setflags(write=False)
    return table


def pair_log_table(pmf: JointPmf, n: int) -> np.ndarray:
    """``log P(x1^n, x2^n)`` for every pair of sequence indices."""
    if pmf.rows**n * pmf.cols**n > MAX_PAIRS:
        raise BudgetExceeded("sequence-pair table exceeds the decoding cap")
    return _pair_table_cached(np.ascontiguousarray(pmf.p).tobytes(), pmf.rows, pmf.cols, n)


def _decode(table: np.ndarray, bin1: np.ndarray, bin2: np.ndarray, i1: int, i2: int, policy: str):
    c1 = np.flatnonzero(bin1 == i1)
    c2 = np.flatnonzero(bin2 == i2)
    if c1.size == 0 or c2.size == 0:
        if policy == "raise":
            raise EmptyBinPair(f"no sequence pair is mapped to bins ({i1}, {i2})")
        return 0, 0
    sub = table[np.ix_(c1, c2)]
    k = int(np.argmax(sub))
    r, c = divmod(k, c2.size)
    return int(c1[r]), int(c2[c])


def ml_decode(code: BinningCode, pmf: JointPmf, i1: int, i2: int, empty_policy: str = "raise") -> tuple[int, int]:
    """Most probable sequence pair in bins ``(i1, i2)``, as sequence indices.

    With ``empty_policy="first"`` an empty bin pair decodes to ``(0, 0)``, the
    lexicographically first pair, instead of raising.
    """
    if empty_policy not in ("raise", "first"):
        raise OutOfRange(f"unknown empty-bin policy {empty_policy!r}")
    table = pair_log_table(pmf, code.n)
    return _decode(table, code.bin1, code.bin2, i1, i2, empty_policy)


def sequence_index(symbols: np.ndarray, base: int) -> int:
    idx = 0
    for s in symbols:
        idx = idx * base + int(s)
    return idx


@dataclass(frozen=True)
class TrialReport:
    trials: int
    errors: int
    rate: float
    ci95: tuple[float, float]
    seed: int
    mode: str  # "per-trial" or "fixed"
    n: int
    M1: int
    M2: int
    seed_ledger: str = field(default="trial t uses default_rng([seed, t])")

    @property
    def ci_halfwidth(self) -> float:
        return 0.5 * (self.ci95[1] - self.ci95[0])

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "errors": self.errors,
            "rate": self.rate,
            "ci95": list(self.ci95),
            "seed": self.seed,
            "mode": self.mode,
            "n": self.n,
            "M1": self.M1,
            "M2": self.M2,
            "seed_ledger": self.seed_ledger,
        }


def wilson_interval(errors: int, trials: int) -> tuple[float, float]:
    ci = binomtest(errors, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def ensemble_error(
    pmf: JointPmf,
    n: int,
    M1: int,
    M2: int,
    trials: int,
    code_redraw: str = "per-trial",
    seed: int = 0,
    max_pairs: int = MAX_PAIRS,
) -> TrialReport:
    """Empirical error of random binning with ML decoding.

    ``code_redraw="per-trial"`` draws a fresh code for every trial and so
    estimates the ensemble average; ``"fixed"`` uses one code drawn from
    ``seed``.  The source pair of trial ``t`` (and its code, when redrawn)
    comes from ``default_rng([seed, t])``.
    """
    if not isinstance(trials, (int, np.integer)) or trials < 1:
        raise InvalidTrials(f"trials must be a positive integer, got {trials!r}")
    if code_redraw not in ("per-trial", "fixed"):
        raise OutOfRange(f"code_redraw must be 'per-trial' or 'fixed', got {code_redraw!r}")
    M1, M2 = int(M1), int(M2)
    rows, cols = pmf.rows, pmf.cols
    _check_sizes(n, rows, cols, M1, M2, max_pairs)
    table = pair_log_table(pmf, n)
    flat = pmf.p.ravel()
    pow1 = rows ** np.arange(n - 1, -1, -1)
    pow2 = cols ** np.arange(n - 1, -1, -1)
    fixed = draw_code(n, M1, M2, seed, rows, cols, max_pairs) if code_redraw == "fixed" else None
    errors = 0
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        cells = rng.choice(flat.size, size=n, p=flat)
        s1, s2 = np.divmod(cells, cols)
        x1 = int(s1 @ pow1)
        x2 = int(s2 @ pow2)
        if fixed is None:
            b1, b2 = _draw_bins(rng, n, rows, cols, M1, M2)
        else:
            b1, b2 = fixed.bin1, fixed.bin2
        # the true pair is always a candidate, so no bin pair is empty here
        d = _decode(table, b1, b2, int(b1[x1]), int(b2[x2]), "first")
        errors += d != (x1, x2)
    return TrialReport(trials, errors, errors / trials, wilson_interval(errors, trials), seed, code_redraw, n, M1, M2)
