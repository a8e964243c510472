"""Finite-alphabet correlated source pairs and their information statistics.

A :class:`JointPmf` stores ``P[x1, x2]`` with rows indexed by the first
source symbol and columns by the second.  :func:`compute_stats` returns the
conditional/joint entropies together with the 3x3 dispersion matrix, the
covariance of the centred self-information triple

    z1 = -log P(x1|x2) - H(X1|X2)
    z2 = -log P(x2|x1) - H(X2|X1)
    z3 = -log P(x1,x2) - H(X1X2)

All internal quantities are in nats.  Use :meth:`SourceStats.in_units` for a
base-2 view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyMixture,
    NegativeEntry,
    SumNotOne,
    WeightSumNotOne,
    ZeroMarginal,
)

LN2 = math.log(2.0)
INPUT_SUM_TOL = 1e-9
WEIGHT_SUM_TOL = 1e-12
PD_EIG_TOL = 1e-10

UNIT_SCALE = {"nats": 1.0, "bits": 1.0 / LN2}
UNIT_DIVISOR = {"nats": 1.0, "bits": LN2}


@dataclass(frozen=True, eq=False)
class JointPmf:
    """Joint probability table of a correlated pair ``(X1, X2)``."""

    p: np.ndarray

    @property
    def rows(self) -> int:
        return self.p.shape[0]

    @property
    def cols(self) -> int:
        return self.p.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.p.shape

    @property
    def marginal1(self) -> np.ndarray:
        return self.p.sum(axis=1)

    @property
    def marginal2(self) -> np.ndarray:
        return self.p.sum(axis=0)

    @property
    def cond1_given2(self) -> np.ndarray:
        """``P(x1|x2)`` as a table shaped like :attr:`p`."""
        return self.p / self.marginal2[None, :]

    @property
    def cond2_given1(self) -> np.ndarray:
        return self.p / self.marginal1[:, None]

    @property
    def support(self) -> np.ndarray:
        return self.p > 0

    def self_information(self) -> np.ndarray:
        """Per-cell self-information ``(-log P(x1|x2), -log P(x2|x1), -log P(x1,x2))``.

        Returns an array of shape ``(3, rows, cols)`` in nats.  Cells outside
        the support hold 0; they carry zero weight everywhere they are used.
        """
        out = np.zeros((3,) + self.p.shape)
        s = self.support
        out[0][s] = -np.log(self.cond1_given2[s])
        out[1][s] = -np.log(self.cond2_given1[s])
        out[2][s] = -np.log(self.p[s])
        return out

    def transpose(self) -> "JointPmf":
        """Swap the roles of the two sources."""
        return JointPmf(np.ascontiguousarray(self.p.T))

    def to_json(self) -> dict:
        return {"p": self.p.tolist()}


def make_joint_pmf(matrix: Sequence[Sequence[float]] | np.ndarray) -> JointPmf:
    """Validate a probability matrix and wrap it as a :class:`JointPmf`.

    Rows index the first source, columns the second.  A total within
    ``1e-9`` of one is accepted and rescaled exactly onto the simplex; anything
    further off is refused rather than silently renormalised.
    """
    arr = np.array(matrix, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 2:
        raise DimensionMismatch(
            f"joint pmf must be a 2-D table with at least 2 rows and 2 columns, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise NegativeEntry("joint pmf entries must be finite")
    if np.any(arr < 0):
        r, c = np.argwhere(arr < 0)[0]
        raise NegativeEntry(f"negative probability {arr[r, c]!r} at ({r}, {c})")
    total = math.fsum(arr.ravel())
    if abs(total - 1.0) > INPUT_SUM_TOL:
        raise SumNotOne(f"entries sum to {total!r}, not 1 (tolerance {INPUT_SUM_TOL})")
    arr = arr / total
    if np.any(arr.sum(axis=1) == 0):
        raise ZeroMarginal(f"row(s) {np.flatnonzero(arr.sum(axis=1) == 0).tolist()} have zero mass")
    if np.any(arr.sum(axis=0) == 0):
        raise ZeroMarginal(f"column(s) {np.flatnonzero(arr.sum(axis=0) == 0).tolist()} have zero mass")
    arr.setflags(write=False)
    return JointPmf(arr)


def binary_example_pmf() -> JointPmf:
    """Binary pair with P(0,0)=0.5, P(0,1)=0.25, P(1,0)=0.15, P(1,1)=0.1.

    H(X1|X2)=0.809, H(X2)=0.934 and H(X1X2)=1.743 bits; the dispersion
    entries for coordinates 1 and 3 are 0.475, 0.492 and 0.690 bits^2.
    """
    return make_joint_pmf([[0.5, 0.25], [0.15, 0.1]])


@dataclass(frozen=True, eq=False)
class SourceStats:
    """Entropies and dispersion matrix of one source pair.

    ``units`` is ``"nats"`` or ``"bits"``; entropies scale by the unit factor
    and ``sigma`` by its square.  ``positive_definite`` and
    ``min_eigenvalue_nats`` always refer to the nat-scaled matrix.
    """

    h1_given_2: float
    h2_given_1: float
    h12: float
    h1: float
    h2: float
    mutual_info: float
    sigma: np.ndarray
    positive_definite: bool
    min_eigenvalue_nats: float
    units: str = "nats"
    z: np.ndarray | None = field(default=None, repr=False)

    @property
    def entropy_vector(self) -> np.ndarray:
        """``(H(X1|X2), H(X2|X1), H(X1X2))``."""
        return np.array([self.h1_given_2, self.h2_given_1, self.h12])

    def std(self, i: int) -> float:
        """Standard deviation of coordinate ``i`` (1-based)."""
        return math.sqrt(self.sigma[i - 1, i - 1])

    def in_units(self, units: str) -> "SourceStats":
        if units not in UNIT_SCALE:
            raise ValueError(f"unknown units {units!r}")
        if units == self.units:
            return self
        # x_bits = x_nats / ln 2 exactly, and sigma by ln(2)^2
        old, new = UNIT_DIVISOR[self.units], UNIT_DIVISOR[units]
        sigma = self.sigma * (old * old) / (new * new)
        sigma.setflags(write=False)
        z = None
        if self.z is not None:
            z = self.z * old / new
            z.setflags(write=False)

        def conv(x):
            return x * old / new

        return replace(
            self,
            h1_given_2=conv(self.h1_given_2),
            h2_given_1=conv(self.h2_given_1),
            h12=conv(self.h12),
            h1=conv(self.h1),
            h2=conv(self.h2),
            mutual_info=conv(self.mutual_info),
            sigma=sigma,
            units=units,
            z=z,
        )

    def to_dict(self) -> dict:
        return {
            "units": self.units,
            "H(X1|X2)": self.h1_given_2,
            "H(X2|X1)": self.h2_given_1,
            "H(X1X2)": self.h12,
            "H(X1)": self.h1,
            "H(X2)": self.h2,
            "I(X1;X2)": self.mutual_info,
            "sigma": self.sigma.tolist(),
            "positive_definite": self.positive_definite,
            "min_eigenvalue_nats2": self.min_eigenvalue_nats,
        }


def _expect(p: np.ndarray, values: np.ndarray) -> float:
    return math.fsum((p * values).ravel())


def compute_stats(pmf: JointPmf) -> SourceStats:
    """Entropies (nats) and dispersion matrix (nats^2) of ``pmf``."""
    p = pmf.p
    info = pmf.self_information()
    h1g2, h2g1, h12 = (_expect(p, info[i]) for i in range(3))
    m1, m2 = pmf.marginal1, pmf.marginal2
    h1 = -math.fsum(m1[m1 > 0] * np.log(m1[m1 > 0]))
    h2 = -math.fsum(m2[m2 > 0] * np.log(m2[m2 > 0]))

    s = pmf.support
    z = np.zeros_like(info)
    for i, h in enumerate((h1g2, h2g1, h12)):
        z[i][s] = info[i][s] - h
    sigma = np.empty((3, 3))
    for i in range(3):
        for j in range(i, 3):
            sigma[i, j] = sigma[j, i] = _expect(p, z[i] * z[j])
    min_eig = float(np.linalg.eigvalsh(sigma)[0])
    sigma.setflags(write=False)
    z.setflags(write=False)
    # I = H(X1X2) - H(X1|X2) - H(X2|X1); clip tiny negative rounding
    mi = max(0.0, h12 - h1g2 - h2g1)
    return SourceStats(
        h1_given_2=h1g2,
        h2_given_1=h2g1,
        h12=h12,
        h1=h1,
        h2=h2,
        mutual_info=mi,
        sigma=sigma,
        positive_definite=min_eig > PD_EIG_TOL,
        min_eigenvalue_nats=min_eig,
        z=z,
    )


@dataclass(frozen=True, eq=False)
class MixedSource:
    """Finite mixture of i.i.d. source pairs sharing one alphabet shape."""

    components: tuple[tuple[float, JointPmf], ...]

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])

    @property
    def pmfs(self) -> list[JointPmf]:
        return [pmf for _, pmf in self.components]

    def __len__(self) -> int:
        return len(self.components)

    def to_json(self) -> dict:
        return {"components": [{"w": w, "p": pmf.p.tolist()} for w, pmf in self.components]}


def make_mixed(components: Iterable[tuple[float, JointPmf]]) -> MixedSource:
    comps = [(float(w), pmf) for w, pmf in components]
    if not comps:
        raise EmptyMixture("a mixture needs at least one component")
    for w, _ in comps:
        if not (w > 0) or not math.isfinite(w):
            raise WeightSumNotOne(f"component weights must be positive and finite, got {w!r}")
    total = math.fsum(w for w, _ in comps)
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise WeightSumNotOne(f"weights sum to {total!r}, not 1")
    shape = comps[0][1].shape
    for k, (_, pmf) in enumerate(comps):
        if pmf.shape != shape:
            raise DimensionMismatch(f"component {k} has shape {pmf.shape}, expected {shape}")
    return MixedSource(tuple(comps))
