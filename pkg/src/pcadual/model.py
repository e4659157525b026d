"""Neighborhoods, transition tables and the class-C certificate.

A two-state PCA of radius ``r`` in dimension ``d`` is given by the numbers
``p(J)``, the probability that a site becomes 1 when exactly the neighbors at
offsets ``J`` (a subset of the cube ``{-r..r}^d``) are 1.  Subsets are encoded
as bitmasks over the lexicographically ordered offsets, so bit ``k`` stands for
``Neighborhood.offsets[k]``.

The Moebius inverse ``lambda(J) = sum_{J' <= J} (-1)^{|J \\ J'|} p(J')`` is the
central object: the table is in class C when every ``lambda(J)`` lies in
``[0, 1)``, and the dual kernel is ``pi(J) = lambda(J) / p(I_r)``.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import ConfigurationError

EPS_NEG = 1e-12
DENSE_CAP = 20
SPARSE_CAP = 63

Offset = tuple[int, ...]


@dataclass(frozen=True)
class Neighborhood:
    radius: int
    dimension: int
    offsets: tuple[Offset, ...]

    @property
    def size(self) -> int:
        return len(self.offsets)

    @property
    def full_mask(self) -> int:
        return (1 << self.size) - 1

    def index(self, offset: Sequence[int]) -> int:
        return self._index[tuple(offset)]

    def mask(self, offsets: Iterable[Sequence[int]]) -> int:
        m = 0
        for off in offsets:
            try:
                m |= 1 << self._index[tuple(off)]
            except KeyError:
                raise ConfigurationError(f"offset {tuple(off)} is outside I_{self.radius}") from None
        return m

    def subset(self, mask: int) -> tuple[Offset, ...]:
        return tuple(self.offsets[k] for k in range(self.size) if mask >> k & 1)

    @property
    def _index(self) -> dict[Offset, int]:
        # cached lazily; the dataclass is frozen so bypass __setattr__
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {off: k for k, off in enumerate(self.offsets)}
            object.__setattr__(self, "_idx", idx)
        return idx


def build_neighborhood(r: int, d: int, *, dense: bool = True) -> Neighborhood:
    """Cube of offsets ``{-r..r}^d`` in lexicographic order.

    ``dense=True`` enforces the dense-table cap ``(2r+1)^d <= 20``; sparse
    lambda workflows may go up to 63 offsets (one machine word of mask bits).
    """
    if int(r) != r or r < 1:
        raise ConfigurationError(f"radius must be a positive integer, got {r!r}")
    if int(d) != d or d < 1:
        raise ConfigurationError(f"dimension must be a positive integer, got {d!r}")
    r, d = int(r), int(d)
    n = (2 * r + 1) ** d
    cap = DENSE_CAP if dense else SPARSE_CAP
    if n > cap:
        kind = "dense-table" if dense else "sparse-lambda"
        raise ConfigurationError(
            f"neighborhood of radius {r} in dimension {d} has {n} offsets; "
            f"the {kind} cap is (2r+1)^d <= {cap}"
        )
    offsets = tuple(itertools.product(range(-r, r + 1), repeat=d))
    return Neighborhood(r, d, offsets)


# ---------------------------------------------------------------------------
# subset-lattice transforms


def mobius_transform(values: np.ndarray) -> np.ndarray:
    """Fast Moebius transform over the subset lattice, O(n 2^n)."""
    a = np.array(values, dtype=np.float64, copy=True)
    n = int(a.size).bit_length() - 1
    if a.size != 1 << n:
        raise ValueError("length must be a power of two")
    for k in range(n):
        v = a.reshape(-1, 2, 1 << k)
        v[:, 1, :] -= v[:, 0, :]
    return a


def zeta_transform(values: np.ndarray) -> np.ndarray:
    """Subset-sum transform, inverse of :func:`mobius_transform`."""
    a = np.array(values, dtype=np.float64, copy=True)
    n = int(a.size).bit_length() - 1
    if a.size != 1 << n:
        raise ValueError("length must be a power of two")
    for k in range(n):
        v = a.reshape(-1, 2, 1 << k)
        v[:, 1, :] += v[:, 0, :]
    return a


# ---------------------------------------------------------------------------
# tables


@dataclass(frozen=True, eq=False)
class TransitionTable:
    """Dense table ``p[mask]`` for every subset of the neighborhood."""

    neighborhood: Neighborhood
    p: np.ndarray

    def __post_init__(self):
        nb = self.neighborhood
        if nb.size > DENSE_CAP:
            raise ConfigurationError(
                f"dense tables are capped at (2r+1)^d <= {DENSE_CAP} offsets, got {nb.size}"
            )
        p = np.array(self.p, dtype=np.float64)
        if p.shape != (1 << nb.size,):
            raise ConfigurationError(f"expected {1 << nb.size} probabilities, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0:
            bad = int(np.flatnonzero(~((p >= 0.0) & (p <= 1.0)))[0])
            raise ConfigurationError(
                f"p({format_subset(nb, bad)!r}) = {p[bad]!r} is not a probability"
            )
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    def __eq__(self, other):
        if not isinstance(other, TransitionTable):
            return NotImplemented
        return self.neighborhood == other.neighborhood and np.array_equal(self.p, other.p)

    __hash__ = None

    @property
    def radius(self) -> int:
        return self.neighborhood.radius

    @property
    def dimension(self) -> int:
        return self.neighborhood.dimension

    @property
    def D(self) -> float:
        return float(self.p[-1])

    def prob(self, offsets: Iterable[Sequence[int]]) -> float:
        return float(self.p[self.neighborhood.mask(offsets)])


@dataclass(frozen=True)
class LambdaTable:
    """Sparse Moebius coefficients; missing subsets have weight zero."""

    neighborhood: Neighborhood
    weights: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        full = self.neighborhood.full_mask
        clean = {}
        for mask, w in sorted(self.weights.items()):
            if not 0 <= mask <= full:
                raise ConfigurationError(f"subset mask {mask} outside the neighborhood")
            w = float(w)
            if not math.isfinite(w):
                raise ConfigurationError(f"lambda({format_subset(self.neighborhood, mask)!r}) is not finite")
            if w != 0.0:
                clean[mask] = w
        object.__setattr__(self, "weights", clean)

    @property
    def radius(self) -> int:
        return self.neighborhood.radius

    @property
    def dimension(self) -> int:
        return self.neighborhood.dimension

    @property
    def D(self) -> float:
        return math.fsum(self.weights.values())

    def __getitem__(self, mask: int) -> float:
        return self.weights.get(mask, 0.0)

    def p_of(self, mask: int) -> float:
        """p(J) = sum of lambda(J') over J' contained in J."""
        return math.fsum(w for m, w in self.weights.items() if m & mask == m)

    def dense(self) -> np.ndarray:
        nb = self.neighborhood
        if nb.size > DENSE_CAP:
            raise ConfigurationError(f"cannot densify {nb.size} offsets (cap {DENSE_CAP})")
        a = np.zeros(1 << nb.size)
        for m, w in self.weights.items():
            a[m] = w
        return a

    def to_table(self) -> TransitionTable:
        p = zeta_transform(self.dense())
        if p.min() < -1e-9 or p.max() > 1.0 + 1e-9:
            bad = int(np.argmin(p) if p.min() < -1e-9 else np.argmax(p))
            raise ConfigurationError(
                f"lambda weights give p({format_subset(self.neighborhood, bad)!r}) = {p[bad]!r}, not a probability"
            )
        # only rounding overshoot is left to clip
        return TransitionTable(self.neighborhood, np.clip(p, 0.0, 1.0))


Model = Union[TransitionTable, LambdaTable]


def mobius_lambda(table: Model) -> LambdaTable:
    """Moebius coefficients of ``table`` (identity for a LambdaTable)."""
    if isinstance(table, LambdaTable):
        return table
    lam = mobius_transform(table.p)
    nz = np.flatnonzero(lam)
    return LambdaTable(table.neighborhood, {int(m): float(lam[m]) for m in nz})


# ---------------------------------------------------------------------------
# parametric families


def constant_table(c: float, r: int = 1, d: int = 1) -> TransitionTable:
    nb = build_neighborhood(r, d)
    return TransitionTable(nb, np.full(1 << nb.size, float(c)))


def domany_kinzel(a0: float, a1: float, a2: float) -> TransitionTable:
    """Radius-1 one-dimensional Domany-Kinzel table; the center site is ignored."""
    nb = build_neighborhood(1, 1)
    left, right = 1 << nb.index((-1,)), 1 << nb.index((1,))
    p = np.empty(8)
    for mask in range(8):
        k = bool(mask & left) + bool(mask & right)
        p[mask] = (a0, a1, a2)[k]
    return TransitionTable(nb, p)


def binomial2d(alpha: float) -> TransitionTable:
    """Two-dimensional radius-1 table with p(J) = alpha * 2^|J|."""
    nb = build_neighborhood(1, 2)
    sizes = np.array([bin(m).count("1") for m in range(1 << nb.size)])
    return TransitionTable(nb, float(alpha) * np.exp2(sizes))


# ---------------------------------------------------------------------------
# certification


@dataclass(frozen=True)
class ClassReport:
    is_class_C: bool
    violations: tuple[tuple[int, float], ...]
    D: float
    ergodic: bool
    gamma: float
    lambdas: LambdaTable

    @property
    def neighborhood(self) -> Neighborhood:
        return self.lambdas.neighborhood


def check_class(table: Model) -> ClassReport:
    """Certify class C: every Moebius coefficient in ``[-1e-12, 1)``.

    Coefficients at or above ``1 - 1e-12`` are treated as equal to 1 and
    rejected; both kinds of failure are listed in ``violations``.
    """
    lam = mobius_lambda(table)
    violations = tuple(
        (m, w) for m, w in lam.weights.items() if w < -EPS_NEG or w >= 1.0 - EPS_NEG
    )
    is_c = not violations
    D = table.D
    gamma = dobrushin_gamma(table)
    return ClassReport(is_c, violations, D, is_c and D < 1.0, gamma, lam)


def dobrushin_gamma(table: Model) -> float:
    """sum over offsets j of sup_J |p(J + j) - p(J)|, by full subset scan.

    For a sparse LambdaTable with nonnegative weights the supremum is attained
    at J = I_r \\ {j}, which gives sum_J lambda(J) |J|; other sparse tables are
    refused.
    """
    nb = table.neighborhood
    if isinstance(table, LambdaTable):
        if nb.size <= DENSE_CAP:
            table = table.to_table()
        elif all(w >= -EPS_NEG for w in table.weights.values()):
            return math.fsum(w * bin(m).count("1") for m, w in table.weights.items())
        else:
            raise ConfigurationError("Dobrushin coefficient of a non-monotone sparse table needs a dense table")
    p = table.p
    total = 0.0
    for k in range(nb.size):
        v = p.reshape(-1, 2, 1 << k)
        total += float(np.max(np.abs(v[:, 1, :] - v[:, 0, :])))
    return total


def gamma_from_lambda(lam: LambdaTable) -> float:
    return math.fsum(w * bin(m).count("1") for m, w in lam.weights.items() if m)


# ---------------------------------------------------------------------------
# subset keys  ("-1;1" in d=1, "-1:0;0:1" in d=2, "" for the empty set)


def format_subset(nb: Neighborhood, mask: int) -> str:
    return ";".join(":".join(str(c) for c in off) for off in nb.subset(mask))


def parse_subset(nb: Neighborhood, key: str) -> int:
    """Inverse of :func:`format_subset`; offsets must be strictly sorted."""
    if key == "":
        return 0
    offsets = []
    for part in key.split(";"):
        coords = part.split(":")
        if len(coords) != nb.dimension:
            raise ConfigurationError(f"subset key {key!r}: offset {part!r} needs {nb.dimension} coordinate(s)")
        if not all(re.fullmatch(r"-?(0|[1-9][0-9]*)", c) and c != "-0" for c in coords):
            raise ConfigurationError(f"subset key {key!r}: bad coordinate in {part!r}")
        offsets.append(tuple(int(c) for c in coords))
    if any(a >= b for a, b in zip(offsets, offsets[1:])):
        raise ConfigurationError(f"subset key {key!r}: offsets must be strictly sorted lexicographically")
    return nb.mask(offsets)
