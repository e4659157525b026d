"""Forward simulation of the PCA on a periodic box, for cross-checking the dual.

The update is synchronous: site ``z`` becomes 1 with probability ``p(J_z)``
where ``J_z`` collects the offsets ``j`` with ``eta(z + j) = 1`` (indices wrap).
Randomness comes from a Philox generator keyed by the seed, one uniform per
site per step in C order, so runs are bit-for-bit reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cylinder import Pattern
from .errors import ConfigurationError
from .model import LambdaTable, Model, Neighborhood, TransitionTable, DENSE_CAP

N_BATCHES = 20


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & ((1 << 64) - 1)))


@dataclass(frozen=True, eq=False)
class Torus:
    dimension: int
    L: int
    bits: np.ndarray

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ConfigurationError("the lattice simulator supports d = 1 and d = 2")
        b = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if b.shape != (self.L,) * self.dimension:
            raise ConfigurationError(f"configuration shape {b.shape} does not match L = {self.L}, d = {self.dimension}")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @classmethod
    def zeros(cls, dimension: int, L: int) -> "Torus":
        return cls(dimension, L, np.zeros((L,) * dimension, dtype=np.uint8))

    @classmethod
    def ones(cls, dimension: int, L: int) -> "Torus":
        return cls(dimension, L, np.ones((L,) * dimension, dtype=np.uint8))

    @classmethod
    def random(cls, dimension: int, L: int, rng: np.random.Generator, density: float = 0.5) -> "Torus":
        return cls(dimension, L, (rng.random((L,) * dimension) < density).astype(np.uint8))

    def packed(self) -> bytes:
        """One bit per site, rows padded to whole bytes (the PBM P4 layout)."""
        return np.packbits(self.bits.reshape(-1, self.L), axis=1).tobytes()

    def density(self) -> float:
        return float(np.count_nonzero(self.bits)) / self.bits.size


class _Rule:
    """Vectorized p(J_z) lookup for a dense or sparse table."""

    def __init__(self, table: Model):
        nb = table.neighborhood
        if isinstance(table, LambdaTable) and nb.size <= DENSE_CAP:
            table = table.to_table()
        self.neighborhood: Neighborhood = nb
        self.table = table
        self.dtype = np.uint32 if nb.size <= 31 else np.uint64
        if isinstance(table, LambdaTable):
            self.terms = [(self.dtype(m), w) for m, w in table.weights.items()]

    def masks(self, bits: np.ndarray) -> np.ndarray:
        nb = self.neighborhood
        axes = tuple(range(bits.ndim))
        idx = np.zeros(bits.shape, dtype=self.dtype)
        for k, off in enumerate(nb.offsets):
            idx |= np.roll(bits, tuple(-o for o in off), axis=axes).astype(self.dtype) << self.dtype(k)
        return idx

    def probabilities(self, bits: np.ndarray) -> np.ndarray:
        idx = self.masks(bits)
        if isinstance(self.table, TransitionTable):
            return self.table.p[idx]
        p = np.zeros(bits.shape)
        for m, w in self.terms:
            p += w * ((idx & m) == m)
        return np.clip(p, 0.0, 1.0)


def step_pca(torus: Torus, table: Model, rng: np.random.Generator) -> Torus:
    if table.neighborhood.dimension != torus.dimension:
        raise ConfigurationError("table and torus dimensions differ")
    rule = _Rule(table)
    u = rng.random(torus.bits.shape)
    return Torus(torus.dimension, torus.L, (u < rule.probabilities(torus.bits)).astype(np.uint8))


def pattern_frequency(bits: np.ndarray, pattern: Pattern) -> float:
    """Fraction of translates of ``pattern`` matched by the configuration."""
    axes = tuple(range(bits.ndim))
    hit = np.ones(bits.shape, dtype=bool)
    for site, v in pattern.cells:
        hit &= np.roll(bits, tuple(-c for c in site), axis=axes) == v
    return np.count_nonzero(hit) / hit.size


def pattern_span(pattern: Pattern) -> int:
    sup = np.array(pattern.support)
    return int((sup.max(axis=0) - sup.min(axis=0)).max()) + 1


def default_burn_in(D: float) -> int:
    """ceil(10 / ln(1/D)), the scale on which D^t falls by e^-10."""
    if D >= 1.0:
        raise ConfigurationError("D >= 1: no default burn-in, pass one explicitly")
    if D <= 0.0:
        return 1
    return max(1, math.ceil(10.0 / math.log(1.0 / D)))


@dataclass(frozen=True)
class FrequencyEstimate:
    """Space-time average of a pattern indicator.

    ``stat_error`` is the one-sigma batch-means standard error.
    """

    value: float
    stat_error: float
    burn_in: int
    samples: int
    thin: int
    L: int
    batches: int = N_BATCHES

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "stat_error": self.stat_error,
            "burn_in": self.burn_in,
            "samples": self.samples,
            "thin": self.thin,
            "L": self.L,
            "batches": self.batches,
        }


def write_pbm(path, rows: np.ndarray) -> None:
    """Binary PBM (P4); a 1 bit is drawn black."""
    rows = np.asarray(rows, dtype=np.uint8)
    if rows.ndim == 1:
        rows = rows[None, :]
    h, w = rows.shape
    with open(Path(path), "wb") as fh:
        fh.write(f"P4\n{w} {h}\n".encode("ascii"))
        fh.write(np.packbits(rows, axis=1).tobytes())


def estimate_frequency(
    table: Model,
    pattern: Pattern,
    L: int,
    burn_in: int | None = None,
    samples: int = 2000,
    thin: int = 1,
    seed: int = 0,
    *,
    dump_pbm=None,
    batches: int = N_BATCHES,
) -> FrequencyEstimate:
    """Frequency of ``pattern`` after ``burn_in`` steps, measured every ``thin``
    of the following ``samples`` steps, with batch-means error bars.

    The initial configuration is i.i.d. Bernoulli(1/2) drawn from the same
    stream.  ``dump_pbm`` writes the sampled rows (d = 1) or the last sampled
    configuration (d = 2).
    """
    nb = table.neighborhood
    d = nb.dimension
    if pattern.dimension != d:
        raise ConfigurationError("pattern and model dimensions differ")
    need = 4 * nb.radius + pattern_span(pattern)
    if L < need:
        raise ConfigurationError(f"torus side L = {L} is too small; need L >= 4r + extent = {need}")
    if thin < 1:
        raise ConfigurationError("thin must be >= 1")
    if samples < batches * thin:
        raise ConfigurationError(f"samples must be >= {batches} * thin = {batches * thin}")
    if burn_in is None:
        burn_in = default_burn_in(table.D)
    if burn_in < 0:
        raise ConfigurationError("burn_in must be >= 0")

    rule = _Rule(table)
    rng = make_rng(seed)
    bits = (rng.random((L,) * d) < 0.5).astype(np.uint8)
    shape = bits.shape

    def advance(b):
        return (rng.random(shape) < rule.probabilities(b)).astype(np.uint8)

    for _ in range(burn_in):
        bits = advance(bits)
    series = []
    raster = [] if dump_pbm is not None and d == 1 else None
    for step in range(1, samples + 1):
        bits = advance(bits)
        if step % thin == 0:
            series.append(pattern_frequency(bits, pattern))
            if raster is not None:
                raster.append(bits)
    if dump_pbm is not None:
        write_pbm(dump_pbm, np.array(raster) if raster is not None else bits)

    x = np.asarray(series)
    size = len(x) // batches
    # the leading remainder is discarded, as extra burn-in
    used = x[len(x) - size * batches:]
    means = used.reshape(batches, size).mean(axis=1)
    se = float(np.std(means, ddof=1) / math.sqrt(batches))
    return FrequencyEstimate(float(used.mean()), se, burn_in, len(used), thin, L, batches)
