"""Cylinder indicators as signed sums of "all ones on Y" functionals.

With ``H(x, Y) = 1`` iff ``x`` is 1 on every site of ``Y``,

    1_[U](x) = prod_{ones} H_z * prod_{zeros} (1 - H_z)
             = sum over subsets S of the zeros of (-1)^|S| H(x, ones + S),

so ``mu([U]) = sum alpha_i mu_hat(Y_i)`` for any provider of ``mu_hat``.
"""

from __future__ import annotations

import math
import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable

from .dual import MeasureEstimate, Method, Site, SiteSet
from .errors import ConfigurationError, ParseError, PreconditionError, ResourceError

ZERO_CAP = 24


@dataclass(frozen=True)
class Pattern:
    """A finite cylinder: prescribed bits on a finite support."""

    cells: tuple[tuple[Site, int], ...]
    dimension: int = 1

    def __post_init__(self):
        cells = tuple(sorted((tuple(int(c) for c in s), int(v)) for s, v in self.cells))
        sites = [s for s, _ in cells]
        if len(set(sites)) != len(sites):
            raise ConfigurationError("pattern positions must be distinct")
        if any(v not in (0, 1) for _, v in cells):
            raise ConfigurationError("pattern values must be 0 or 1")
        if any(len(s) != self.dimension for s in sites):
            raise ConfigurationError(f"pattern positions must have {self.dimension} coordinate(s)")
        if not cells:
            raise ConfigurationError("empty pattern")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_word(cls, word: str, base: int = 0) -> "Pattern":
        """One-dimensional word ``u_0 ... u_n`` placed at ``base``."""
        if not word or set(word) - {"0", "1"}:
            raise ConfigurationError(f"bad bit string {word!r}")
        return cls(tuple(((base + i,), int(b)) for i, b in enumerate(word)), 1)

    @classmethod
    def parse(cls, text: str, dimension: int = 1) -> "Pattern":
        """``100@0`` (d = 1, ``@BASE`` optional) or ``0:0=1,1:0=0`` (any d)."""
        text = text.strip()
        if dimension == 1:
            m = re.fullmatch(r"([01]+)(?:@(-?\d+))?", text)
            if m:
                return cls.from_word(m.group(1), int(m.group(2) or 0))
        cells = []
        for entry in filter(None, (e.strip() for e in text.split(","))):
            m = re.fullmatch(r"(-?\d+(?::-?\d+)*)=([01])", entry)
            if not m:
                raise ParseError(f"bad pattern entry {entry!r} in {text!r}")
            site = tuple(int(c) for c in m.group(1).split(":"))
            if len(site) != dimension:
                raise ParseError(f"pattern entry {entry!r} needs {dimension} coordinate(s)")
            cells.append((site, int(m.group(2))))
        if not cells:
            raise ParseError(f"bad pattern {text!r}")
        return cls(tuple(cells), dimension)

    @property
    def support(self) -> tuple[Site, ...]:
        return tuple(s for s, _ in self.cells)

    @property
    def ones(self) -> tuple[Site, ...]:
        return tuple(s for s, v in self.cells if v)

    @property
    def zeros(self) -> tuple[Site, ...]:
        return tuple(s for s, v in self.cells if not v)

    @property
    def extent(self) -> int:
        return len(self.cells)

    def translate(self, shift) -> "Pattern":
        if isinstance(shift, int):
            shift = (shift,) + (0,) * (self.dimension - 1)
        return Pattern(tuple((tuple(a + b for a, b in zip(s, shift)), v) for s, v in self.cells), self.dimension)

    def matches(self, ones: Callable[[Site], bool]) -> bool:
        return all(bool(ones(s)) == bool(v) for s, v in self.cells)

    def text(self) -> str:
        if self.dimension == 1:
            xs = [s[0] for s in self.support]
            if xs == list(range(xs[0], xs[0] + len(xs))):
                return "".join(str(v) for _, v in self.cells) + f"@{xs[0]}"
        return ",".join(":".join(map(str, s)) + f"={v}" for s, v in self.cells)

    def __str__(self):
        return self.text()


@dataclass(frozen=True)
class CylinderCombination:
    terms: tuple[tuple[int, SiteSet], ...]
    extent: int

    def evaluate(self, ones: Callable[[Site], bool]) -> int:
        """sum alpha_i H(x, Y_i) for the configuration ``x`` given as a predicate."""
        return sum(a for a, Y in self.terms if all(ones(z) for z in Y.sites))

    @property
    def dimension(self) -> int:
        return self.terms[0][1].dimension

    def abs_weight(self) -> int:
        return sum(abs(a) for a, _ in self.terms)


def decompose(pattern: Pattern) -> CylinderCombination:
    zeros = pattern.zeros
    if len(zeros) > ZERO_CAP:
        raise ResourceError(
            f"pattern has {len(zeros)} zeros; the expansion needs 2^{len(zeros)} terms (cap 2^{ZERO_CAP})"
        )
    ones = pattern.ones
    d = pattern.dimension
    terms = []
    for s in range(1 << len(zeros)):
        chosen = [zeros[k] for k in range(len(zeros)) if s >> k & 1]
        terms.append(((-1) ** len(chosen), SiteSet(ones + tuple(chosen), d)))
    return CylinderCombination(tuple(terms), pattern.extent)


def _merge(terms: Iterable[tuple[int, SiteSet]]) -> tuple[tuple[int, SiteSet], ...]:
    acc: dict[SiteSet, int] = defaultdict(int)
    for a, Y in terms:
        acc[Y] += a
    return tuple((a, Y) for Y, a in acc.items() if a)


def measure(comb: CylinderCombination, provider: Callable[[SiteSet], MeasureEstimate]) -> MeasureEstimate:
    """sum alpha_i mu_hat(Y_i), with error envelopes propagated.

    Sets equal up to translation are grouped first (mu_hat is shift
    invariant), so each group is one provider call; deterministic errors add
    with |coefficient|, statistical half-widths add in quadrature.
    """
    groups: dict[tuple, list] = {}
    for a, Y in comb.terms:
        g = groups.setdefault(Y.canonical(), [0, Y])
        g[0] += a
    value = det = var = 0.0
    methods = set()
    parts = []
    for c, Y in groups.values():
        if c == 0:
            continue
        est = provider(Y)
        methods.add(est.method)
        parts.append(c * est.value)
        det += abs(c) * est.det_error
        var += (c * est.stat_error) ** 2
    value = math.fsum(parts)
    for m in (Method.MONTE_CARLO, Method.EXACT, Method.CLOSED_FORM):
        if m in methods:
            method = m
            break
    else:
        method = Method.CLOSED_FORM
    return MeasureEstimate(value, det, math.sqrt(var), method)


def couple(combU: CylinderCombination, combV: CylinderCombination, t: int) -> CylinderCombination:
    """Combination for [U]_0 intersected with [V]_t (one-dimensional)."""
    if combU.dimension != 1 or combV.dimension != 1:
        raise ConfigurationError("coupling is defined for one-dimensional cylinders")
    need = combU.extent + combV.extent
    if t < need:
        raise PreconditionError(f"coupling needs t >= |U| + |V| = {need}, got t = {t}")
    terms = _merge((a * b, A | B.translate(t)) for a, A in combU.terms for b, B in combV.terms)
    return CylinderCombination(terms, need)
