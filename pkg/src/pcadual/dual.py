"""Dual branching chain and the hitting probabilities that give the invariant measure.

Each site ``z`` of the dual state independently branches into
``{z + j : j in J}`` with probability ``pi(J)``; the next state is the union.
The extended chain first jumps to an absorbing sink with probability
``1 - D^|Y|``.  ``mu_hat(Y)``, the invariant probability that every site of
``Y`` is 1, is the probability that the extended chain started at ``Y`` is
absorbed at the empty set.
"""

from __future__ import annotations

import bisect
import enum
import hashlib
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numba as nb
import numpy as np

from .errors import CertificationError, ConfigurationError, DegenerateModelError, ResourceError
from .model import EPS_NEG, Model, Neighborhood, check_class
from .rng import CounterStream, derive_key, nb_derive_key2, nb_uniform_at

PRUNE = 1e-15
STATE_BUDGET = 10**7
MAX_STEPS = 10**6
DEFAULT_TRUNCATION = 40

Site = tuple[int, ...]


# ---------------------------------------------------------------------------
# site sets


@dataclass(frozen=True)
class SiteSet:
    """Finite subset of Z^d, kept sorted and deduplicated."""

    sites: tuple[Site, ...]
    dimension: int = 1

    def __post_init__(self):
        sites = tuple(sorted(set(tuple(int(c) for c in s) for s in self.sites)))
        if any(len(s) != self.dimension for s in sites):
            raise ConfigurationError(f"sites must have {self.dimension} coordinate(s)")
        object.__setattr__(self, "sites", sites)

    @classmethod
    def of(cls, items: Iterable, dimension: int = 1) -> "SiteSet":
        """Build from ints (d = 1) or coordinate tuples."""
        return cls(tuple((x,) if isinstance(x, (int, np.integer)) else tuple(x) for x in items), dimension)

    def __len__(self):
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    def __bool__(self):
        return bool(self.sites)

    def __or__(self, other: "SiteSet") -> "SiteSet":
        return SiteSet(self.sites + other.sites, self.dimension)

    def issubset(self, other: "SiteSet") -> bool:
        return set(self.sites) <= set(other.sites)

    def translate(self, shift) -> "SiteSet":
        if isinstance(shift, (int, np.integer)):
            shift = (int(shift),) + (0,) * (self.dimension - 1)
        return SiteSet(tuple(tuple(a + b for a, b in zip(s, shift)) for s in self.sites), self.dimension)

    def canonical(self) -> tuple[Site, ...]:
        """Sites translated so the lexicographically first one is the origin."""
        if not self.sites:
            return ()
        o = self.sites[0]
        return tuple(tuple(a - b for a, b in zip(s, o)) for s in self.sites)

    def __repr__(self):
        if self.dimension == 1:
            return "SiteSet{" + ", ".join(str(s[0]) for s in self.sites) + "}"
        return f"SiteSet({list(self.sites)})"


class _Sink:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "SINK"


SINK = _Sink()
"""Extra absorbing state of the extended chain (failure)."""


# coordinate packing; lexicographic order of sites equals integer order of codes
def _stride(d: int) -> int:
    return {1: 0, 2: 1 << 31, 3: 1 << 21}.get(d, 0)


def encode_site(site: Sequence[int]) -> int:
    d = len(site)
    if d == 1:
        return int(site[0])
    s = _stride(d)
    if not s:
        raise ConfigurationError(f"site encoding supports d <= 3, got {d}")
    code = 0
    for c in site:
        if abs(c) >= s // 2:
            raise ConfigurationError(f"coordinate {c} out of range for d = {d}")
        code = code * s + int(c)
    return code


def decode_site(code: int, d: int) -> Site:
    if d == 1:
        return (int(code),)
    s = _stride(d)
    out = []
    for _ in range(d):
        c = (code + s // 2) % s - s // 2
        out.append(int(c))
        code = (code - c) // s
    return tuple(reversed(out))


# ---------------------------------------------------------------------------
# kernel


@dataclass(frozen=True)
class DualKernel:
    neighborhood: Neighborhood
    D: float
    lambda_empty: float
    pi: dict = field(repr=False)

    def __post_init__(self):
        masks = tuple(sorted(self.pi))
        probs = np.array([self.pi[m] for m in masks], dtype=np.float64)
        cum = np.cumsum(probs)
        cum /= cum[-1]
        cum[-1] = 1.0
        nb_ = self.neighborhood
        deltas = tuple(tuple(encode_site(o) for o in nb_.subset(m)) for m in masks)
        ptr = np.zeros(len(masks) + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([len(x) for x in deltas])
        flat = np.array([c for x in deltas for c in x], dtype=np.int64)
        object.__setattr__(self, "_masks", masks)
        object.__setattr__(self, "_probs", tuple(float(p) for p in probs))
        object.__setattr__(self, "_cum", cum)
        object.__setattr__(self, "_deltas", deltas)
        object.__setattr__(self, "_ptr", ptr)
        object.__setattr__(self, "_flat", flat)

    @property
    def dimension(self) -> int:
        return self.neighborhood.dimension

    @property
    def radius(self) -> int:
        return self.neighborhood.radius

    def choices(self) -> list[tuple[int, float]]:
        """(subset mask, probability) pairs with positive probability, mask order."""
        return list(zip(self._masks, self._probs))

    def draw(self, u: float) -> int:
        """Index into :meth:`choices` selected by a uniform ``u``."""
        return bisect.bisect_right(self._cum, u)


def dual_kernel(table: Model) -> DualKernel:
    """pi(J) = lambda(J) / D for a class-C table with 0 < D < 1."""
    report = check_class(table)
    if not report.is_class_C:
        raise CertificationError("transition table is not in class C", report)
    D = report.D
    if D >= 1.0:
        raise CertificationError(f"D = p(I_r) = {D!r} >= 1: ergodicity is not certified", report)
    if D <= 0.0:
        raise DegenerateModelError("D = 0: the invariant measure is delta_0; use closed_form_measure")
    lam = report.lambdas
    # clip rounding negatives (already certified >= -EPS_NEG)
    pi = {m: w / D for m, w in lam.weights.items() if w > 0.0}
    return DualKernel(lam.neighborhood, D, max(lam[0], 0.0), pi)


# ---------------------------------------------------------------------------
# single steps (reference implementation of the sampling contract)


def step_dual(state: SiteSet, kernel: DualKernel, rng: CounterStream) -> SiteSet:
    """One draw per site, in sorted site order; returns the union of branches."""
    out = []
    for z in state.sites:
        c = kernel.draw(rng.uniform())
        for off in kernel.neighborhood.subset(kernel._masks[c]):
            out.append(tuple(a + b for a, b in zip(z, off)))
    return SiteSet(tuple(out), state.dimension)


def step_extended(state, kernel: DualKernel, rng: CounterStream):
    """Sink draw first (failure w.p. 1 - D^|Y|), then :func:`step_dual`."""
    if state is SINK or not state:
        return state
    if rng.uniform() >= math.pow(kernel.D, len(state)):
        return SINK
    return step_dual(state, kernel, rng)


# ---------------------------------------------------------------------------
# estimates


class Method(str, enum.Enum):
    EXACT = "exact-truncated"
    MONTE_CARLO = "monte-carlo"
    CLOSED_FORM = "closed-form"


@dataclass(frozen=True)
class MeasureEstimate:
    """A value with a deterministic bound and a (3 sigma) statistical half-width."""

    value: float
    det_error: float = 0.0
    stat_error: float = 0.0
    method: Method = Method.EXACT
    replicas: int | None = None
    aborted: int = 0

    def __post_init__(self):
        if self.det_error < 0 or self.stat_error < 0:
            raise ValueError("error envelopes must be nonnegative")
        slack = self.det_error + self.stat_error + 1e-9
        if not (-slack <= self.value <= 1.0 + slack):
            raise ValueError(f"estimate {self.value!r} +/- {slack!r} does not meet [0, 1]")

    @property
    def error(self) -> float:
        return self.det_error + self.stat_error

    def as_dict(self) -> dict:
        d = {
            "value": self.value,
            "det_error": self.det_error,
            "stat_error": self.stat_error,
            "method": self.method.value,
        }
        if self.replicas is not None:
            d["replicas"] = self.replicas
            d["aborted"] = self.aborted
        return d


# ---------------------------------------------------------------------------
# exact truncated dynamic programming


def mu_hat_exact(
    Y: SiteSet,
    kernel: DualKernel,
    N: int = DEFAULT_TRUNCATION,
    *,
    budget: int = STATE_BUDGET,
    prune: float = PRUNE,
    engine: str = "auto",
) -> MeasureEstimate:
    """Probability of absorption at the empty set within ``N`` extended steps.

    The forward distribution over dual states is propagated exactly, modulo
    translation (absorption does not see absolute position).  States below
    ``prune`` are dropped and their mass is added to ``det_error``, which also
    carries the tail bound ``D^(N+1) / (1 - D)``.
    """
    if N < 0:
        raise ConfigurationError("truncation depth must be >= 0")
    if not Y:
        return MeasureEstimate(1.0, 0.0, 0.0, Method.EXACT)
    if engine == "auto":
        engine = "bitmask" if kernel.dimension == 1 else "generic"
    if engine == "bitmask":
        if kernel.dimension != 1:
            raise ConfigurationError("bitmask engine is one-dimensional")
        value, pruned = _dp_bitmask(Y, kernel, N, budget, prune)
    elif engine == "generic":
        value, pruned = _dp_generic(Y, kernel, N, budget, prune)
    else:
        raise ConfigurationError(f"unknown DP engine {engine!r}")
    D = kernel.D
    tail = D ** (N + 1) / (1.0 - D)
    return MeasureEstimate(min(max(value, 0.0), 1.0), tail + pruned, 0.0, Method.EXACT)


def _budget_error(budget: int) -> ResourceError:
    return ResourceError(
        f"exact DP exceeded the state budget of {budget} states; use the Monte Carlo estimator"
    )


def _p_empty(kernel: DualKernel) -> float:
    return kernel._probs[0] if kernel._masks and kernel._masks[0] == 0 else 0.0


def _dp_bitmask(Y: SiteSet, kernel: DualKernel, N: int, budget: int, prune: float):
    # states are Python ints, bit i = site min(Y) + i; choice masks are over
    # offsets -r..r so site bit i contributes (m << i) in a frame shifted by r
    xs = [s[0] for s in Y.sites]
    lo = xs[0]
    start = 0
    for x in xs:
        start |= 1 << (x - lo)
    choices = kernel.choices()
    D = kernel.D
    dist = {start: 1.0}
    absorbed = 0.0
    pruned = 0.0
    p0 = _p_empty(kernel)
    for step in range(N):
        if step == N - 1:
            # last step: only the direct jump to the empty set matters
            for state, w in dist.items():
                n = state.bit_count()
                absorbed += w * math.pow(D, n) * math.pow(p0, n)
            break
        nxt = defaultdict(float)
        for state, w in dist.items():
            w *= math.pow(D, state.bit_count())
            partial = {0: w}
            s, i = state, 0
            while s:
                if s & 1:
                    grown = defaultdict(float)
                    for pu, pw in partial.items():
                        for m, pr in choices:
                            grown[pu | (m << i)] += pw * pr
                    partial = {}
                    for k, v in grown.items():
                        if v < prune:
                            pruned += v
                        else:
                            partial[k] = v
                s >>= 1
                i += 1
            for u, v in partial.items():
                if u == 0:
                    absorbed += v
                else:
                    nxt[u >> ((u & -u).bit_length() - 1)] += v
        dist = {}
        for k, v in nxt.items():
            if v < prune:
                pruned += v
            else:
                dist[k] = v
        if len(dist) > budget:
            raise _budget_error(budget)
        if not dist:
            break
    return absorbed, pruned


def _dp_generic(Y: SiteSet, kernel: DualKernel, N: int, budget: int, prune: float):
    codes = sorted(encode_site(s) for s in Y.sites)
    start = tuple(c - codes[0] for c in codes)
    choices = [(kernel._deltas[k], p) for k, p in enumerate(kernel._probs)]
    D = kernel.D
    dist = {start: 1.0}
    absorbed = 0.0
    pruned = 0.0
    p0 = _p_empty(kernel)
    for step in range(N):
        if step == N - 1:
            for state, w in dist.items():
                n = len(state)
                absorbed += w * math.pow(D, n) * math.pow(p0, n)
            break
        nxt = defaultdict(float)
        for state, w in dist.items():
            partial = {frozenset(): w * math.pow(D, len(state))}
            for z in state:
                grown = defaultdict(float)
                for pu, pw in partial.items():
                    for deltas, pr in choices:
                        grown[pu.union([z + dz for dz in deltas])] += pw * pr
                partial = {}
                for k, v in grown.items():
                    if v < prune:
                        pruned += v
                    else:
                        partial[k] = v
            for u, v in partial.items():
                if not u:
                    absorbed += v
                else:
                    srt = sorted(u)
                    nxt[tuple(c - srt[0] for c in srt)] += v
        dist = {}
        for k, v in nxt.items():
            if v < prune:
                pruned += v
            else:
                dist[k] = v
        if len(dist) > budget:
            raise _budget_error(budget)
        if not dist:
            break
    return absorbed, pruned


# ---------------------------------------------------------------------------
# Monte Carlo


@nb.njit(cache=True, parallel=True)
def _mc_kernel(y0, D, cum, ptr, flat, base_key, replicas, max_steps, taus, outcomes):
    maxlen = 0
    for c in range(ptr.size - 1):
        maxlen = max(maxlen, ptr[c + 1] - ptr[c])
    for k in nb.prange(replicas):
        key = nb_derive_key2(base_key, k)
        state = y0.copy()
        ctr = 0
        t = 0
        outcome = -1
        while t < max_steps:
            n = state.size
            if n == 0:
                outcome = 1
                break
            u = nb_uniform_at(key, ctr)
            ctr += 1
            t += 1
            if u >= math.pow(D, np.float64(n)):
                outcome = 0
                break
            buf = np.empty(n * maxlen, dtype=np.int64)
            m = 0
            for s in range(n):
                u = nb_uniform_at(key, ctr)
                ctr += 1
                c = np.searchsorted(cum, u, side="right")
                for q in range(ptr[c], ptr[c + 1]):
                    buf[m] = state[s] + flat[q]
                    m += 1
            state = np.unique(buf[:m])
        if outcome == -1 and state.size == 0:
            outcome = 1
        taus[k] = t
        outcomes[k] = outcome


def _configure_threads():
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the default layer probes an old TBB and warns; results never depend on it
        nb.config.THREADING_LAYER = "workqueue"
    n = os.environ.get("PCADUAL_THREADS")
    if n:
        nb.set_num_threads(max(1, min(int(n), nb.config.NUMBA_NUM_THREADS)))


def absorption_runs(
    Y: SiteSet,
    kernel: DualKernel,
    replicas: int,
    seed: int,
    *,
    stream: int | None = None,
    max_steps: int = MAX_STEPS,
) -> tuple[np.ndarray, np.ndarray]:
    """Run independent extended chains; returns (tau, outcome) per replica.

    outcome is 1 for absorption at the empty set, 0 for the sink and -1 when
    the ``max_steps`` safety cap was hit.  Replica ``k`` reads stream
    ``(seed, k)`` (or ``(seed, stream, k)``), so results do not depend on the
    number of threads.
    """
    if replicas < 1:
        raise ConfigurationError("replicas must be >= 1")
    if kernel.dimension > 1 and kernel.radius * max_steps >= _stride(kernel.dimension) // 4:
        raise ConfigurationError("max_steps too large for the site encoding")
    _configure_threads()
    base = derive_key(seed) if stream is None else derive_key(seed, stream)
    y0 = np.array(sorted(encode_site(s) for s in Y.sites), dtype=np.int64)
    taus = np.empty(replicas, dtype=np.int64)
    outcomes = np.empty(replicas, dtype=np.int8)
    _mc_kernel(
        y0, float(kernel.D), kernel._cum, kernel._ptr, kernel._flat,
        np.uint64(base), replicas, max_steps, taus, outcomes,
    )
    return taus, outcomes


def run_replica(Y: SiteSet, kernel: DualKernel, seed: int, k: int, *, stream: int | None = None):
    """Pure-Python replay of replica ``k``; returns (tau, final state)."""
    rng = CounterStream(seed, k) if stream is None else CounterStream(seed, stream, k)
    state, t = Y, 0
    while state is not SINK and state:
        state = step_extended(state, kernel, rng)
        t += 1
    return t, state


def _half_width(v: float, n: int, z: float = 3.0) -> float:
    """z-sigma half-width around ``v`` that also covers the Wilson score interval.

    The plain binomial width vanishes at 0 or n hits; the Wilson interval does
    not, so rare events still get an honest error bar.
    """
    z2n = z * z / n
    centre = (v + z2n / 2) / (1 + z2n)
    spread = z * math.sqrt(v * (1 - v) / n + z2n / (4 * n)) / (1 + z2n)
    wald = z * math.sqrt(v * (1 - v) / n)
    return max(wald, centre + spread - v, v - (centre - spread))


def mu_hat_mc(
    Y: SiteSet,
    kernel: DualKernel,
    replicas: int,
    seed: int = 0,
    *,
    stream: int | None = None,
    max_steps: int = MAX_STEPS,
) -> MeasureEstimate:
    """Fraction of replicas absorbed at the empty set, with a 3 sigma half-width
    widened where needed to contain the Wilson score interval.

    Replicas that hit the step cap are excluded from the fraction and their
    share is charged to ``det_error``.
    """
    if not Y:
        return MeasureEstimate(1.0, 0.0, 0.0, Method.MONTE_CARLO, replicas=replicas)
    _, outcomes = absorption_runs(Y, kernel, replicas, seed, stream=stream, max_steps=max_steps)
    aborted = int(np.count_nonzero(outcomes < 0))
    done = replicas - aborted
    if done == 0:
        raise ResourceError("every Monte Carlo replica hit the step cap")
    v = int(np.count_nonzero(outcomes == 1)) / done
    stat = _half_width(v, done)
    return MeasureEstimate(v, aborted / replicas, stat, Method.MONTE_CARLO, replicas=replicas, aborted=aborted)


# ---------------------------------------------------------------------------
# degenerate cases


class PointMass(str, enum.Enum):
    DELTA0 = "delta0"
    DELTA1 = "delta1"


def closed_form_measure(table: Model) -> PointMass | None:
    """delta_0 when lambda(empty) = 0 (class C, D < 1); delta_1 when p == 1."""
    report = check_class(table)
    lam = report.lambdas
    if set(lam.weights) == {0} and lam[0] == 1.0:
        return PointMass.DELTA1
    if report.ergodic and abs(lam[0]) <= EPS_NEG:
        return PointMass.DELTA0
    return None


# ---------------------------------------------------------------------------
# providers: callables Y -> MeasureEstimate with a translation-invariant memo


class Provider:
    method: Method

    def __init__(self):
        self._memo: dict = {}

    def __call__(self, Y: SiteSet) -> MeasureEstimate:
        key = Y.canonical()
        est = self._memo.get(key)
        if est is None:
            est = self._memo[key] = self._evaluate(Y)
        return est

    def _evaluate(self, Y: SiteSet) -> MeasureEstimate:
        raise NotImplementedError


class ExactProvider(Provider):
    method = Method.EXACT

    def __init__(self, kernel: DualKernel, N: int = DEFAULT_TRUNCATION, budget: int = STATE_BUDGET):
        super().__init__()
        self.kernel, self.N, self.budget = kernel, N, budget

    def _evaluate(self, Y):
        return mu_hat_exact(Y, self.kernel, self.N, budget=self.budget)


def stream_id(Y: SiteSet) -> int:
    """Stable 63-bit id of Y up to translation; keys the Monte Carlo stream."""
    h = hashlib.blake2b(repr(Y.canonical()).encode(), digest_size=8).digest()
    return int.from_bytes(h, "little") >> 1


class MonteCarloProvider(Provider):
    """Each distinct Y (up to translation) gets its own stream (seed, id(Y), k)."""

    method = Method.MONTE_CARLO

    def __init__(self, kernel: DualKernel, replicas: int, seed: int = 0):
        super().__init__()
        self.kernel, self.replicas, self.seed = kernel, replicas, seed

    def _evaluate(self, Y):
        return mu_hat_mc(Y, self.kernel, self.replicas, self.seed, stream=stream_id(Y))


class AutoProvider(Provider):
    """Exact DP while it fits the budget, Monte Carlo otherwise."""

    def __init__(self, kernel, N=DEFAULT_TRUNCATION, replicas=10**5, seed=0, budget=STATE_BUDGET):
        super().__init__()
        self.exact = ExactProvider(kernel, N, budget)
        self.mc = MonteCarloProvider(kernel, replicas, seed)

    def _evaluate(self, Y):
        try:
            return self.exact(Y)
        except ResourceError:
            return self.mc(Y)


class ClosedFormProvider(Provider):
    method = Method.CLOSED_FORM

    def __init__(self, kind: PointMass):
        super().__init__()
        self.kind = kind

    def _evaluate(self, Y):
        v = 1.0 if (self.kind is PointMass.DELTA1 or not Y) else 0.0
        return MeasureEstimate(v, 0.0, 0.0, Method.CLOSED_FORM)
