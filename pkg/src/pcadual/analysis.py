"""Decay-of-correlation constants, correlation curves and the Dobrushin comparison."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from typing import Callable

from .cylinder import CylinderCombination, Pattern, couple, decompose, measure
from .dual import (
    DEFAULT_TRUNCATION,
    ClosedFormProvider,
    ExactProvider,
    MeasureEstimate,
    closed_form_measure,
    dual_kernel,
)
from .errors import CertificationError, ConfigurationError, DegenerateModelError, PreconditionError
from .model import Model, check_class


@dataclass(frozen=True)
class DecayConstants:
    D: float
    r: int
    a: float
    F: float
    K: float

    def envelope(self, t: int) -> float:
        return self.K * math.exp(-self.a * t)


def decay_constants(combU: CylinderCombination, combV: CylinderCombination, D: float, r: int) -> DecayConstants:
    """a = ln(1/D)/(2r), F = sum|alpha_i beta_j| D/(1-D), K = F D^(-(|U|+|V|)/(2r))."""
    if r < 1:
        raise ConfigurationError("radius must be >= 1")
    if D <= 0.0:
        raise DegenerateModelError("D = 0: the invariant measure is delta_0 and all correlations vanish")
    if D >= 1.0:
        raise CertificationError(f"D = {D!r} >= 1: no decay bound")
    if combU.dimension != 1 or combV.dimension != 1:
        raise ConfigurationError("decay constants are one-dimensional")
    a = math.log(1.0 / D) / (2 * r)
    F = combU.abs_weight() * combV.abs_weight() * D / (1.0 - D)
    K = F * D ** (-(combU.extent + combV.extent) / (2 * r))
    return DecayConstants(D, r, a, F, K)


@dataclass(frozen=True)
class CorrelationPoint:
    t: int
    value: float
    error: float
    envelope: float | None
    below_resolution: bool
    joint: MeasureEstimate
    mu_U: MeasureEstimate
    mu_V: MeasureEstimate

    def row(self) -> dict:
        return {"t": self.t, "corr": self.value, "err": self.error, "envelope": self.envelope}


def _product_error(x: MeasureEstimate, y: MeasureEstimate) -> tuple[float, float]:
    det = abs(y.value) * x.det_error + abs(x.value) * y.det_error + x.det_error * y.det_error
    stat = math.hypot(abs(y.value) * x.stat_error, abs(x.value) * y.stat_error)
    return det, stat


def default_provider(table: Model, N: int = DEFAULT_TRUNCATION):
    kind = closed_form_measure(table)
    if kind is not None:
        return ClosedFormProvider(kind)
    return ExactProvider(dual_kernel(table), N)


def correlation_curve(
    table: Model,
    U: Pattern,
    V: Pattern,
    t_min: int,
    t_max: int,
    provider: Callable | None = None,
) -> list[CorrelationPoint]:
    """|mu([U]_0 and [V]_t) - mu([U]_0) mu([V]_0)| for t in [t_min, t_max].

    The envelope is ``K exp(-a t)``; it is ``None`` for point-mass measures
    (where every correlation is exactly zero).
    """
    if table.neighborhood.dimension != 1:
        raise ConfigurationError("correlation curves are one-dimensional")
    combU, combV = decompose(U), decompose(V)
    need = combU.extent + combV.extent
    if t_min < need:
        raise PreconditionError(f"correlations need t >= |U| + |V| = {need}, got t_min = {t_min}")
    if t_max < t_min:
        raise ConfigurationError("t_max < t_min")
    if provider is None:
        provider = default_provider(table)
    report = check_class(table)
    consts = None
    if closed_form_measure(table) is None:
        if not report.ergodic:
            raise CertificationError("model is not an ergodic class-C PCA", report)
        consts = decay_constants(combU, combV, report.D, table.neighborhood.radius)
    # constant p: every site is redrawn independently, the measure is a
    # product and disjoint cylinders are exactly uncorrelated
    independent = all(m == 0 for m in report.lambdas.weights)
    mU, mV = measure(combU, provider), measure(combV, provider)
    pdet, pstat = _product_error(mU, mV)
    out = []
    for t in range(t_min, t_max + 1):
        joint = measure(couple(combU, combV, t), provider)
        if independent:
            corr = err = 0.0
        else:
            corr = abs(joint.value - mU.value * mV.value)
            err = joint.det_error + pdet + math.hypot(joint.stat_error, pstat)
        env = consts.envelope(t) if consts else None
        out.append(CorrelationPoint(t, corr, err, env, corr <= err and err > 0, joint, mU, mV))
    return out


def curve_csv(points: list[CorrelationPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "corr", "err", "envelope"])
    for p in points:
        env = "" if p.envelope is None else f"{p.envelope:.12g}"
        w.writerow([p.t, f"{p.value:.12g}", f"{p.error:.12g}", env])
    return buf.getvalue()


@dataclass(frozen=True)
class DobrushinReport:
    gamma: float
    D: float
    duality_applies: bool
    dobrushin_applies: bool
    duality_rate: float | None
    dobrushin_rate: float | None

    def as_dict(self) -> dict:
        return asdict(self)


def dobrushin_report(table: Model) -> DobrushinReport:
    """Compare the duality criterion (class C, D < 1) with Dobrushin's gamma < 1.

    Rates are both normalized as ln(1/x) / (2r) so they are directly comparable.
    """
    report = check_class(table)
    r = table.neighborhood.radius
    D, gamma = report.D, report.gamma

    def rate(x):
        if x >= 1.0:
            return None
        return math.inf if x <= 0.0 else math.log(1.0 / x) / (2 * r)

    duality = report.ergodic
    dob = gamma < 1.0
    return DobrushinReport(gamma, D, duality, dob, rate(D) if duality else None, rate(gamma) if dob else None)
