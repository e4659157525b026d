from __future__ import annotations

import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pcadual import (
    CertificationError,
    ConfigurationError,
    DegenerateModelError,
    Pattern,
    PreconditionError,
    binomial2d,
    constant_table,
    correlation_curve,
    curve_csv,
    decay_constants,
    decompose,
    dobrushin_report,
    domany_kinzel,
)
from pcadual.analysis import default_provider

ONE = decompose(Pattern.from_word("1"))


def test_constants_for_single_sites():
    c = decay_constants(ONE, ONE, 0.5, 1)
    assert c.a == pytest.approx(math.log(2) / 2)
    assert c.a == pytest.approx(0.346574, abs=1e-6)
    assert c.F == pytest.approx(1.0)
    assert c.K == pytest.approx(2.0)
    assert c.envelope(2) == pytest.approx(1.0)


def test_constants_use_decomposition_weights():
    u = decompose(Pattern.from_word("100"))  # four terms
    v = decompose(Pattern.from_word("0"))  # two terms
    c = decay_constants(u, v, 0.25, 2)
    assert c.F == pytest.approx(8 * 0.25 / 0.75)
    assert c.K == pytest.approx(c.F * 0.25 ** (-4 / 4))
    assert c.a == pytest.approx(math.log(4) / 4)


def test_constants_degenerate_and_uncertified():
    with pytest.raises(DegenerateModelError):
        decay_constants(ONE, ONE, 0.0, 1)
    with pytest.raises(CertificationError):
        decay_constants(ONE, ONE, 1.0, 1)
    with pytest.raises(ConfigurationError):
        decay_constants(decompose(Pattern.parse("0:0=1", 2)), ONE, 0.5, 1)


@given(st.floats(0.01, 0.98), st.floats(0.001, 0.01))
def test_rate_decreases_with_D(D, dD):
    assert decay_constants(ONE, ONE, D, 1).a > decay_constants(ONE, ONE, D + dD, 1).a


@pytest.mark.parametrize("c", [0.1, 0.3, 0.7])
def test_constant_models_are_uncorrelated(c):
    table = constant_table(c)
    for u, v in (("1", "1"), ("10", "01"), ("001", "1")):
        pts = correlation_curve(table, Pattern.from_word(u), Pattern.from_word(v), len(u) + len(v), 12,
                                default_provider(table, 1))
        assert all(p.value == 0.0 for p in pts)
        # the computed joint measure agrees with the product to rounding
        assert all(abs(p.joint.value - p.mu_U.value * p.mu_V.value) < 1e-15 for p in pts)


def test_point_mass_curves_have_no_envelope():
    table = domany_kinzel(0.0, 0.2, 0.5)
    pts = correlation_curve(table, Pattern.from_word("1"), Pattern.from_word("0"), 2, 4)
    assert all(p.value == 0.0 and p.envelope is None for p in pts)


def test_dk_curve_below_envelope():
    table = domany_kinzel(0.1, 0.2, 0.5)
    pts = correlation_curve(table, Pattern.from_word("1"), Pattern.from_word("1"), 2, 8, default_provider(table, 30))
    assert [p.t for p in pts] == list(range(2, 9))
    for p in pts:
        assert p.envelope == pytest.approx(2 * math.exp(-0.346574 * p.t), rel=1e-5)
        assert p.value <= p.envelope + p.joint.det_error
    # t = 2: |mu(1_0 1_2) - mu(1)^2| from the frozen dual values
    assert pts[0].value == pytest.approx(abs(0.018746709996449406 - 0.12968667749899931**2), abs=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_random_dk_chain_of_bounds(seed):
    # corr <= F D^floor((t-|U|-|V|)/2r) + err, and that quantity <= K e^{-at} / D
    rng = np.random.default_rng(seed)
    a2 = rng.uniform(0.1, 0.6)
    a0 = rng.uniform(0.01, a2 / 2)
    a1 = rng.uniform(a0, (a0 + a2) / 2)
    table = domany_kinzel(a0, a1, a2)
    U, V = Pattern.from_word("10"), Pattern.from_word("1")
    c = decay_constants(decompose(U), decompose(V), table.D, 1)
    for p in correlation_curve(table, U, V, 3, 9, default_provider(table, 25)):
        mid = c.F * table.D ** ((p.t - 3) // 2)
        assert p.value <= mid + p.error
        assert mid <= c.K * math.exp(-c.a * p.t) / table.D * (1 + 1e-12)
        assert p.value <= p.envelope + p.error


def test_curve_preconditions():
    table = domany_kinzel(0.1, 0.2, 0.5)
    with pytest.raises(PreconditionError):
        correlation_curve(table, Pattern.from_word("10"), Pattern.from_word("1"), 2, 5)
    with pytest.raises(ConfigurationError):
        correlation_curve(table, Pattern.from_word("1"), Pattern.from_word("1"), 5, 4)
    with pytest.raises(CertificationError):
        correlation_curve(domany_kinzel(0.0, 0.4, 0.5), Pattern.from_word("1"), Pattern.from_word("1"), 2, 3,
                          provider=lambda Y: None)


def test_curve_csv_format():
    table = domany_kinzel(0.1, 0.2, 0.5)
    pts = correlation_curve(table, Pattern.from_word("1"), Pattern.from_word("1"), 2, 4, default_provider(table, 20))
    text = curve_csv(pts)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["t", "corr", "err", "envelope"]
    assert [int(r[0]) for r in rows[1:]] == [2, 3, 4]
    for r, p in zip(rows[1:], pts):
        assert float(r[1]) == pytest.approx(p.value, rel=1e-11)
        assert float(r[3]) == pytest.approx(p.envelope, rel=1e-11)
    assert text.endswith("\n") and "\r" not in text
    pm = correlation_curve(domany_kinzel(0.0, 0.2, 0.5), Pattern.from_word("1"), Pattern.from_word("1"), 2, 2)
    assert curve_csv(pm).splitlines()[1] == "2,0,0,"


def test_dobrushin_comparison():
    r = dobrushin_report(domany_kinzel(0.1, 0.2, 0.9))
    assert r.duality_applies and not r.dobrushin_applies
    assert r.gamma == pytest.approx(1.4)
    assert r.duality_rate == pytest.approx(math.log(1 / 0.9) / 2) and r.dobrushin_rate is None
    b = dobrushin_report(binomial2d(2.0**-12))
    assert b.duality_applies and b.dobrushin_applies
    assert b.D == pytest.approx(0.125) and b.gamma == pytest.approx(0.5625)
    assert b.D < b.gamma
    assert b.duality_rate > b.dobrushin_rate
    n = dobrushin_report(domany_kinzel(0.0, 0.4, 0.5))
    assert not n.duality_applies
    assert dobrushin_report(constant_table(0.0)).duality_rate == math.inf
