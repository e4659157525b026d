from __future__ import annotations

import math

import numpy as np
import pytest

from pcadual import (
    ConfigurationError,
    LambdaTable,
    Pattern,
    Torus,
    binomial2d,
    build_neighborhood,
    constant_table,
    domany_kinzel,
    estimate_frequency,
    step_pca,
)
from pcadual.lattice import _Rule, default_burn_in, make_rng, pattern_frequency, pattern_span


def test_torus_basics():
    t = Torus.zeros(1, 8)
    assert t.density() == 0.0 and not t.bits.flags.writeable
    o = Torus.ones(2, 4)
    assert o.density() == 1.0
    assert o.packed() == bytes([0xF0] * 4)
    with pytest.raises(ConfigurationError):
        Torus(3, 2, np.zeros((2, 2, 2)))
    with pytest.raises(ConfigurationError):
        Torus(1, 5, np.zeros(4))


def test_rule_matches_direct_lookup_1d():
    table = domany_kinzel(0.1, 0.2, 0.5)
    rng = np.random.default_rng(0)
    bits = (rng.random(32) < 0.5).astype(np.uint8)
    probs = _Rule(table).probabilities(bits)
    for z in range(32):
        J = [(j,) for j in (-1, 0, 1) if bits[(z + j) % 32]]
        assert probs[z] == table.prob(J)


def test_sparse_rule_matches_direct_sum():
    nb = build_neighborhood(2, 2, dense=False)
    w = {0: 0.05, nb.mask([(0, 0)]): 0.2, nb.mask([(-2, 1), (1, -2)]): 0.3, nb.mask([(2, 2)]): 0.1}
    lam = LambdaTable(nb, w)
    rng = np.random.default_rng(1)
    bits = (rng.random((9, 9)) < 0.5).astype(np.uint8)
    probs = _Rule(lam).probabilities(bits)
    for x in range(9):
        for y in range(9):
            ones = {off for off in nb.offsets if bits[(x + off[0]) % 9, (y + off[1]) % 9]}
            want = sum(v for m, v in w.items() if set(nb.subset(m)) <= ones)
            assert probs[x, y] == pytest.approx(want, abs=1e-15)


def test_zero_and_one_rules():
    rng = make_rng(3)
    t = Torus.random(1, 64, rng)
    assert step_pca(t, constant_table(0.0), rng).density() == 0.0
    assert step_pca(t, constant_table(1.0), rng).density() == 1.0
    t2 = Torus.random(2, 16, rng)
    assert step_pca(t2, constant_table(0.0, 1, 2), rng).density() == 0.0
    with pytest.raises(ConfigurationError):
        step_pca(t2, constant_table(0.5), rng)


def test_pattern_frequency_and_span():
    bits = np.array([1, 0, 1, 0, 1, 0], dtype=np.uint8)
    assert pattern_frequency(bits, Pattern.from_word("10")) == 0.5
    assert pattern_frequency(bits, Pattern.from_word("11")) == 0.0
    assert pattern_frequency(bits, Pattern.from_word("1")) == 0.5
    assert pattern_span(Pattern.from_word("101", 4)) == 3
    assert pattern_span(Pattern.parse("0:0=1,2:1=0", 2)) == 3


def test_default_burn_in():
    assert default_burn_in(0.5) == math.ceil(10 / math.log(2))
    assert default_burn_in(0.0) == 1
    assert default_burn_in(1e-30) == 1
    with pytest.raises(ConfigurationError):
        default_burn_in(1.0)


@pytest.mark.parametrize("c", [0.3, 0.7])
def test_constant_model_is_bernoulli(c):
    table = constant_table(c)
    for word, want in (("1", c), ("10", c * (1 - c)), ("011", (1 - c) * c * c)):
        f = estimate_frequency(table, Pattern.from_word(word), 1024, samples=400, seed=2)
        assert abs(f.value - want) <= 4 * f.stat_error + 1e-12
        # independent sites and steps: the batch error should be near the binomial one
        sd = math.sqrt(want * (1 - want) / (1024 * 400))
        assert 0.3 * sd < f.stat_error < 3 * sd


def test_delta0_model_dies_out():
    f = estimate_frequency(domany_kinzel(0.0, 0.2, 0.5), Pattern.from_word("1"), 256, burn_in=200, samples=100)
    assert f.value == 0.0 and f.stat_error == 0.0


def test_reproducibility_and_seed_dependence():
    table = domany_kinzel(0.1, 0.2, 0.5)
    args = (table, Pattern.from_word("1"), 128)
    a = estimate_frequency(*args, samples=100, seed=4)
    b = estimate_frequency(*args, samples=100, seed=4)
    c = estimate_frequency(*args, samples=100, seed=5)
    assert a == b
    assert a != c


def test_shift_invariance_of_estimates():
    table = domany_kinzel(0.1, 0.2, 0.5)
    a = estimate_frequency(table, Pattern.from_word("01"), 128, samples=100, seed=6)
    b = estimate_frequency(table, Pattern.from_word("01", 37), 128, samples=100, seed=6)
    assert a == b


def test_two_dimensional_run():
    table = binomial2d(2.0**-12)
    f = estimate_frequency(table, Pattern.parse("0:0=0", 2), 32, samples=40, seed=1)
    assert 0.99 < f.value <= 1.0
    assert f.burn_in == default_burn_in(0.125)


def test_size_and_sampling_checks():
    table = domany_kinzel(0.1, 0.2, 0.5)
    with pytest.raises(ConfigurationError, match="too small"):
        estimate_frequency(table, Pattern.from_word("111"), 6)
    estimate_frequency(table, Pattern.from_word("111"), 7, samples=20)
    with pytest.raises(ConfigurationError):
        estimate_frequency(table, Pattern.from_word("1"), 64, samples=10)
    with pytest.raises(ConfigurationError):
        estimate_frequency(table, Pattern.from_word("1"), 64, thin=0)
    with pytest.raises(ConfigurationError):
        estimate_frequency(table, Pattern.parse("0:0=1", 2), 64)
    with pytest.raises(ConfigurationError):
        estimate_frequency(domany_kinzel(0.1, 0.2, 1.0), Pattern.from_word("1"), 64)


def test_batches_use_equal_sizes():
    f = estimate_frequency(domany_kinzel(0.1, 0.2, 0.5), Pattern.from_word("1"), 64, samples=105, thin=2)
    assert f.samples == 40 and f.batches == 20 and f.thin == 2


def test_pbm_dump(tmp_path):
    path = tmp_path / "run.pbm"
    estimate_frequency(domany_kinzel(0.1, 0.2, 0.5), Pattern.from_word("1"), 20, samples=40, thin=2, dump_pbm=path)
    data = path.read_bytes()
    header = b"P4\n20 20\n"
    assert data.startswith(header)
    assert len(data) == len(header) + 20 * 3

    path2 = tmp_path / "plane.pbm"
    estimate_frequency(binomial2d(2.0**-12), Pattern.parse("0:0=1", 2), 12, samples=20, dump_pbm=path2)
    assert path2.read_bytes().startswith(b"P4\n12 12\n")
