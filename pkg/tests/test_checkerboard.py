import math
from itertools import permutations
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from dirdep.checkerboard import (
    CheckerboardCopula,
    CheckerboardError,
    aggregate,
    ecbc,
    load_checkerboard,
    random_checkerboard,
    resolution,
    save_checkerboard,
    stripe_cdf,
)
from dirdep.ingest import BivariateSample, TiePolicy, to_pseudo
from dirdep.models import comonotone, fgm, independence, marshall_olkin


def bilinear_empirical_copula(ranks_x, ranks_y, n):
    """E_n(u, v) via bilinear interpolation of the rank subcopula, in exact arithmetic."""
    rx = [Fraction(r) for r in ranks_x]
    ry = [Fraction(r) for r in ranks_y]

    def sub(i, j):
        return Fraction(sum(1 for a, b in zip(rx, ry) if a <= i and b <= j), n)

    def E(u, v):
        su, sv = u * n, v * n
        i, j = min(math.floor(su), n - 1), min(math.floor(sv), n - 1)
        a, b = su - i, sv - j
        return ((1 - a) * (1 - b) * sub(i, j) + a * (1 - b) * sub(i + 1, j)
                + (1 - a) * b * sub(i, j + 1) + a * b * sub(i + 1, j + 1))

    return E


def checkerboard_by_inclusion_exclusion(E, N):
    g = [Fraction(k, N) for k in range(N + 1)]
    m = np.empty((N, N))
    for i in range(N):
        for j in range(N):
            m[i, j] = float(E(g[i + 1], g[j + 1]) - E(g[i], g[j + 1])
                            - E(g[i + 1], g[j]) + E(g[i], g[j]))
    return m


@pytest.mark.parametrize("n,N", [(7, 3), (10, 3), (9, 4), (5, 5), (4, 6), (12, 5), (3, 2)])
def test_ecbc_matches_bilinear_oracle(n, N, rng):
    x, y = rng.random(n), rng.random(n)
    ps = to_pseudo(BivariateSample(x, y))
    got = ecbc(ps, N).mass
    E = bilinear_empirical_copula(ps.u * n, ps.v * n, n)
    assert_allclose(got, checkerboard_by_inclusion_exclusion(E, N), rtol=0, atol=1e-15)


def test_ecbc_midranks_spread_over_tie_blocks():
    s = BivariateSample([1, 1, 2, 3, 3, 3, 4], [5, 1, 2, 2, 7, 3, 0])
    with pytest.warns(UserWarning):
        ps = to_pseudo(s, TiePolicy.MID_RANK)
    n, N = 7, 3
    m = ecbc(ps, N).mass
    assert_allclose(m.sum(axis=0), 1 / N, atol=1e-15)
    assert_allclose(m.sum(axis=1), 1 / N, atol=1e-15)
    # reference: average the jitter checkerboard over every tie-break
    # permutation, which spreads each tied point uniformly over its block
    xs_blocks = [[0, 1], [2], [3, 4, 5], [6]]
    ys_blocks = [[6], [1], [2, 3], [5], [0], [4]]
    ref = np.zeros((N, N))
    count = 0
    for px in _block_orders(xs_blocks):
        for py in _block_orders(ys_blocks):
            rx, ry = np.empty(n), np.empty(n)
            rx[px] = np.arange(1, n + 1)
            ry[py] = np.arange(1, n + 1)
            jit = to_pseudo(BivariateSample(rx, ry))
            ref += ecbc(jit, N).mass
            count += 1
    assert_allclose(m, ref / count, atol=1e-15)


def _block_orders(blocks):
    """Every order of the points that respects the block order."""
    orders = [[]]
    for b in blocks:
        orders = [o + list(p) for o in orders for p in permutations(b)]
    return orders


def test_ecbc_divisible_case_is_counting():
    n, N = 12, 4
    ps = to_pseudo(BivariateSample(np.arange(n), np.arange(n)[::-1]))
    m = ecbc(ps, N).mass
    assert_allclose(m, np.fliplr(np.eye(N)) / N, atol=1e-16)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 60), st.integers(2, 12), st.integers(0, 10**6))
def test_ecbc_is_doubly_stochastic(n, N, seed):
    gen = np.random.default_rng(seed)
    ps = to_pseudo(BivariateSample(gen.random(n), gen.random(n)), seed=seed)
    m = ecbc(ps, N).mass
    assert m.min() >= 0
    assert_allclose(m.sum(axis=0), 1 / N, atol=1e-14)
    assert_allclose(m.sum(axis=1), 1 / N, atol=1e-14)


def test_validation():
    with pytest.raises(CheckerboardError):
        CheckerboardCopula(np.full((2, 3), 1 / 6))
    with pytest.raises(CheckerboardError):
        CheckerboardCopula([[0.5, 0.0], [0.0, 0.6]])
    with pytest.raises(CheckerboardError, match="negative"):
        CheckerboardCopula([[0.6, -0.1], [-0.1, 0.6]])
    with pytest.raises(CheckerboardError, match="margins"):
        CheckerboardCopula([[0.5, 0.0], [0.25, 0.25]])
    cb = CheckerboardCopula(np.eye(2) / 2)
    with pytest.raises(ValueError):
        cb.mass[0, 0] = 1


def test_resolution():
    assert resolution(100) == 10
    assert resolution(99) == 9
    assert resolution(10000) == 100
    assert resolution(3) == 2
    assert resolution(1000, 1 / 3) == 10
    with pytest.raises(ValueError):
        resolution(1)
    with pytest.raises(ValueError):
        resolution(10, 0)


def test_aggregate_fgm_small():
    # hand calculation: C(1/2,1/2) = 1/4 + 0.6/16
    m = aggregate(fgm(0.6), 2).mass
    assert_allclose(m, [[0.2875, 0.2125], [0.2125, 0.2875]], atol=1e-15)


def test_aggregate_boundaries():
    assert_allclose(aggregate(independence(), 5).mass, np.full((5, 5), 1 / 25), atol=1e-16)
    assert_allclose(aggregate(comonotone(), 5).mass, np.eye(5) / 5, atol=1e-16)


def test_aggregate_rejects_non_copula():
    class Bad:
        def cdf(self, u, v):
            return np.minimum(u, v) * 1.1

    with pytest.raises(CheckerboardError):
        aggregate(Bad(), 4)


def test_coarsen_matches_direct_aggregation():
    model = marshall_olkin(0.2, 0.7)
    assert_allclose(aggregate(model, 64).coarsen().mass, aggregate(model, 32).mass, atol=1e-15)


def test_stripe_cdf():
    cb = aggregate(fgm(0.6), 2)
    F = stripe_cdf(cb, 0)
    assert F(0.0) == 0.0
    assert F(1.0) == pytest.approx(1.0, abs=1e-15)
    assert F(0.5) == pytest.approx(0.575, abs=1e-15)
    assert F(0.25) == pytest.approx(0.2875, abs=1e-15)
    assert_allclose(cb.cdf_table()[1], stripe_cdf(cb, 1).values, atol=0)
    with pytest.raises(IndexError):
        stripe_cdf(cb, 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.integers(0, 10**6))
def test_random_checkerboards_are_doubly_stochastic(N, seed):
    m = random_checkerboard(N, np.random.default_rng(seed)).mass
    assert m.min() >= 0
    assert_allclose(m.sum(axis=1), 1 / N, atol=1e-12)
    assert_allclose(m.sum(axis=0), 1 / N, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.integers(0, 10**6))
def test_stripe_cdfs_monotone(N, seed):
    F = random_checkerboard(N, np.random.default_rng(seed)).cdf_table()
    assert np.all(np.diff(F, axis=1) >= -1e-15)
    assert_allclose(F[:, -1], 1.0, atol=1e-10)
    # averaging the stripe CDFs gives the uniform margin
    assert_allclose(F.mean(axis=0), np.arange(N + 1) / N, atol=1e-12)


def test_save_load_round_trip(tmp_path, random_cbs):
    for k, cb in enumerate(random_cbs):
        path = tmp_path / f"cb{k}.txt"
        save_checkerboard(cb, path)
        assert load_checkerboard(path) == cb


def test_ecbc_ignores_row_order(rng):
    x, y = rng.random(300), rng.random(300)
    perm = rng.permutation(300)
    a = ecbc(to_pseudo(BivariateSample(x, y)), 17)
    b = ecbc(to_pseudo(BivariateSample(x[perm], y[perm])), 17)
    assert np.array_equal(a.mass, b.mass)
