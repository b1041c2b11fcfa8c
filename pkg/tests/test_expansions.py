import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import hermite_e

from vlsf._gauss import log_mills, log_q, q_func
from vlsf.expansions import (CramerSeries2, EdgeworthExpansion, PetrovOverflowWarning, edgeworth_cdf, edgeworth_p,
                             hermite, hermite_coeffs, moments_to_cumulants, partitions, petrov_tail)


def hermite_recurrence(j, x):
    h0, h1 = np.ones_like(x), x
    if j == 0:
        return h0
    for i in range(1, j):
        h0, h1 = h1, x * h1 - i * h0
    return h1


def brute_partitions(j):
    """All (k_1..k_j) with sum m k_m = j, by exhaustive product search."""
    ranges = [range(j // m + 1) for m in range(1, j + 1)]
    return {ks for ks in itertools.product(*ranges) if sum(m * k for m, k in enumerate(ks, 1)) == j}


@pytest.mark.parametrize("j, x, expected", [(2, 0.5, -0.75), (3, 2.0, 2.0), (0, 3.7, 1.0), (0, -1e3, 1.0)])
def test_hermite_values(j, x, expected):
    assert hermite(j, x) == pytest.approx(expected)


@pytest.mark.parametrize("j", range(18))
def test_hermite_closed_form_vs_recurrence(j):
    x = np.linspace(-5, 5, 41)
    ref = hermite_recurrence(j, x)
    got = hermite(j, x)
    assert np.all(np.abs(got - ref) <= 1e-9 * np.maximum(np.abs(ref), 1.0))
    assert np.allclose(hermite_coeffs(j), hermite_e.herme2poly([0] * j + [1]), rtol=0, atol=0)


@pytest.mark.parametrize("j", [-1, 18])
def test_hermite_degree_guard(j):
    with pytest.raises(ValueError):
        hermite_coeffs(j)


@pytest.mark.parametrize("j, count", [(1, 1), (2, 2), (3, 3), (4, 5), (5, 7), (6, 11), (7, 15)])
def test_partition_counts(j, count):
    parts = partitions(j)
    assert len(parts) == count
    assert {p.counts for p in parts} == brute_partitions(j)
    for p in parts:
        assert p.r == sum(p.counts)
    assert parts == sorted(parts, reverse=True)


def test_partitions_of_three():
    assert [(p.counts, p.r) for p in partitions(3)] == [((3, 0, 0), 3), ((1, 1, 0), 2), ((0, 0, 1), 1)]


def test_moments_to_cumulants_known():
    # exponential(1): raw moments l!, cumulants (l-1)!
    mom = [math.factorial(l) for l in range(1, 8)]
    kap = moments_to_cumulants(mom)
    for m in range(1, 8):
        assert kap[m] == pytest.approx(math.factorial(m - 1), rel=1e-12)


@given(st.floats(-4, 4), st.floats(-2, 2), st.floats(0.1, 5))
def test_p1_closed_form(x, k3, k4):
    kap = {3: k3, 4: k4, 5: 0.0}
    assert edgeworth_p(1, x, kap) == pytest.approx(-(k3 / 6) * (x * x - 1), abs=1e-12)


@given(st.floats(-4, 4))
def test_p2_pure_kurtosis(x):
    assert edgeworth_p(2, x, {3: 0.0, 4: 1.0}) == pytest.approx(-(x**3 - 3 * x) / 24, abs=1e-12)


@pytest.mark.parametrize("j", range(1, 6))
def test_p_vanishes_with_zero_cumulants(j):
    kap = {m: 0.0 for m in range(3, 8)}
    assert np.all(edgeworth_p(j, np.linspace(-5, 5, 11), kap) == 0.0)


@pytest.mark.parametrize("j", range(1, 6))
def test_p_degree(j):
    # top term is He_{3j-1}, from the partition k_1 = j
    kap = {m: 0.3 * (-1) ** m for m in range(3, 8)}
    exp = EdgeworthExpansion(5, kap)
    c = np.trim_zeros(exp.p_coeffs[j - 1], "b")
    assert c.size - 1 == 3 * j - 1


def test_edgeworth_gaussian_reduction():
    exp = EdgeworthExpansion(5, {m: 0.0 for m in range(3, 8)})
    x = np.linspace(-6, 6, 25)
    assert np.allclose(edgeworth_cdf(7, x, exp), 1 - q_func(x), atol=1e-15)


def test_edgeworth_converges(channel):
    from vlsf.channel import normalized_cumulants

    exp = EdgeworthExpansion(5, normalized_cumulants(channel))
    x = np.linspace(-5, 5, 201)
    err = [np.max(np.abs(edgeworth_cdf(n, x, exp) - (1 - q_func(x)))) for n in (1e2, 1e3, 1e4)]
    assert err[0] > err[1] > err[2]


def test_edgeworth_rejects_small_n():
    exp = EdgeworthExpansion(1, {3: 0.1})
    with pytest.raises(ValueError):
        edgeworth_cdf(0.5, 0.0, exp)


def test_edgeworth_order_guard():
    with pytest.raises(ValueError):
        EdgeworthExpansion(6, {m: 0.0 for m in range(3, 9)})
    with pytest.raises(ValueError):
        EdgeworthExpansion(3, {3: 0.1, 4: 0.1})


def test_cramer_coefficients():
    kap = {2: 1.0, 3: 0.6, 4: 0.2, 5: -0.4}
    cs = CramerSeries2.from_cumulants(kap)
    assert cs.a0 == pytest.approx(0.1)
    assert cs.a1 == pytest.approx((0.2 - 3 * 0.36) / 24)
    assert cs.a2 == pytest.approx((-0.4 - 10 * 0.2 * 0.6 + 15 * 0.216) / 120)


@pytest.mark.parametrize("n", [1, 10, 1e4])
def test_petrov_at_zero(n):
    assert petrov_tail(n, 0.0, CramerSeries2(0.3, -0.2, 0.1)) == 0.5


def test_petrov_gaussian_reduction():
    x = np.linspace(0, 30, 61)
    assert np.allclose(petrov_tail(50, x, CramerSeries2(0, 0, 0)), q_func(x), rtol=1e-12, atol=0)


def test_petrov_overflow_clamped():
    with pytest.warns(PetrovOverflowWarning):
        v = petrov_tail(1, 3.0, CramerSeries2(5.0, 0.0, 0.0))
    assert v == 1.0


def test_petrov_domain():
    cs = CramerSeries2(0, 0, 0)
    with pytest.raises(ValueError):
        petrov_tail(10, -0.1, cs)
    with pytest.raises(ValueError):
        petrov_tail(0.5, 0.1, cs)


@settings(max_examples=200)
@given(st.floats(0.0, 37.0))
def test_log_q_matches_direct(x):
    assert log_q(x) == pytest.approx(math.log(q_func(x)), rel=1e-12, abs=1e-14)


def test_log_q_deep_tail():
    # Q(x) ~ phi(x)/x: log Mills ratio approaches -log x
    assert np.isfinite(log_q(200.0))
    assert log_mills(1e4) == pytest.approx(-math.log(1e4), rel=1e-6)
