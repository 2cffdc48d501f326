import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from mevsim.cfmm_core import (
    Cfmm,
    FunctionEdge,
    apply_trade,
    combine_curvature,
    estimate_curvature,
    forward_exchange,
    forward_rate,
    inverse_exchange,
    sell_output,
)
from mevsim.errors import (
    DomainViolation,
    NonPositiveReserves,
    OutputExceedsReserves,
    ReservesDepleted,
)

CP = Cfmm.constant_product(1.0, 2.0)
CS = Cfmm.constant_sum(10.0, 10.0, 1.0)
WP = Cfmm.weighted_product(3.0, 5.0, 0.3)

reserves = st.floats(1e-2, 1e4)
weights = st.floats(0.05, 0.95)


def pools():
    return st.one_of(
        st.builds(Cfmm.constant_product, reserves, reserves),
        st.builds(Cfmm.weighted_product, reserves, reserves, weights),
    )


def test_forward_exchange_examples():
    assert forward_exchange(CP, 1.0) == pytest.approx(1.0, rel=1e-15)
    for m in (CP, CS, WP, FunctionEdge.sqrt()):
        assert forward_exchange(m, 0.0) == 0.0
    assert forward_exchange(Cfmm.constant_sum(1.0, 1.0, 1.0), 0.5) == 0.5


def test_constant_sum_runs_dry():
    with pytest.raises(ReservesDepleted):
        forward_exchange(Cfmm.constant_sum(1.0, 1.0, 1.0), 1.5)


def test_bad_reserves_rejected():
    with pytest.raises(NonPositiveReserves):
        Cfmm.constant_product(0.0, 2.0)
    with pytest.raises(ValueError):
        Cfmm.weighted_product(1.0, 1.0, 1.0)


def test_forward_rate_examples():
    assert forward_rate(CP, 0.0) == 2.0
    assert forward_rate(CP, math.sqrt(2) - 1) == pytest.approx(1.0, rel=1e-15)
    assert forward_rate(Cfmm.constant_sum(5, 5, 1.0), 0.3) == 1.0
    with pytest.raises(DomainViolation):
        forward_rate(CP, -1.0)


def test_weighted_half_is_constant_product():
    wp = Cfmm.weighted_product(1.0, 2.0, 0.5)
    for d in (1e-6, 0.3, 1.0, 7.0):
        assert forward_exchange(wp, d) == pytest.approx(forward_exchange(CP, d), rel=1e-13)


def test_inverse_examples():
    assert inverse_exchange(CP, 0.0) == 0.0
    assert inverse_exchange(CP, 0.9) == pytest.approx(2 / 1.1 - 1, rel=1e-14)
    with pytest.raises(OutputExceedsReserves):
        inverse_exchange(CP, 2.0)


def test_apply_trade_examples():
    p = apply_trade(CP, 1.0)
    assert (p.reserves_in, p.reserves_out) == pytest.approx((2.0, 1.0))
    assert apply_trade(CP, 0.0) == CP
    p = apply_trade(CP, 0.07233)
    assert p.reserves_in == pytest.approx(1.07233)
    assert p.reserves_out == pytest.approx(2 / 1.07233, rel=1e-12)


def test_sell_output_is_mirror_trade():
    got, pool = sell_output(CP, 0.5)
    assert got == pytest.approx(1.0 * 0.5 / 2.5)
    assert pool.reserves_in * pool.reserves_out == pytest.approx(2.0, rel=1e-14)


def test_curvature_examples():
    c = estimate_curvature(CS, 1.0)
    assert (c.alpha, c.beta, c.mu, c.kappa) == (0.0, 0.0, 1.0, 1.0)
    c = estimate_curvature(CP, 1.0, 64, m_price=0.5)
    assert c.mu == pytest.approx(2.0)
    assert c.kappa == pytest.approx(1.0)
    assert c.kappa < c.mu
    assert 0 <= c.beta <= c.alpha


def test_curvature_needs_valid_grid():
    with pytest.raises(ValueError):
        estimate_curvature(CP, 1.0, 8)
    with pytest.raises(DomainViolation):
        estimate_curvature(Cfmm.constant_sum(1, 1, 1.0), 2.0)


def test_combine_takes_worst_case():
    a = estimate_curvature(CP, 1.0, m_price=0.5)
    b = estimate_curvature(Cfmm.constant_product(4.0, 4.0), 1.0)
    c = combine_curvature([a, b])
    assert c.mu == max(a.mu, b.mu) and c.kappa == min(a.kappa, b.kappa)
    assert c.beta == min(a.beta, b.beta) and c.alpha == max(a.alpha, b.alpha)


@settings(max_examples=300, deadline=None)
@given(r=reserves, rp=reserves, frac=st.floats(-0.9, 50.0))
def test_constant_product_invariant(r, rp, frac):
    pool = Cfmm.constant_product(r, rp)
    after = apply_trade(pool, frac * r)
    assert after.reserves_in * after.reserves_out == pytest.approx(r * rp, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(pool=pools(), xs=st.lists(st.floats(1e-4, 10.0), min_size=3, max_size=3, unique=True))
def test_concavity(pool, xs):
    d1, d2, d3 = (v * pool.reserves_in for v in sorted(xs))
    assume(d2 - d1 > 1e-6 * d2 and d3 - d2 > 1e-6 * d3)
    g1, g2, g3 = (forward_exchange(pool, d) for d in (d1, d2, d3))
    left = (g2 - g1) / (d2 - d1)
    right = (g3 - g2) / (d3 - d2)
    assert left >= right * (1 - 1e-9)


@pytest.mark.parametrize("pool", [CP, WP, Cfmm.weighted_product(2.0, 1.0, 0.8)])
def test_rate_matches_finite_difference(pool):
    for d in np.geomspace(1e-3, 10.0, 25) * pool.reserves_in:
        h = 1e-5 * d
        fd = (forward_exchange(pool, d + h) - forward_exchange(pool, d - h)) / (2 * h)
        assert forward_rate(pool, d) == pytest.approx(fd, rel=1e-6)


@settings(max_examples=300, deadline=None)
@given(pool=pools(), frac=st.floats(0.0, 100.0))
def test_inverse_roundtrip(pool, frac):
    d = frac * pool.reserves_in
    out = forward_exchange(pool, d)
    # once the output is within 1e-5 of the reserve, G is too flat for any
    # inverse to recover d from a rounded output
    if out > (1 - 1e-5) * pool.reserves_out:
        return
    assert abs(inverse_exchange(pool, out) - d) <= 1e-10 * (1 + d) * max(1.0, pool.reserves_in)


@settings(max_examples=100, deadline=None)
@given(pool=pools(), m=st.floats(0.01, 2.0))
def test_curvature_brackets_grid(pool, m):
    m *= pool.reserves_in
    c = estimate_curvature(pool, m, 32, m_price=0.5 * min(m, pool.reserves_in))
    for d in m * np.arange(1, 33) / 32:
        g = forward_exchange(pool, d)
        assert c.kappa * d <= g * (1 + 1e-10)
        assert g <= c.mu * d * (1 + 1e-10)
