"""Sandwich attacks on a single pool.

An attacker front-runs a user's trade (delta, eta) with ``x`` of the input
token, chosen so the user receives exactly the minimum they accept,
(1 - eta) * G(delta).  After the user trades, the attacker sells the output
token bought in the front-run and ends up with ``x'`` of the input token.
Profit is x' - x.

Reverse-direction trades (selling the output token) are handled by viewing
the pool from the other side; see ``execute_signed``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import combinations

from .cfmm_core import (
    Cfmm,
    FunctionEdge,
    Kind,
    apply_trade,
    forward_exchange,
    has_price_impact,
    inverse_exchange,
    sell_output,
)
from .errors import BetaZero, InvalidCurvature, NoSolution, TooManyTrades
from .rootfind import bisect, expand_upper

__all__ = [
    "Trade",
    "SandwichResult",
    "PnlBounds",
    "optimal_sandwich_closed_form",
    "optimal_sandwich",
    "execute_sandwich",
    "execute_signed",
    "sandwich_pnl",
    "compute_pnl_bounds",
    "hurdle_rate_check",
    "check_pairwise_locality_condition",
    "check_strong_locality_bruteforce",
    "simulate_bundles",
    "contiguous_partitions",
]

SEARCH_CAP = 1e6


@dataclass(frozen=True)
class Trade:
    """A user order: ``delta`` of input token with slippage limit ``eta``.

    ``delta`` may be negative inside trade sequences, meaning a trade in the
    opposite direction (see ``execute_signed``).  Single-trade functions
    require delta > 0.
    """

    delta: float
    eta: float

    def __post_init__(self):
        if not (math.isfinite(self.delta) and self.delta != 0):
            raise ValueError(f"trade size must be finite and nonzero, got {self.delta!r}")
        if not 0 <= self.eta < 1:
            raise ValueError(f"slippage limit must lie in [0, 1), got {self.eta!r}")


@dataclass(frozen=True)
class SandwichResult:
    delta_sand: float
    delta_sand_prime: float
    pnl: float
    user_output: float
    reserves_after: Cfmm


@dataclass(frozen=True)
class PnlBounds:
    """Evaluated single-trade bounds.

    ``zeta`` is the bracket of the quadratic root of the front-run lower bound, r+ = (mu/beta - delta) * zeta;
    the same constant serves as ``gamma`` in the back-run lower bound.
    ``valid`` maps each bound name (and the hypotheses) to whether its
    preconditions hold.  Bounds whose preconditions fail are still reported.
    """

    ds_ub: float
    ds_lb: float
    dsp_ub: float
    dsp_lb: float
    pnl_ub: float
    pnl_lb: float
    zeta: float
    gamma: float
    valid: dict = field(default_factory=dict)


def _require_forward(trade):
    if trade.delta <= 0:
        raise ValueError("single-trade sandwich needs delta > 0")


def optimal_sandwich_closed_form(r, r_out, trade):
    """Front-run size for a constant product pool, in closed form.

    The front-run solves x**2 + b*x - c = 0 with b = delta + 2R and
    c = (R**2 + R*delta) * eta / (1 - eta).  The positive root is written as
    2c / (b + sqrt(b**2 + 4c)) to avoid cancellation on deep pools.
    ``r_out`` does not enter.
    """
    _require_forward(trade)
    d, eta = trade.delta, trade.eta
    b = d + 2.0 * r
    c = (r * r + r * d) * eta / (1.0 - eta)
    if c == 0:
        return 0.0
    return 2.0 * c / (b + math.sqrt(b * b + 4.0 * c))


def _shifted_output(market, x, delta):
    """G(x + delta) - G(x), evaluated on the post-front-run reserves."""
    if isinstance(market, FunctionEdge):
        return forward_exchange(market, x + delta) - forward_exchange(market, x)
    r, rp = market.reserves_in, market.reserves_out
    rx = r + x
    if market.kind is Kind.CONSTANT_PRODUCT:
        return rp * (r / rx) * delta / (rx + delta)
    if market.kind is Kind.CONSTANT_SUM:
        return market.rate * delta
    a = market._exponent
    rpx = rp * (r / rx) ** a
    return -rpx * math.expm1(-a * math.log1p(delta / rx))


def optimal_sandwich(market, trade, *, cap=SEARCH_CAP):
    """Front-run size x >= 0 with G(delta + x) - G(x) = (1 - eta) G(delta).

    Bracketed bisection starting from [0, delta]; the upper end doubles until
    the residual changes sign or passes ``cap * max(delta, R)`` (``cap *
    delta`` for function edges).
    """
    _require_forward(trade)
    d, eta = trade.delta, trade.eta
    if eta == 0:
        return 0.0
    if not has_price_impact(market):
        raise NoSolution("no price impact: the user's output cannot be pushed down")
    target = (1.0 - eta) * forward_exchange(market, d)

    def resid(x):
        return _shifted_output(market, x, d) - target

    f0 = eta * (target / (1.0 - eta))
    # on deep pools the front-run grows with the reserves, not with delta
    scale = d if isinstance(market, FunctionEdge) else max(d, market.reserves_in)
    hi, fhi = expand_upper(resid, 0.0, d, cap=cap * scale, flo=f0)
    return bisect(resid, 0.0, hi, flo=f0, fhi=fhi, rtol=1e-16)


def execute_sandwich(cfmm, trade, *, front_run=None):
    """Run front-run, user trade, back-run with explicit reserve updates."""
    _require_forward(trade)
    x = optimal_sandwich(cfmm, trade) if front_run is None else front_run
    pool = apply_trade(cfmm, x)
    bought = cfmm.reserves_out - pool.reserves_out
    user_out = forward_exchange(pool, trade.delta)
    pool = apply_trade(pool, trade.delta)
    proceeds, pool = sell_output(pool, bought) if bought > 0 else (0.0, pool)
    return SandwichResult(
        delta_sand=x,
        delta_sand_prime=proceeds,
        pnl=proceeds - x,
        user_output=user_out,
        reserves_after=pool,
    )


def sandwich_pnl(market, delta, eta):
    """Profit from the initial-reserve formula, delta - G^-1((1 - eta) G(delta)).

    Works for stateless edges too, which have no reserves to simulate.
    """
    if eta == 0 or delta == 0:
        return 0.0
    return delta - inverse_exchange(market, (1.0 - eta) * forward_exchange(market, delta))


def execute_signed(cfmm, trade, p_ref):
    """Sandwich a trade of either direction.

    A negative ``trade.delta`` sells |delta| * p_ref of the output token.
    The attack then runs on the mirrored pool and its amounts are converted
    back to input-token units by dividing by p_ref, so profits from both
    directions are comparable.  ``user_output`` stays in the token the user
    actually receives.
    """
    if trade.delta > 0:
        return execute_sandwich(cfmm, trade)
    res = execute_sandwich(cfmm.mirrored(), Trade(-trade.delta * p_ref, trade.eta))
    return replace(
        res,
        delta_sand=res.delta_sand / p_ref,
        delta_sand_prime=res.delta_sand_prime / p_ref,
        pnl=res.pnl / p_ref,
        reserves_after=res.reserves_after.mirrored(),
    )


def _quad_root_bracket(mu, kappa, beta, g0, delta, eta):
    """1 + sqrt(1 + beta*delta*(1 + (eta*mu + g0)/(mu - kappa*delta)))."""
    denom = mu - kappa * delta
    if denom == 0:
        return math.nan
    disc = 1.0 + beta * delta * (1.0 + (eta * mu + g0) / denom)
    return 1.0 + math.sqrt(disc) if disc >= 0 else math.nan


def compute_pnl_bounds(curv, g0, trade):
    """Evaluate the single-trade bound formulas literally.

    ds_ub  = (eta*mu/(mu - kappa) - 1) * delta
    ds_lb  = (mu/beta - delta) * zeta
    dsp_ub = (eta*(1 + mu/(mu - kappa)) - (2 - kappa/mu)) * delta
    dsp_lb = mu*gamma/beta - delta*(gamma + eta*mu/kappa)
    pnl_ub = dsp_ub - ds_lb,  pnl_lb = dsp_lb - ds_ub
    """
    _require_forward(trade)
    mu, kappa, beta = curv.mu, curv.kappa, curv.beta
    if not (kappa > 0 and mu > kappa):
        raise InvalidCurvature(f"need 0 < kappa < mu, got kappa={kappa!r}, mu={mu!r}")
    d, eta = trade.delta, trade.eta

    ds_ub = (eta * mu / (mu - kappa) - 1.0) * d
    dsp_ub = (eta * (1.0 + mu / (mu - kappa)) - (2.0 - kappa / mu)) * d
    if beta > 0:
        zeta = _quad_root_bracket(mu, kappa, beta, g0, d, eta)
        ds_lb = (mu / beta - d) * zeta
        gamma = zeta
        dsp_lb = mu * gamma / beta - d * (gamma + eta * mu / kappa)
    else:
        zeta = gamma = ds_lb = dsp_lb = math.nan

    upper_ok = eta >= 1.0 - kappa / mu
    lower_ok = beta > 0 and d < mu / beta and math.isfinite(zeta)
    valid = {
        "eta_ge_curvature_ratio": upper_ok,
        "beta_positive": beta > 0,
        "delta_below_mu_over_beta": beta > 0 and d < mu / beta,
        "mu_ge_g0_beta": mu >= g0 * beta,
        "ds_ub": upper_ok,
        "ds_lb": lower_ok,
        "dsp_ub": upper_ok,
        "dsp_lb": lower_ok,
        "pnl_ub": upper_ok and lower_ok,
        "pnl_lb": upper_ok and lower_ok,
    }
    return PnlBounds(
        ds_ub=ds_ub,
        ds_lb=ds_lb,
        dsp_ub=dsp_ub,
        dsp_lb=dsp_lb,
        pnl_ub=dsp_ub - ds_lb,
        pnl_lb=dsp_lb - ds_ub,
        zeta=zeta,
        gamma=gamma,
        valid=valid,
    )


def hurdle_rate_check(curv, trade, gamma_root):
    """(eta*(1 + mu/kappa) - (2 - kappa/mu) + gamma) * delta >= mu*gamma/beta."""
    mu, kappa, beta = curv.mu, curv.kappa, curv.beta
    if not (kappa > 0 and mu >= kappa):
        raise InvalidCurvature(f"need 0 < kappa <= mu, got kappa={kappa!r}, mu={mu!r}")
    if beta == 0:
        raise BetaZero("hurdle rate needs beta > 0")
    g = gamma_root
    lhs = (trade.eta * (1.0 + mu / kappa) - (2.0 - kappa / mu) + g) * trade.delta
    return bool(lhs >= mu * g / beta)


def check_pairwise_locality_condition(curv, g0, trades, constants):
    """Per adjacent pair (i, i+1), whether the sufficient condition holds.

    ``constants`` must expose ``nu`` and ``gamma`` (see
    ``reorder.pnl_bound_constants``).  Indices are 1-based in the formula.
    """
    mu, kappa, beta = curv.mu, curv.kappa, curv.beta
    if not (kappa > 0 and mu > kappa and beta > 0):
        raise InvalidCurvature("need 0 < kappa < mu and beta > 0")
    etas = {t.eta for t in trades}
    if len(etas) > 1:
        raise ValueError("pairwise locality assumes a single slippage limit")
    nu, gamma = constants.nu, constants.gamma
    ratio = mu / kappa
    b = ratio * (kappa / beta - g0)
    c = 2.0 + mu * nu / kappa
    d = 3.0 + mu * nu / kappa
    e = mu / (mu + kappa * gamma)
    deltas = [abs(t.delta) for t in trades]
    pair = [deltas[k] + deltas[k + 1] for k in range(len(deltas) - 1)]
    p = [(-1.0 - ratio * (nu + 1.0)) * s + b for s in pair]
    out = []
    for i in range(1, len(pair) + 1):
        tail = sum(p[l - 1] * d ** (i - l - 1) for l in range(1, i))
        expr = (ratio * (nu + 1.0) - 1.0) * pair[i - 1] + b + c * tail - e**i - e ** (i + 1)
        out.append(bool(expr <= 0))
    return out


def contiguous_partitions(n):
    """All ways to cut range(n) into contiguous bundles, as lists of (start, stop)."""
    for k in range(n):
        for cuts in combinations(range(1, n), k):
            edges = (0, *cuts, n)
            yield [(edges[j], edges[j + 1]) for j in range(len(edges) - 1)]


def simulate_bundles(cfmm, trades, partition, p_ref=None):
    """Total profit when each bundle is sandwiched as one aggregate trade.

    Bundles run in order on the evolving pool.  A bundle's size is the sum
    of its signed trade sizes and its slippage limit the smallest in it.
    """
    p_ref = cfmm.spot_price if p_ref is None else p_ref
    pool, total = cfmm, 0.0
    for lo, hi in partition:
        chunk = trades[lo:hi]
        size = math.fsum(t.delta for t in chunk)
        if size == 0:
            continue
        res = execute_signed(pool, Trade(size, min(t.eta for t in chunk)), p_ref)
        total += res.pnl
        pool = res.reserves_after
    return total


def check_strong_locality_bruteforce(cfmm, trades, max_n=12, *, rtol=1e-12):
    """True iff no contiguous bundling beats sandwiching every trade alone.

    ``rtol`` absorbs rounding when a bundling ties the individual total.
    """
    n = len(trades)
    if n > max_n:
        raise TooManyTrades(f"{n} trades exceeds max_n={max_n}")
    p_ref = cfmm.spot_price
    singles = [(i, i + 1) for i in range(n)]
    base = simulate_bundles(cfmm, trades, singles, p_ref)
    slack = rtol * (abs(base) + math.fsum(abs(t.delta) for t in trades))
    for part in contiguous_partitions(n):
        if len(part) == n:
            continue
        if simulate_bundles(cfmm, trades, part, p_ref) > base + slack:
            return False
    return True
