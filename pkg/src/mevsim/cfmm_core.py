"""Two-asset constant function market makers (feeless).

A market maps an input amount to an output amount through its forward
exchange function G.  Three reserve-backed kinds are supported

    constant product   R * R' = k
    constant sum       output = c * input, until the output side runs dry
    weighted product   R**w * R'**(1-w) = k

plus ``FunctionEdge``, a stateless edge with G(x) = c * x**p that stands in
for the abstract congestion functions of routing examples.

All operations are pure; markets are frozen dataclasses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import (
    DomainViolation,
    NonPositiveReserves,
    OutputExceedsReserves,
    ReservesDepleted,
)
from .rootfind import bisect, expand_upper

__all__ = [
    "Kind",
    "Cfmm",
    "FunctionEdge",
    "CurvatureBounds",
    "forward_exchange",
    "forward_rate",
    "inverse_exchange",
    "apply_trade",
    "sell_output",
    "estimate_curvature",
    "combine_curvature",
    "has_price_impact",
]


class Kind(str, Enum):
    CONSTANT_PRODUCT = "constant_product"
    CONSTANT_SUM = "constant_sum"
    WEIGHTED_PRODUCT = "weighted_product"


@dataclass(frozen=True)
class Cfmm:
    kind: Kind
    reserves_in: float
    reserves_out: float
    rate: float | None = None
    weight: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        r, rp = self.reserves_in, self.reserves_out
        if not (math.isfinite(r) and math.isfinite(rp)):
            raise NonPositiveReserves("reserves must be finite")
        if self.kind is Kind.CONSTANT_SUM:
            if self.rate is None or not self.rate > 0:
                raise ValueError("constant sum needs rate c > 0")
            if r < 0 or rp < 0:
                raise NonPositiveReserves(f"reserves ({r}, {rp}) must be >= 0")
        else:
            if r <= 0 or rp <= 0:
                raise NonPositiveReserves(f"reserves ({r}, {rp}) must be > 0")
        if self.kind is Kind.WEIGHTED_PRODUCT:
            if self.weight is None or not 0 < self.weight < 1:
                raise ValueError("weighted product needs weight in (0, 1)")

    @classmethod
    def constant_product(cls, r, r_out):
        return cls(Kind.CONSTANT_PRODUCT, float(r), float(r_out))

    @classmethod
    def constant_sum(cls, r, r_out, rate=1.0):
        return cls(Kind.CONSTANT_SUM, float(r), float(r_out), rate=float(rate))

    @classmethod
    def weighted_product(cls, r, r_out, weight):
        return cls(Kind.WEIGHTED_PRODUCT, float(r), float(r_out), weight=float(weight))

    def with_reserves(self, r, r_out):
        return replace(self, reserves_in=r, reserves_out=r_out)

    def mirrored(self):
        """Same pool seen from the other token."""
        rate = None if self.rate is None else 1.0 / self.rate
        weight = None if self.weight is None else 1.0 - self.weight
        return Cfmm(self.kind, self.reserves_out, self.reserves_in, rate, weight)

    @property
    def spot_price(self):
        return forward_rate(self, 0.0)

    @property
    def _exponent(self):
        # R' scales as (R / (R + d)) ** a along the weighted invariant
        return self.weight / (1.0 - self.weight)


@dataclass(frozen=True)
class FunctionEdge:
    """Stateless edge with G(x) = coeff * x**power, 0 < power <= 1."""

    coeff: float = 1.0
    power: float = 1.0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.coeff > 0:
            raise ValueError("coeff must be > 0")
        if not 0 < self.power <= 1:
            raise ValueError("power must lie in (0, 1]")

    @classmethod
    def sqrt(cls):
        return cls(1.0, 0.5, "sqrt")

    @classmethod
    def linear(cls, coeff=1.0):
        return cls(float(coeff), 1.0, "linear")


@dataclass(frozen=True)
class CurvatureBounds:
    """Grid-certified curvature constants.

    ``mu``/``kappa`` bound G(d)/d over (0, M]; ``alpha``/``beta`` bound the
    price impact (g(-d) - g(0))/d over (0, M_price].  They hold at the grid
    points and are not proven between them.
    """

    alpha: float
    beta: float
    mu: float
    kappa: float
    trade_interval: tuple[float, float]
    grid_points: int
    price_interval: tuple[float, float] | None = None


def has_price_impact(market):
    if isinstance(market, FunctionEdge):
        return market.power < 1.0
    return market.kind is not Kind.CONSTANT_SUM


def _check_nonneg(delta):
    if not delta >= 0:
        raise DomainViolation(f"input amount must be >= 0, got {delta!r}")


def forward_exchange(market, delta):
    """Output received for ``delta`` of input token, G(delta)."""
    _check_nonneg(delta)
    if isinstance(market, FunctionEdge):
        return market.coeff * delta**market.power
    r, rp = market.reserves_in, market.reserves_out
    if market.kind is Kind.CONSTANT_PRODUCT:
        return rp * delta / (r + delta)
    if market.kind is Kind.CONSTANT_SUM:
        out = market.rate * delta
        if out > rp:
            raise ReservesDepleted(f"constant sum output {out!r} exceeds reserves {rp!r}")
        return out
    return -rp * math.expm1(-market._exponent * math.log1p(delta / r))


def forward_rate(market, delta):
    """Marginal price g(delta) = dG/d(delta); negative delta is allowed where defined."""
    if isinstance(market, FunctionEdge):
        if delta < 0 or (delta == 0 and market.power < 1):
            raise DomainViolation("function edge rate undefined at or below 0")
        return market.coeff * market.power * delta ** (market.power - 1.0)
    r, rp = market.reserves_in, market.reserves_out
    if market.kind is Kind.CONSTANT_SUM:
        if delta < -r or market.rate * delta > rp:
            raise DomainViolation("outside constant sum domain")
        return market.rate
    if not r + delta > 0:
        raise DomainViolation(f"need R + delta > 0, got {r + delta!r}")
    if market.kind is Kind.CONSTANT_PRODUCT:
        return r * rp / (r + delta) ** 2
    a = market._exponent
    return rp * a / (r + delta) * (r / (r + delta)) ** a


def inverse_exchange(market, out):
    """Input needed to receive ``out`` of output token, G^-1(out)."""
    if not out >= 0:
        raise DomainViolation(f"output amount must be >= 0, got {out!r}")
    if out == 0:
        return 0.0
    if isinstance(market, FunctionEdge):
        return (out / market.coeff) ** (1.0 / market.power)
    r, rp = market.reserves_in, market.reserves_out
    if market.kind is Kind.CONSTANT_SUM:
        if out > rp:
            raise OutputExceedsReserves(f"{out!r} > reserves {rp!r}")
        return out / market.rate
    if out >= rp:
        raise OutputExceedsReserves(f"{out!r} >= reserves {rp!r}")
    if market.kind is Kind.CONSTANT_PRODUCT:
        return out * r / (rp - out)

    def resid(d):
        return forward_exchange(market, d) - out

    hi, fhi = expand_upper(resid, 0.0, max(r, 1e-300), cap=1e300, flo=-out)
    return bisect(resid, 0.0, hi, flo=-out, fhi=fhi, rtol=1e-12, maxiter=200)


def apply_trade(market, delta):
    """Pool after a trade of signed ``delta`` in the input token.

    delta > 0 sells input into the pool.  delta < 0 withdraws |delta| of the
    input token, paid for in output token.  The output reserve is computed
    from the invariant itself so that it is preserved to rounding.
    """
    if isinstance(market, FunctionEdge):
        raise DomainViolation("function edges carry no reserves")
    if delta == 0:
        return market
    r, rp = market.reserves_in, market.reserves_out
    r_new = r + delta
    if market.kind is Kind.CONSTANT_SUM:
        rp_new = rp - market.rate * delta
        if r_new < 0 or rp_new < 0:
            raise ReservesDepleted(f"constant sum trade {delta!r} depletes reserves")
        return market.with_reserves(r_new, rp_new)
    if not r_new > 0:
        raise ReservesDepleted(f"trade {delta!r} would empty the input reserve")
    if market.kind is Kind.CONSTANT_PRODUCT:
        return market.with_reserves(r_new, rp * (r / r_new))
    return market.with_reserves(r_new, rp * (r / r_new) ** market._exponent)


def sell_output(market, amount):
    """Sell ``amount`` of output token into the pool.

    Returns (input token received, pool after the trade).
    """
    mirror = market.mirrored()
    received = forward_exchange(mirror, amount)
    return received, apply_trade(mirror, amount).mirrored()


def estimate_curvature(market, m, n_grid=64, *, m_price=None):
    """Grid estimate of (alpha, beta, mu, kappa).

    The quantity side uses G(d)/d for d = m/n, 2m/n, ..., m together with its
    limit g(0) at d -> 0.  The price side uses (g(-d) - g(0))/d over the
    same points in (0, m_price] (default ``m``) plus d = 1e-6 * m_price.  The price side needs the pool to be able to pay out
    m_price of input token, so it requires m_price < R.
    """
    if not m > 0:
        raise ValueError("m must be > 0")
    if n_grid < 16:
        raise ValueError("n_grid must be >= 16")
    m_price = m if m_price is None else m_price
    grid = m * np.arange(1, n_grid + 1) / n_grid
    try:
        ratios = np.array([forward_exchange(market, d) / d for d in grid])
    except ReservesDepleted as exc:
        raise DomainViolation(str(exc)) from exc
    # the d -> 0 ends: G(d)/d tends to g(0), and the price side is sampled
    # once very close to 0 so the extremes are not cut off by the grid
    pgrid = m_price * np.concatenate([[1e-6], np.arange(1, n_grid + 1) / n_grid])
    g0 = forward_rate(market, 0.0)
    impact = np.array([(forward_rate(market, -d) - g0) / d for d in pgrid])
    return CurvatureBounds(
        alpha=float(impact.max()),
        beta=float(max(impact.min(), 0.0)),
        mu=float(max(ratios.max(), g0)),
        kappa=float(ratios.min()),
        trade_interval=(0.0, float(m)),
        grid_points=int(n_grid),
        price_interval=(0.0, float(m_price)),
    )


def combine_curvature(bounds):
    """Uniform constants valid for every member of ``bounds``."""
    bounds = list(bounds)
    return CurvatureBounds(
        alpha=max(b.alpha for b in bounds),
        beta=min(b.beta for b in bounds),
        mu=max(b.mu for b in bounds),
        kappa=min(b.kappa for b in bounds),
        trade_interval=(0.0, min(b.trade_interval[1] for b in bounds)),
        grid_points=min(b.grid_points for b in bounds),
        price_interval=(0.0, min((b.price_interval or b.trade_interval)[1] for b in bounds)),
    )
