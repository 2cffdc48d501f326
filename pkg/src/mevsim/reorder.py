"""Sandwiching a whole block of trades, and how much reordering it hurts.

Each trade in a sequence is sandwiched optimally against the pool as the
previous trades left it.  The cost of feudalism compares, over uniformly
random orderings of the block, the worst per-user change in extracted profit
with the average per-user change:

    CoF = E_pi[ max_i |PNL_pi(i) - PNL_i| ] / E_pi[ mean_i |PNL_pi(i) - PNL_i| ]

where PNL_pi(i) is what the attacker takes from user i when the block runs
in order pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .cfmm_core import Cfmm
from .errors import AssumptionViolated, DegenerateDenominator, InvalidConstants, NoSolution
from .sandwich import SandwichResult, Trade, execute_signed

__all__ = [
    "TradeSequence",
    "SequenceResult",
    "CofEstimate",
    "PnlBoundConstants",
    "SequenceBounds",
    "ScalingStudy",
    "simulate_sequence",
    "cof_estimate",
    "pnl_bound_constants",
    "pnl_sequence_bounds",
    "make_sequence",
    "cof_scaling_study",
    "substream",
]


@dataclass(frozen=True)
class TradeSequence:
    trades: tuple

    def __post_init__(self):
        object.__setattr__(self, "trades", tuple(self.trades))

    def __len__(self):
        return len(self.trades)

    @property
    def block_size(self):
        return 3 * len(self.trades)

    @property
    def eta_floor(self):
        return min(t.eta for t in self.trades)

    def permuted(self, order):
        return TradeSequence(tuple(self.trades[i] for i in order))


@dataclass(frozen=True)
class SequenceResult:
    results: tuple
    pnl: np.ndarray
    xi: np.ndarray
    drifts: np.ndarray
    final_reserves: Cfmm


@dataclass(frozen=True)
class CofEstimate:
    numerator: float
    denominator: float
    cof: float
    n_permutations: int
    seed: int
    n_trades: int
    samples: tuple = field(default=(), repr=False)


def substream(seed, *index):
    """Counter-based generator for one sample; independent of evaluation order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *index])))


def simulate_sequence(cfmm, seq, *, p_ref=None):
    """Sandwich every trade in order, carrying the pool forward.

    Reverse trades are sized with ``p_ref`` (default: the opening spot price)
    so that all profits are in input-token units.
    """
    p_ref = cfmm.spot_price if p_ref is None else p_ref
    pool = cfmm
    results, pnl, xi = [], [], []
    for i, trade in enumerate(seq.trades):
        try:
            res = execute_signed(pool, trade, p_ref)
        except NoSolution as exc:
            raise NoSolution(f"trade {i}: {exc}") from exc
        if trade.delta > 0:
            step = res.delta_sand + trade.delta - res.delta_sand_prime
        else:
            step = res.reserves_after.reserves_in - pool.reserves_in
        results.append(res)
        pnl.append(res.pnl)
        xi.append(step)
        pool = res.reserves_after
    xi = np.array(xi)
    return SequenceResult(tuple(results), np.array(pnl), xi, np.cumsum(xi), pool)


def _pnls(cfmm, trades, p_ref):
    # hot loop of the Monte Carlo; skips building SequenceResult
    pool, out = cfmm, []
    for t in trades:
        res = execute_signed(pool, t, p_ref)
        out.append(res.pnl)
        pool = res.reserves_after
    return out


def _permutation_stats(cfmm, trades, base, order, p_ref):
    perm_pnl = _pnls(cfmm, [trades[i] for i in order], p_ref)
    diffs = [0.0] * len(trades)
    for slot, original in enumerate(order):
        diffs[original] = abs(perm_pnl[slot] - base[original])
    return max(diffs), math.fsum(diffs) / len(diffs)


def _orders(n, k, seed, replace):
    if not replace:
        total = math.factorial(n)
        if k > total:
            raise ValueError(f"cannot draw {k} distinct orderings of {n} trades")
        if k == total:
            all_orders = list(permutations(range(n)))
            shuffle = substream(seed, 0).permutation(total)
            yield from (all_orders[j] for j in shuffle)
            return
        seen = set()
        for s in range(k):
            attempt = 0
            while True:
                order = tuple(int(v) for v in substream(seed, s, attempt).permutation(n))
                attempt += 1
                if order not in seen:
                    seen.add(order)
                    break
            yield order
        return
    for s in range(k):
        yield tuple(int(v) for v in substream(seed, s).permutation(n))


def cof_estimate(cfmm, seq, n_permutations, seed, *, replace=True, exhaustive=False):
    """Monte Carlo estimate of the cost of feudalism.

    ``exhaustive`` enumerates all n! orderings instead of sampling.
    ``replace=False`` samples distinct orderings; with K = n! that is the
    full enumeration in a seeded random order.
    Sums use ``math.fsum`` so the estimate does not depend on sample order.
    """
    n = len(seq)
    trades = list(seq.trades)
    p_ref = cfmm.spot_price
    base = _pnls(cfmm, trades, p_ref)
    if exhaustive:
        orders = list(permutations(range(n)))
    else:
        if n_permutations < 1:
            raise ValueError("need at least one permutation")
        orders = list(_orders(n, n_permutations, seed, replace))
    samples = tuple(_permutation_stats(cfmm, trades, base, o, p_ref) for o in orders)
    k = len(samples)
    num = math.fsum(s[0] for s in samples) / k
    den = math.fsum(s[1] for s in samples) / k
    scale = math.fsum(abs(p) for p in base) / max(n, 1)
    if den <= 1e-14 * scale or den == 0:
        raise DegenerateDenominator(
            f"mean profit change is {den!r}: every ordering gives every user the same profit"
        )
    return CofEstimate(num, den, num / den, k, seed, n, samples)


@dataclass(frozen=True)
class PnlBoundConstants:
    """Constants of the sequence profit bounds.

    With p_i = (a - 1) * delta_i + b,
        PNL_i <= p_i + delta_i + c * sum_{l < i} p_l * d**(i - l - 1)
        PNL_i >= delta_i + e**i
    and a = -(mu/kappa)(nu + 1), b = (mu/kappa)(kappa/beta - g0),
    c = 2 + mu*nu/kappa, d = 3 + mu*nu/kappa, e = mu / (mu + kappa*gamma).
    ``nu`` and ``gamma`` are the quadratic-root ratios, evaluated at a
    representative trade size and drift.
    """

    a: float
    b: float
    c: float
    d: float
    e: float
    nu: float
    gamma: float
    mu: float
    kappa: float
    beta: float
    g0: float
    valid: dict

    @property
    def ok(self):
        return all(self.valid.values())


def _root_ratio(scale, beta, g0, delta, drift, eta, sign):
    """Quadratic root over its bracket term, for smoothness constant ``scale``.

    root = (scale/beta - D - g0) + sign*sqrt((D + g0 - scale)**2 - 2*beta*c)
    with D = delta + drift and
    c = beta/2 * D**2 + (g0 - (1 + eta)*scale)*delta + (g0 - scale)*drift.
    """
    base = scale / beta - delta - drift - g0
    s = delta + drift
    c = 0.5 * beta * s * s + (g0 - (1.0 + eta) * scale) * delta + (g0 - scale) * drift
    disc = (s + g0 - scale) ** 2 - 2.0 * beta * c
    if disc < 0 or base == 0:
        return math.nan
    return (base + sign * math.sqrt(disc)) / base


def pnl_bound_constants(curv, g0, eta, delta, drift=0.0):
    """Build the sequence bound constants from curvature and a reference trade."""
    mu, kappa, beta = curv.mu, curv.kappa, curv.beta
    if not (kappa > 0 and mu > kappa and beta > 0):
        raise InvalidConstants("need 0 < kappa < mu and beta > 0")
    gamma = _root_ratio(mu, beta, g0, delta, drift, eta, +1.0)
    nu = _root_ratio(kappa, beta, g0, delta, drift, eta, -1.0)
    ratio = mu / kappa
    a = -ratio * (nu + 1.0)
    b = ratio * (kappa / beta - g0)
    c = 2.0 + mu * nu / kappa
    d = 3.0 + mu * nu / kappa
    e = mu / (mu + kappa * gamma)
    valid = {
        "roots_real": math.isfinite(nu) and math.isfinite(gamma),
        "nu_negative": nu < 0,
        "gamma_positive": gamma > 0,
        "mu_ge_g0_beta": mu >= g0 * beta,
        "gamma_ge_mu_over_kappa_minus_1": kappa != 1 and gamma >= mu / (kappa - 1.0),
        "d_positive": d > 0,
        "e_below_one": 0 < e < 1,
    }
    return PnlBoundConstants(a, b, c, d, e, nu, gamma, mu, kappa, beta, g0, valid)


@dataclass(frozen=True)
class SequenceBounds:
    lb: np.ndarray
    ub: np.ndarray
    odd_index: np.ndarray
    drift_ok: bool
    compared: bool
    violations: tuple
    reason: str = ""


def pnl_sequence_bounds(constants, seq, simulated=None, *, drift_tol=0.05, strict=False):
    """Per-trade (lb, ub) on sandwich profit, optionally checked against a run.

    ``simulated`` is a SequenceResult.  The comparison only happens when the
    constants are valid and the drift stays small,
    max |u_i| <= drift_tol * sum |delta_j|.  Otherwise the bounds are still
    returned with ``compared`` False; ``strict`` turns that into an
    AssumptionViolated error.
    The lower bound uses the even-index form for every index; odd indices
    are flagged.
    """
    k = constants
    if not all(math.isfinite(v) for v in (k.a, k.b, k.c, k.d, k.e)):
        raise InvalidConstants("bound constants are not finite")
    deltas = np.array([abs(t.delta) for t in seq.trades])
    n = len(deltas)
    p = (k.a - 1.0) * deltas + k.b
    ub = np.empty(n)
    for i in range(n):
        # 0-based i here corresponds to index i + 1
        tail = math.fsum(p[l] * k.d ** (i - l - 1) for l in range(i))
        ub[i] = p[i] + deltas[i] + k.c * tail
    idx = np.arange(1, n + 1)
    lb = deltas + k.e**idx
    odd = idx % 2 == 1

    if simulated is None:
        return SequenceBounds(lb, ub, odd, False, False, (), "no simulation supplied")
    drift_ok = bool(np.max(np.abs(simulated.drifts)) <= drift_tol * deltas.sum())
    reason = ""
    if not k.ok:
        reason = "constants invalid: " + ", ".join(n_ for n_, v in k.valid.items() if not v)
    elif not drift_ok:
        reason = f"drift exceeds {drift_tol} of total volume"
    if reason:
        if strict:
            raise AssumptionViolated(reason)
        return SequenceBounds(lb, ub, odd, drift_ok, False, (), reason)
    pnl = simulated.pnl
    tol = 1e-12 * (1.0 + np.abs(pnl))
    bad = tuple(int(i) for i in np.nonzero((pnl < lb - tol) | (pnl > ub + tol))[0])
    return SequenceBounds(lb, ub, odd, drift_ok, True, bad)


def make_sequence(dist, n, rng):
    """Trade sequence of length n from a distribution.

    dist keys: ``kind`` in {constant, uniform, alternating}; ``eta``;
    ``delta`` (constant size) or ``low``/``high`` (uniform sizes).
    ``alternating`` flips the sign of every other trade.
    """
    kind = dist["kind"]
    eta = float(dist["eta"])
    if "low" in dist:
        sizes = rng.uniform(float(dist["low"]), float(dist["high"]), n)
    else:
        sizes = np.full(n, float(dist.get("delta", 1.0)))
    if kind == "alternating":
        sizes = sizes * np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    elif kind not in ("constant", "uniform"):
        raise ValueError(f"unknown sequence kind {kind!r}")
    return TradeSequence(tuple(Trade(float(s), eta) for s in sizes))


def _fit(x, y):
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else math.nan
    return float(coef[0]), float(coef[1]), r2


@dataclass(frozen=True)
class ScalingStudy:
    n_values: tuple
    estimates: tuple
    log_slope: float
    log_intercept: float
    log_r2: float
    lin_slope: float
    lin_intercept: float
    lin_r2: float

    @property
    def cof(self):
        return np.array([e.cof for e in self.estimates])

    @property
    def log_advantage(self):
        return self.log_r2 - self.lin_r2

    @property
    def ratio_spread(self):
        """max/min of cof / log2(n) over the grid."""
        r = self.cof / np.log2(np.array(self.n_values, float))
        return float(r.max() / r.min())


def cof_scaling_study(cfmm, dist, n_values, n_permutations, seed, *, depth=None):
    """CoF over a grid of block sizes, with log and linear fits in n.

    When ``depth`` is given the pool is rescaled for each n so that its input
    reserve is depth * sum |delta|, keeping the spot price of ``cfmm``.
    """
    estimates = []
    for n in n_values:
        if n < 2:
            raise ValueError("block sizes must be >= 2")
        seq = make_sequence(dist, n, substream(seed, 1, n))
        pool = cfmm
        if depth is not None:
            r = depth * math.fsum(abs(t.delta) for t in seq.trades)
            pool = cfmm.with_reserves(r, r * cfmm.reserves_out / cfmm.reserves_in)
        estimates.append(cof_estimate(pool, seq, n_permutations, seed))
    ns = np.array(n_values, float)
    y = np.array([e.cof for e in estimates])
    ls, li, lr = _fit(np.log(ns), y)
    ns_, ni, nr = _fit(ns, y)
    return ScalingStudy(tuple(n_values), tuple(estimates), ls, li, lr, ns_, ni, nr)
