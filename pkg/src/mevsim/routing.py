"""Routing a trade through a network of markets, with and without sandwiching.

Vertices are tokens and every edge is a market (a ``Cfmm`` or a
``FunctionEdge``).  A trade of size ``amount`` from ``source`` to ``sink`` is
split over the simple paths between them.  Where paths share an edge, their
inputs are pooled into one trade and the output is handed back in proportion
to each path's share of the input.

Sandwiching model
-----------------
A path carrying a user slippage limit eta is attacked on its first edge that
is marked ``attackable`` and has price impact.  That edge runs as an
aggregate sandwich with edge slippage eta_e, so it outputs (1 - eta_e) times
its unsandwiched output.  eta_e is solved so the path's delivered output is
exactly (1 - eta) times what it would deliver unsandwiched.  When several
paths share an attacked edge the tightest (smallest) requirement wins, and
coupled edges are iterated to a fixed point.

Solvers
-------
``optimal_route`` maximises total delivered output over the scaled simplex
by projected gradient ascent.  ``selfish_route`` finds a split where every
used path has the same average price (output per unit input) and no unused
path offers a better price to a marginal trader.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from itertools import combinations

import numpy as np
from scipy.optimize import brentq, root

from .cfmm_core import (
    Cfmm,
    FunctionEdge,
    estimate_curvature,
    forward_exchange,
    has_price_impact,
)
from .errors import (
    ConvergenceFailure,
    CyclicGraph,
    DegenerateConstants,
    InvalidCurvature,
    NoPath,
    NoSolution,
)
from .rootfind import bisect, expand_upper
from .sandwich import Trade, optimal_sandwich, sandwich_pnl

__all__ = [
    "Edge",
    "TokenGraph",
    "Network",
    "NetworkState",
    "PathSandwich",
    "RouteResult",
    "WelfareResult",
    "SmoothnessBound",
    "enumerate_paths",
    "evaluate_network",
    "project_to_simplex",
    "optimal_route",
    "selfish_route",
    "path_sandwich",
    "path_sandwich_bounds",
    "welfare_and_poa",
    "poa_smoothness_bound",
    "pigou_graph",
    "braess_graph",
    "pigou_curvature",
]


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    market: Cfmm | FunctionEdge
    name: str = ""
    attackable: bool | None = None

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError(f"self-loop on {self.src!r}")
        if self.attackable is None:
            object.__setattr__(self, "attackable", isinstance(self.market, Cfmm))


@dataclass(frozen=True)
class TokenGraph:
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))

    @property
    def vertices(self):
        seen = []
        for e in self.edges:
            for v in (e.src, e.dst):
                if v not in seen:
                    seen.append(v)
        return tuple(seen)


def _relevant_edges(graph, source, sink):
    fwd, back = {source}, {sink}
    changed = True
    while changed:
        changed = False
        for e in graph.edges:
            if e.src in fwd and e.dst not in fwd:
                fwd.add(e.dst)
                changed = True
            if e.dst in back and e.src not in back:
                back.add(e.src)
                changed = True
    return [i for i, e in enumerate(graph.edges) if e.src in fwd and e.dst in back]


def _topological_vertices(graph, edge_ids):
    ts = TopologicalSorter()
    for i in edge_ids:
        e = graph.edges[i]
        ts.add(e.dst, e.src)
    try:
        return list(ts.static_order())
    except CycleError as exc:
        raise CyclicGraph(f"cycle between source and sink: {exc.args[1]}") from exc


def enumerate_paths(graph, source, sink):
    """All simple source-to-sink paths as tuples of edge indices.

    Ordered by length, then lexicographically by edge index.
    """
    edge_ids = _relevant_edges(graph, source, sink)
    _topological_vertices(graph, edge_ids)
    out_edges = {}
    for i in edge_ids:
        out_edges.setdefault(graph.edges[i].src, []).append(i)
    paths = []

    def walk(v, acc):
        if v == sink:
            paths.append(tuple(acc))
            return
        for i in out_edges.get(v, ()):
            walk(graph.edges[i].dst, acc + [i])

    if source != sink:
        walk(source, [])
    if not paths:
        raise NoPath(f"no path from {source!r} to {sink!r}")
    return sorted(paths, key=lambda p: (len(p), p))


@dataclass(frozen=True)
class NetworkState:
    path_out: np.ndarray
    edge_in: dict
    edge_out: dict
    edge_eta: dict = field(default_factory=dict)
    pnl: float = 0.0

    @property
    def total(self):
        return math.fsum(self.path_out)


class Network:
    """A source/sink query on a graph, with its paths and evaluation order."""

    def __init__(self, graph, source, sink):
        self.graph = graph
        self.source = source
        self.sink = sink
        self.paths = enumerate_paths(graph, source, sink)
        used = sorted({i for p in self.paths for i in p})
        rank = {v: k for k, v in enumerate(_topological_vertices(graph, used))}
        self.edge_order = sorted(used, key=lambda i: (rank[graph.edges[i].src], i))
        self.through = {i: [k for k, p in enumerate(self.paths) if i in p] for i in used}
        self.attack_edge = []
        for p in self.paths:
            hit = None
            for i in p:
                e = graph.edges[i]
                if e.attackable and has_price_impact(e.market):
                    hit = i
                    break
            self.attack_edge.append(hit)

    @property
    def n_paths(self):
        return len(self.paths)

    def evaluate(self, alpha, scale=None):
        """Path outputs for split ``alpha``; ``scale`` multiplies edge outputs."""
        flow = [float(a) for a in alpha]
        edge_in, edge_out = {}, {}
        edges = self.graph.edges
        for i in self.edge_order:
            ps = self.through[i]
            ins = [flow[k] for k in ps]
            total = math.fsum(ins)
            out = forward_exchange(edges[i].market, total) if total > 0 else 0.0
            if scale is not None and i in scale:
                out *= scale[i]
            edge_in[i], edge_out[i] = total, out
            for k, x in zip(ps, ins):
                flow[k] = out * (x / total) if total > 0 else 0.0
        return NetworkState(np.array(flow), edge_in, edge_out)

    def path_output(self, alpha, k, x, scale=None):
        """Output of path k when its input is x and the other paths keep alpha."""
        a = np.array(alpha, dtype=float)
        a[k] = x
        return self.evaluate(a, scale).path_out[k]

    def _etas(self, eta):
        e = np.broadcast_to(np.asarray(eta, dtype=float), (self.n_paths,))
        if np.any(e < 0) or np.any(e >= 1):
            raise ValueError("slippage limits must lie in [0, 1)")
        return e

    def implied_edge_slippage(self, alpha, eta, *, tol=1e-15, max_sweeps=200):
        """Edge slippage on each attacked edge that meets every path's limit."""
        etas = self._etas(eta)
        plain = self.evaluate(alpha).path_out
        groups = {}
        for k, i in enumerate(self.attack_edge):
            if i is not None and etas[k] > 0:
                groups.setdefault(i, []).append(k)
        if not groups:
            return {}
        cur = {i: min(etas[k] for k in ks) for i, ks in groups.items()}
        order = [i for i in self.edge_order if i in groups]

        def direct(i, k):
            # attacked edge is the path's last and nobody else uses it
            return self.paths[k][-1] == i and len(self.through[i]) == 1

        for _ in range(max_sweeps):
            change = 0.0
            for i in order:
                need = []
                for k in groups[i]:
                    if alpha[k] <= 0 or plain[k] <= 0:
                        continue
                    if direct(i, k):
                        need.append(etas[k])
                        continue
                    target = (1.0 - etas[k]) * plain[k]

                    def gap(s, i=i, k=k):
                        sc = {j: 1.0 - v for j, v in cur.items()}
                        sc[i] = 1.0 - s
                        return self.evaluate(alpha, sc).path_out[k] - target

                    g0 = gap(0.0)
                    if g0 <= 0:
                        need.append(0.0)
                        continue
                    need.append(brentq(gap, 0.0, 1.0, xtol=1e-16, rtol=1e-15))
                new = min(need) if need else min(etas[k] for k in groups[i])
                change = max(change, abs(new - cur[i]))
                cur[i] = new
            if change <= tol:
                return cur
        raise ConvergenceFailure("edge slippage iteration did not settle")

    def state(self, alpha, eta=0.0, sandwiched=False):
        """Evaluate the network, sandwiched or not, including attacker profit."""
        alpha = np.asarray(alpha, dtype=float)
        if not sandwiched:
            return self.evaluate(alpha)
        etas = self.implied_edge_slippage(alpha, eta)
        st = self.evaluate(alpha, {i: 1.0 - v for i, v in etas.items()})
        edges = self.graph.edges
        pnl = math.fsum(
            sandwich_pnl(edges[i].market, st.edge_in[i], v) for i, v in etas.items() if st.edge_in[i] > 0
        )
        return NetworkState(st.path_out, st.edge_in, st.edge_out, etas, pnl)

    def welfare(self, alpha, eta=0.0, sandwiched=False):
        return self.state(alpha, eta, sandwiched).total


def evaluate_network(graph, paths, alpha, source=None, sink=None):
    """Per-path outputs of split ``alpha`` over ``paths`` (pro-rata at shared edges)."""
    if source is None:
        source = graph.edges[paths[0][0]].src
        sink = graph.edges[paths[0][-1]].dst
    net = Network(graph, source, sink)
    if [tuple(p) for p in paths] != net.paths:
        index = {p: k for k, p in enumerate(net.paths)}
        full = np.zeros(net.n_paths)
        for p, a in zip(paths, alpha):
            full[index[tuple(p)]] = a
        out = net.evaluate(full).path_out
        return np.array([out[index[tuple(p)]] for p in paths])
    return net.evaluate(alpha).path_out


def project_to_simplex(v, total):
    """Euclidean projection of v onto {x >= 0, sum x = total}."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    idx = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    x = np.maximum(v - theta, 0.0)
    # put rounding drift on the largest coordinate so the sum is exact
    x[np.argmax(x)] += total - math.fsum(x)
    return x


@dataclass(frozen=True)
class RouteResult:
    alpha: np.ndarray
    total: float
    path_out: np.ndarray
    pnl: float
    edge_eta: dict
    iterations: int
    certificate: dict


def _gradient(f, x, h):
    g = np.empty_like(x)
    for k in range(len(x)):
        up = x.copy()
        up[k] += h
        if x[k] >= h:
            dn = x.copy()
            dn[k] -= h
            g[k] = (f(up) - f(dn)) / (2 * h)
        else:
            g[k] = (f(up) - f(x)) / h
    return g


def optimal_route(network, amount, eta=0.0, sandwiched=False, *, max_iter=100_000, tol=1e-13):
    """Split that maximises delivered output.

    Projected gradient ascent with Barzilai-Borwein steps and Armijo
    backtracking; gradients by finite differences.  Returns a KKT report in
    ``certificate``.
    """
    n = network.n_paths
    if n == 1:
        alpha = np.array([float(amount)])
        st = network.state(alpha, eta, sandwiched)
        return RouteResult(alpha, st.total, st.path_out, st.pnl, st.edge_eta, 0, {"kkt": True})

    def f(a):
        return network.welfare(a, eta, sandwiched)

    h = 1e-7 * amount
    x = np.full(n, amount / n)
    fx = f(x)
    g = _gradient(f, x, h)
    step = amount
    it = 0
    for it in range(1, max_iter + 1):
        t = step
        while True:
            y = project_to_simplex(x + t * g, amount)
            fy = f(y)
            if fy >= fx + 1e-4 * g.dot(y - x) or t < 1e-20:
                break
            t *= 0.5
        moved = np.max(np.abs(y - x))
        if fy <= fx and moved <= 1e-6 * amount:
            break  # line search stalled on gradient noise
        gy = _gradient(f, y, h)
        s, r = y - x, gy - g
        x, fx, g = y, fy, gy
        if moved <= tol * amount:
            break
        sr = s.dot(r)
        step = s.dot(s) / -sr if sr < 0 else amount
        step = min(max(step, 1e-12), 1e6)
    else:
        raise ConvergenceFailure(f"optimal route did not converge in {max_iter} iterations")

    cert = _kkt(g, x, amount)
    st = network.state(x, eta, sandwiched)
    return RouteResult(x, st.total, st.path_out, st.pnl, st.edge_eta, it, cert)


def _kkt(grad, x, amount, rtol=1e-6):
    on = x > 1e-9 * amount
    top = grad[on]
    spread = float((top.max() - top.min()) / abs(top.max())) if top.size else 0.0
    best_off = float(grad[~on].max()) if (~on).any() else -math.inf
    return {
        "kkt": bool(spread <= rtol and best_off <= top.max() * (1 + rtol)),
        "support_spread": spread,
        "marginal": grad.tolist(),
    }


def _average_prices(network, alpha, eta, sandwiched, amount):
    """Average price per path; unused paths get the price a tiny entrant sees."""
    st = network.state(alpha, eta, sandwiched)
    avg = np.empty(network.n_paths)
    eps = 1e-9 * amount
    for k in range(network.n_paths):
        if alpha[k] > 0:
            avg[k] = st.path_out[k] / alpha[k]
        else:
            a = np.array(alpha, dtype=float)
            a[k] = eps
            avg[k] = network.state(a, eta, sandwiched).path_out[k] / eps
    return avg, st


def _equilibrium_ok(avg, support, rtol):
    inside = avg[list(support)]
    ref = inside.max()
    if (ref - inside.min()) > rtol * abs(ref):
        return False
    outside = [avg[k] for k in range(len(avg)) if k not in support]
    return all(o <= ref * (1 + 1e-9) + 1e-15 for o in outside)


def _fixed_point(
    network, alpha, support, eta, sandwiched, amount, damping=0.5, tol=1e-10, max_iter=100_000, strict=True
):
    a = np.array(alpha, dtype=float)
    idx = list(support)
    for _ in range(max_iter):
        avg, st = _average_prices(network, a, eta, sandwiched, amount)
        mean = st.total / amount
        sub = avg[idx]
        if (sub.max() - sub.min()) <= tol * abs(sub.max()):
            return a
        new = a.copy()
        new[idx] = a[idx] * avg[idx] / mean
        new = project_to_simplex(new, amount)
        a = damping * a + (1 - damping) * new
        if np.min(a[idx]) <= 1e-12 * amount:
            return a
    if strict:
        raise ConvergenceFailure("equilibrium fixed point did not converge")
    return a


def _solve_support(network, support, eta, sandwiched, amount):
    """Interior equal-price split on ``support``, or None if there is none."""
    n = network.n_paths
    idx = list(support)
    if len(idx) == 1:
        a = np.zeros(n)
        a[idx[0]] = amount
        return a
    eps = 1e-12 * amount
    if len(idx) == 2:
        p, q = idx

        def split(t):
            a = np.zeros(n)
            a[p], a[q] = t, amount - t
            return a

        def diff(t):
            avg, _ = _average_prices(network, split(t), eta, sandwiched, amount)
            return avg[p] - avg[q]

        lo, hi = eps, amount - eps
        flo, fhi = diff(lo), diff(hi)
        if flo == 0 or fhi == 0 or (flo > 0) != (fhi > 0):
            return split(bisect(diff, lo, hi, flo=flo, fhi=fhi, rtol=1e-15))
        return None
    def eqs(z):
        b = np.zeros(n)
        b[idx[:-1]] = z
        b[idx[-1]] = amount - z.sum()
        if np.any(b[idx] <= 0):
            return np.full(len(z), 1e3)
        avg, _ = _average_prices(network, b, eta, sandwiched, amount)
        return avg[idx[:-1]] - avg[idx[-1]]

    start = np.zeros(n)
    start[idx] = amount / len(idx)
    starts = [_fixed_point(network, start, support, eta, sandwiched, amount, max_iter=2000, strict=False)]
    # warm starts from each face of the support, nudged inside
    for face in combinations(idx, len(idx) - 1):
        a = _solve_support(network, face, eta, sandwiched, amount)
        if a is not None:
            missing = [k for k in idx if k not in face][0]
            for frac in (1e-3, 1e-6):
                b = a * (1 - frac)
                b[missing] = frac * amount
                starts.append(b)
    for a in starts:
        if np.min(a[idx]) <= 0:
            continue
        sol = root(eqs, a[idx[:-1]], method="hybr", options={"xtol": 1e-14})
        b = np.zeros(n)
        b[idx[:-1]] = sol.x
        b[idx[-1]] = amount - sol.x.sum()
        if sol.success and np.all(b[idx] > 0):
            return b
    return None


def selfish_route(network, amount, eta=0.0, sandwiched=False, *, rtol=1e-8):
    """Equilibrium split: equal average price on used paths, none better unused.

    Up to three paths, every support is tried from smallest to largest and
    the first that certifies is returned.  Larger instances run the damped
    fixed point on all paths and read the support off the result.
    """
    n = network.n_paths
    if n <= 3:
        candidates = [s for r in range(1, n + 1) for s in combinations(range(n), r)]
    else:
        a = _fixed_point(network, np.full(n, amount / n), range(n), eta, sandwiched, amount)
        support = tuple(k for k in range(n) if a[k] > 1e-9 * amount)
        candidates = [support]
    for support in candidates:
        a = _solve_support(network, support, eta, sandwiched, amount)
        if a is None:
            continue
        avg, st = _average_prices(network, a, eta, sandwiched, amount)
        if _equilibrium_ok(avg, support, rtol):
            cert = {"support": list(support), "avg_price": avg.tolist()}
            return RouteResult(a, st.total, st.path_out, st.pnl, st.edge_eta, 0, cert)
    raise ConvergenceFailure("no equilibrium split certified")


@dataclass(frozen=True)
class PathSandwich:
    path: tuple
    edge_eta: tuple
    edge_sandwich: tuple
    delta_sand: float
    output: float
    unsandwiched_output: float
    root_choice: str = "smallest nonnegative root"


def path_sandwich(network, k, alpha, eta):
    """Attack on path k at split alpha.

    ``delta_sand`` is the front-run x on the path as a whole (other paths
    held fixed) with G_p(alpha_k + x) - G_p(x) = (1 - eta) G_p(alpha_k);
    it is 0 when the path has no attackable edge.
    """
    alpha = np.asarray(alpha, dtype=float)
    path = network.paths[k]
    if alpha[k] <= 0:
        raise ValueError("path input must be positive")
    etas = np.zeros(network.n_paths)
    etas[k] = eta
    plain = network.evaluate(alpha).path_out[k]
    if eta == 0 or network.attack_edge[k] is None:
        zeros = tuple(0.0 for _ in path)
        return PathSandwich(path, zeros, zeros, 0.0, plain, plain)
    edge_eta = network.implied_edge_slippage(alpha, etas)
    st = network.evaluate(alpha, {i: 1.0 - v for i, v in edge_eta.items()})
    edges = network.graph.edges
    per_edge_eta, per_edge_x = [], []
    for i in path:
        v = edge_eta.get(i, 0.0)
        per_edge_eta.append(v)
        x = optimal_sandwich(edges[i].market, Trade(st.edge_in[i], v)) if v > 0 else 0.0
        per_edge_x.append(x)

    target = (1.0 - eta) * plain

    def resid(x):
        return network.path_output(alpha, k, alpha[k] + x, None) - network.path_output(alpha, k, x, None) - target

    f0 = eta * plain
    try:
        hi, fhi = expand_upper(resid, 0.0, alpha[k], cap=1e6 * alpha[k], flo=f0)
        x = bisect(resid, 0.0, hi, flo=f0, fhi=fhi, rtol=1e-15)
    except Exception as exc:  # path composite has no usable root
        raise NoSolution(f"path {k}: {exc}") from exc
    return PathSandwich(path, tuple(per_edge_eta), tuple(per_edge_x), x, st.path_out[k], plain)


def path_sandwich_bounds(curv, n_edges, eta, alpha_p, g0):
    """Bounds f**|p| * alpha_p >= delta_sand_p >= g**|p| * alpha_p.

    f and g are the single-edge factors: f = eta*mu/(mu - kappa) - 1 and
    g = (mu/beta - alpha_p) * zeta / alpha_p with zeta the root bracket of
    the single-trade lower bound.  For one edge these are exactly the
    single-trade bounds.
    Returns (lower, upper, f, g, valid).
    """
    mu, kappa, beta = curv.mu, curv.kappa, curv.beta
    if not (kappa > 0 and mu > kappa):
        raise InvalidCurvature("need 0 < kappa < mu")
    f = eta * mu / (mu - kappa) - 1.0
    if beta > 0:
        denom = mu - kappa * alpha_p
        disc = 1.0 + beta * alpha_p * (1.0 + (eta * mu + g0) / denom) if denom != 0 else math.nan
        zeta = 1.0 + math.sqrt(disc) if disc >= 0 else math.nan
        g = (mu / beta - alpha_p) * zeta / alpha_p
    else:
        g = math.nan
    valid = {
        "upper": eta >= 1.0 - kappa / mu,
        "lower": beta > 0 and alpha_p < mu / beta and math.isfinite(g),
    }
    return g**n_edges * alpha_p, f**n_edges * alpha_p, f, g, valid


@dataclass(frozen=True)
class WelfareResult:
    optimal: RouteResult
    equilibrium: RouteResult
    poa: float

    @property
    def w_opt(self):
        return self.optimal.total

    @property
    def w_eq(self):
        return self.equilibrium.total


def welfare_and_poa(network, amount, eta=0.0, sandwiched=True):
    """Sandwiched welfare at the optimum and at equilibrium, and their ratio."""
    opt = optimal_route(network, amount, eta, sandwiched)
    eq = selfish_route(network, amount, eta, sandwiched)
    return WelfareResult(opt, eq, opt.total / eq.total)


@dataclass(frozen=True)
class SmoothnessBound:
    lam: float
    nu: float
    bound: float
    flagged: bool
    reason: str = ""


def poa_smoothness_bound(curv, f_val, g_val, n_edges):
    """PoA <= (1 - lambda)/nu with lambda = nu = A/B,

    A = kappa + kappa*g**n - mu*f**n,  B = mu + mu*f**n - kappa*g**n.
    Raises DegenerateConstants when A or B is not positive.  A bound below 1
    cannot hold for any instance, so it is returned with ``flagged`` set.
    """
    mu, kappa = curv.mu, curv.kappa
    fn, gn = f_val**n_edges, g_val**n_edges
    num = kappa + kappa * gn - mu * fn
    den = mu + mu * fn - kappa * gn
    if not (num > 0 and den > 0):
        raise DegenerateConstants(f"coefficients not positive: A={num!r}, B={den!r}")
    lam = num / den
    bound = (1.0 - lam) / lam
    flagged = bound < 1.0
    return SmoothnessBound(lam, lam, bound, flagged, "bound below 1" if flagged else "")


def pigou_graph(r=1.0, r_out=2.0, rate=1.0, depth=1e9):
    """Two parallel edges A->B: a constant product pool and a constant sum pool.

    The constant sum pool gets ``depth`` reserves so it never runs dry.
    """
    return TokenGraph(
        (
            Edge("A", "B", Cfmm.constant_product(r, r_out), "cfmm1"),
            Edge("A", "B", Cfmm.constant_sum(depth, depth * rate, rate), "cfmm2"),
        )
    )


def braess_graph(middle=True, r=1.0, r_out=2.0):
    """Square A->C->B, A->D->B with sqrt and linear legs, plus an optional C->D pool."""
    edges = [
        Edge("A", "C", FunctionEdge.sqrt(), "g1"),
        Edge("C", "B", FunctionEdge.linear(), "g2"),
        Edge("A", "D", FunctionEdge.linear(), "g3"),
        Edge("D", "B", FunctionEdge.sqrt(), "g4"),
    ]
    if middle:
        edges.append(Edge("C", "D", Cfmm.constant_product(r, r_out), "g5"))
    return TokenGraph(tuple(edges))


def pigou_curvature(graph, amount, n_grid=64):
    """Uniform curvature for the routing bound, plus the attacked path's own.

    Quantity constants cover every edge over (0, amount]; the price-impact
    constants come from the constant product edge over (0, R/2].
    """
    from .cfmm_core import combine_curvature

    per_edge = []
    attacked = None
    for e in graph.edges:
        m_price = min(amount, 0.5 * e.market.reserves_in) if isinstance(e.market, Cfmm) else amount
        c = estimate_curvature(e.market, amount, n_grid, m_price=m_price)
        per_edge.append(c)
        if e.attackable and has_price_impact(e.market):
            attacked = c
    return combine_curvature(per_edge), attacked
