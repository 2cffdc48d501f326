"""Scenario files, experiment drivers and the ``mevsim`` command line.

A scenario is a JSON document (schema below).  Every section is optional;
missing sections fall back to the defaults of the command being run, which
describe the textbook instances: the Pigou pair of pools, the Braess square,
a deep constant product pool for reordering, and a (1, 2) pool for the
single-trade reports.

Exit codes: 0 success, 1 other library error, 2 convergence failure,
3 degenerate statistic, 4 scenario validation error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .cfmm_core import Cfmm, FunctionEdge, estimate_curvature, forward_rate
from .errors import ConvergenceFailure, DegenerateDenominator, MevsimError, ScenarioError
from .reorder import cof_scaling_study
from .routing import Edge, Network, TokenGraph, optimal_route, selfish_route, welfare_and_poa
from .sandwich import Trade, compute_pnl_bounds, execute_sandwich

__all__ = [
    "SCENARIO_SCHEMA",
    "DEFAULTS",
    "load_scenario",
    "validate_scenario",
    "parse_grid",
    "build_market",
    "build_network",
    "run_pigou_sweep",
    "run_braess_sweep",
    "run_reorder_study",
    "run_bounds_report",
    "run_sandwich",
    "run_route",
    "write_csv",
    "main",
]

CSV_VERSION = 1

_grid = {
    "oneOf": [
        {"type": "string"},
        {"type": "array", "items": {"type": "number"}, "minItems": 1},
    ]
}

SCENARIO_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "mevsim scenario",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "version": {"const": 1},
        "cfmms": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "kind"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "kind": {
                        "enum": ["constant_product", "constant_sum", "weighted_product", "function"]
                    },
                    "reserves_in": {"type": "number", "exclusiveMinimum": 0},
                    "reserves_out": {"type": "number", "exclusiveMinimum": 0},
                    "rate": {"type": "number", "exclusiveMinimum": 0},
                    "weight": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                    "coeff": {"type": "number", "exclusiveMinimum": 0},
                    "power": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                },
            },
        },
        "graph": {
            "type": "object",
            "additionalProperties": False,
            "required": ["source", "sink", "edges"],
            "properties": {
                "source": {"type": "string"},
                "sink": {"type": "string"},
                "middle": {"type": "string"},
                "edges": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["id", "src", "dst", "cfmm"],
                        "properties": {
                            "id": {"type": "string"},
                            "src": {"type": "string"},
                            "dst": {"type": "string"},
                            "cfmm": {"type": "string"},
                            "attackable": {"type": "boolean"},
                        },
                    },
                },
            },
        },
        "trade": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "cfmm": {"type": "string"},
                "amount": {"type": "number", "exclusiveMinimum": 0},
                "eta": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "eta_grid": _grid,
                "delta_grid": _grid,
            },
        },
        "sequence": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "eta"],
            "properties": {
                "cfmm": {"type": "string"},
                "n": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
                "kind": {"enum": ["constant", "uniform", "alternating"]},
                "delta": {"type": "number", "exclusiveMinimum": 0},
                "low": {"type": "number", "exclusiveMinimum": 0},
                "high": {"type": "number", "exclusiveMinimum": 0},
                "eta": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "depth": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "mc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "K": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            },
        },
        "curvature": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_grid": {"type": "integer", "minimum": 16},
                "m": {"type": "number", "exclusiveMinimum": 0},
                "m_price": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}

_ETA_GRID = "log:1e-4:0.9:50"

_PIGOU = {
    "cfmms": [
        {"id": "cfmm1", "kind": "constant_product", "reserves_in": 1.0, "reserves_out": 2.0},
        {"id": "cfmm2", "kind": "constant_sum", "reserves_in": 1e9, "reserves_out": 1e9, "rate": 1.0},
    ],
    "graph": {
        "source": "A",
        "sink": "B",
        "edges": [
            {"id": "e1", "src": "A", "dst": "B", "cfmm": "cfmm1"},
            {"id": "e2", "src": "A", "dst": "B", "cfmm": "cfmm2"},
        ],
    },
    "trade": {"amount": 1.0, "eta": 0.0, "eta_grid": _ETA_GRID},
}

_BRAESS = {
    "cfmms": [
        {"id": "sqrt", "kind": "function", "coeff": 1.0, "power": 0.5},
        {"id": "linear", "kind": "function", "coeff": 1.0, "power": 1.0},
        {"id": "pool", "kind": "constant_product", "reserves_in": 1.0, "reserves_out": 2.0},
    ],
    "graph": {
        "source": "A",
        "sink": "B",
        "middle": "g5",
        "edges": [
            {"id": "g1", "src": "A", "dst": "C", "cfmm": "sqrt"},
            {"id": "g2", "src": "C", "dst": "B", "cfmm": "linear"},
            {"id": "g3", "src": "A", "dst": "D", "cfmm": "linear"},
            {"id": "g4", "src": "D", "dst": "B", "cfmm": "sqrt"},
            {"id": "g5", "src": "C", "dst": "D", "cfmm": "pool"},
        ],
    },
    "trade": {"amount": 1.0, "eta": 0.0, "eta_grid": _ETA_GRID},
}

_POOL = {
    "cfmms": [{"id": "pool", "kind": "constant_product", "reserves_in": 1.0, "reserves_out": 2.0}],
}

DEFAULTS = {
    "pigou": _PIGOU,
    "braess": _BRAESS,
    "route": _PIGOU,
    "sandwich": {**_POOL, "trade": {"cfmm": "pool", "amount": 1.0, "eta": 0.1}},
    "bounds": {
        **_POOL,
        "trade": {"cfmm": "pool", "delta_grid": "lin:0.05:0.5:10", "eta_grid": "lin:0:0.5:11"},
        "curvature": {"n_grid": 64},
    },
    "reorder": {
        **_POOL,
        "sequence": {
            "cfmm": "pool",
            "n": [4, 8, 16, 32, 64, 128, 256],
            "kind": "alternating",
            "low": 0.5,
            "high": 1.5,
            "eta": 0.05,
            "depth": 1e4,
        },
        "mc": {"K": 500, "seed": 7},
    },
}


# ---------------------------------------------------------------- scenarios


def parse_grid(text):
    """Grid from ``log:a:b:n``, ``lin:a:b:n``, a comma list, or a JSON list."""
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text).strip()
    try:
        if text.startswith(("log:", "lin:")):
            kind, a, b, n = text.split(":")
            a, b, n = float(a), float(b), int(n)
            if n < 1:
                raise ValueError
            if kind == "log":
                if a <= 0 or b <= 0:
                    raise ValueError
                pts = np.geomspace(a, b, n)
            else:
                pts = np.linspace(a, b, n)
            return [float(v) for v in pts]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ScenarioError(f"bad grid {text!r}") from None


def _increasing(name, values):
    if not values:
        raise ScenarioError(f"{name} is empty")
    if any(not math.isfinite(v) for v in values):
        raise ScenarioError(f"{name} has non-finite points")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ScenarioError(f"{name} must be strictly increasing")


def validate_scenario(sc, command=None):
    """Schema check plus the cross-reference rules; raises ScenarioError."""
    try:
        jsonschema.validate(sc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"{where}: {exc.message}") from None

    ids = [c["id"] for c in sc.get("cfmms", [])]
    if len(set(ids)) != len(ids):
        raise ScenarioError("cfmm ids must be unique")
    for c in sc.get("cfmms", []):
        kind = c["kind"]
        need = {
            "constant_product": ("reserves_in", "reserves_out"),
            "constant_sum": ("reserves_in", "reserves_out"),
            "weighted_product": ("reserves_in", "reserves_out", "weight"),
            "function": ("coeff", "power"),
        }[kind]
        missing = [k for k in need if k not in c]
        if missing:
            raise ScenarioError(f"cfmm {c['id']!r} ({kind}) is missing {missing}")

    g = sc.get("graph")
    if g is not None:
        eids = [e["id"] for e in g["edges"]]
        if len(set(eids)) != len(eids):
            raise ScenarioError("edge ids must be unique")
        for e in g["edges"]:
            if e["cfmm"] not in ids:
                raise ScenarioError(f"edge {e['id']!r} references unknown cfmm {e['cfmm']!r}")
        if "middle" in g and g["middle"] not in eids:
            raise ScenarioError(f"middle edge {g['middle']!r} is not in the graph")

    for section in ("trade", "sequence"):
        ref = sc.get(section, {}).get("cfmm")
        if ref is not None and ref not in ids:
            raise ScenarioError(f"{section}.cfmm references unknown cfmm {ref!r}")

    t = sc.get("trade", {})
    for key in ("eta_grid", "delta_grid"):
        if key in t:
            values = parse_grid(t[key])
            _increasing(f"trade.{key}", values)
            if key == "eta_grid" and not all(0 <= v < 1 for v in values):
                raise ScenarioError("slippage grid must lie in [0, 1)")
            if key == "delta_grid" and not all(v > 0 for v in values):
                raise ScenarioError("trade size grid must be positive")

    s = sc.get("sequence")
    if s is not None:
        if "n" in s:
            _increasing("sequence.n", [float(v) for v in s["n"]])
        if ("low" in s) != ("high" in s):
            raise ScenarioError("sequence needs both low and high")
        if "low" in s and not s["low"] < s["high"]:
            raise ScenarioError("sequence.low must be below sequence.high")
        if s["kind"] == "uniform" and "low" not in s:
            raise ScenarioError("uniform sequences need low and high")

    if command == "reorder" and sc.get("mc", {}).get("seed") is None:
        raise ScenarioError("stochastic runs need mc.seed (or --seed)")
    if command in ("pigou", "braess", "route") and g is None:
        raise ScenarioError(f"{command} needs a graph")
    if command == "braess" and "middle" not in g:
        raise ScenarioError("braess needs graph.middle")
    return sc


def load_scenario(path=None, command="pigou", *, seed=None, grid=None):
    """Read, merge with the command defaults, apply flag overrides, validate."""
    sc = copy.deepcopy(DEFAULTS[command])
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from None
        if not isinstance(user, dict):
            raise ScenarioError("scenario must be a JSON object")
        # a user graph replaces the default one wholesale, since its edges
        # refer to user cfmm ids
        for key, val in user.items():
            if isinstance(val, dict) and isinstance(sc.get(key), dict) and key != "graph":
                sc[key].update(val)
            else:
                sc[key] = val
    if seed is not None:
        sc.setdefault("mc", {})["seed"] = int(seed)
    if grid is not None:
        key = "n" if command == "reorder" else "eta_grid"
        if command == "reorder":
            sc.setdefault("sequence", {})["n"] = [int(round(v)) for v in parse_grid(grid)]
        else:
            sc.setdefault("trade", {})[key] = grid
    return validate_scenario(sc, command)


def build_market(cfg):
    kind = cfg["kind"]
    if kind == "function":
        return FunctionEdge(float(cfg["coeff"]), float(cfg["power"]), cfg["id"])
    r, r_out = float(cfg["reserves_in"]), float(cfg["reserves_out"])
    if kind == "constant_product":
        return Cfmm.constant_product(r, r_out)
    if kind == "constant_sum":
        return Cfmm.constant_sum(r, r_out, float(cfg.get("rate", 1.0)))
    return Cfmm.weighted_product(r, r_out, float(cfg["weight"]))


def _markets(sc):
    return {c["id"]: build_market(c) for c in sc["cfmms"]}


def _market(sc, section):
    ref = sc.get(section, {}).get("cfmm") or sc["cfmms"][0]["id"]
    market = _markets(sc)[ref]
    if not isinstance(market, Cfmm):
        raise ScenarioError(f"{section}.cfmm must be a reserve-based pool")
    return market


def build_network(sc, drop=()):
    """Network from the scenario graph; ``drop`` lists edge ids to leave out."""
    markets = _markets(sc)
    g = sc["graph"]
    edges = []
    for e in g["edges"]:
        if e["id"] in drop:
            continue
        kw = {"attackable": e["attackable"]} if "attackable" in e else {}
        edges.append(Edge(e["src"], e["dst"], markets[e["cfmm"]], e["id"], **kw))
    return Network(TokenGraph(tuple(edges)), g["source"], g["sink"])


# ---------------------------------------------------------------- output


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, name, columns, rows):
    """CSV with a ``# mevsim <name> v<N>`` line, a header row, repr floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# mevsim {name} v{CSV_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])
    return path


def read_csv(path):
    """Rows of a file written by ``write_csv`` as dicts of strings."""
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# ---------------------------------------------------------------- drivers

PIGOU_COLUMNS = ["eta", "opt_out", "eq_out", "poa", "eq_frac_cfmm1", "opt_frac_cfmm1", "pnl"]
BRAESS_COLUMNS = ["eta", "opt_out", "eq_out", "poa", "mid_frac_eq", "mid_frac_opt", "pnl"]
COF_COLUMNS = ["n", "K", "seed", "numerator", "denominator", "cof"]
BOUNDS_COLUMNS = [
    "delta", "eta", "ds", "ds_ub", "ds_lb", "dsp", "dsp_ub", "dsp_lb",
    "pnl", "pnl_ub", "pnl_lb", "flags",
]  # fmt: skip


def _share(alpha, paths, edge_index, amount):
    return float(sum(a for a, p in zip(alpha, paths) if edge_index in p) / amount)


def _sweep(net, sc, marked):
    t = sc["trade"]
    amount = float(t["amount"])
    rows = []
    for eta in parse_grid(t["eta_grid"]):
        w = welfare_and_poa(net, amount, eta, sandwiched=True)
        rows.append(
            {
                "eta": eta,
                "opt_out": w.w_opt,
                "eq_out": w.w_eq,
                "poa": w.poa,
                "eq_frac": _share(w.equilibrium.alpha, net.paths, marked, amount),
                "opt_frac": _share(w.optimal.alpha, net.paths, marked, amount),
                "pnl": w.equilibrium.pnl,
            }
        )
    return rows


def run_pigou_sweep(sc):
    """Rows of pigou.csv: both regimes per slippage limit.

    The share columns track the first edge of the graph, and ``pnl`` is what
    the attacker takes at the equilibrium split.
    """
    net = build_network(sc)
    rows = _sweep(net, sc, 0)
    for r in rows:
        r["eq_frac_cfmm1"] = r.pop("eq_frac")
        r["opt_frac_cfmm1"] = r.pop("opt_frac")
    return rows


def run_braess_sweep(sc):
    """Rows of braess.csv and the one-row baseline without the middle edge."""
    middle = sc["graph"]["middle"]
    net = build_network(sc)
    k = [e.name for e in net.graph.edges].index(middle)
    rows = _sweep(net, sc, k)
    for r in rows:
        r["mid_frac_eq"] = r.pop("eq_frac")
        r["mid_frac_opt"] = r.pop("opt_frac")

    base = build_network(sc, drop=(middle,))
    amount = float(sc["trade"]["amount"])
    eta = float(sc["trade"].get("eta", 0.0))
    w = welfare_and_poa(base, amount, eta, sandwiched=True)
    baseline = {
        "eta": eta,
        "opt_out": w.w_opt,
        "eq_out": w.w_eq,
        "poa": w.poa,
        "mid_frac_eq": 0.0,
        "mid_frac_opt": 0.0,
        "pnl": w.equilibrium.pnl,
    }
    return rows, baseline


def run_reorder_study(sc):
    """CoF over the block-size grid: (summary rows, fit rows, sample rows)."""
    s, mc = sc["sequence"], sc["mc"]
    pool = _market(sc, "sequence")
    dist = {k: s[k] for k in ("kind", "eta", "delta", "low", "high") if k in s}
    k, seed = int(mc.get("K", 500)), int(mc["seed"])
    study = cof_scaling_study(pool, dist, list(s["n"]), k, seed, depth=s.get("depth"))
    rows, samples = [], []
    for n, est in zip(study.n_values, study.estimates):
        rows.append(
            {
                "n": n,
                "K": est.n_permutations,
                "seed": seed,
                "numerator": est.numerator,
                "denominator": est.denominator,
                "cof": est.cof,
            }
        )
        for i, (mx, mean) in enumerate(est.samples):
            samples.append({"n": n, "sample": i, "max_diff": mx, "mean_diff": mean})
    fit = [
        {"model": "log", "slope": study.log_slope, "intercept": study.log_intercept, "r2": study.log_r2},
        {"model": "linear", "slope": study.lin_slope, "intercept": study.lin_intercept, "r2": study.lin_r2},
        {"model": "cof_over_log2n", "slope": math.nan, "intercept": math.nan, "r2": study.ratio_spread},
    ]
    return rows, fit, samples


_BOUND_CHECKS = (
    ("ds_ub", "ds", "ub"),
    ("ds_lb", "ds", "lb"),
    ("dsp_ub", "dsp", "ub"),
    ("dsp_lb", "dsp", "lb"),
    ("pnl_ub", "pnl", "ub"),
    ("pnl_lb", "pnl", "lb"),
)


def run_bounds_report(sc, rtol=1e-9):
    """Simulated attack vs every single-trade bound over a (delta, eta) grid.

    Curvature constants are measured once on (0, max delta]; the price side
    uses (0, min(max delta, R/2)] unless the scenario sets it.  ``flags``
    lists ``name=ok|skip|FAIL`` per bound; skipped bounds had a failed
    precondition and are not compared.  Returns (rows, violation count).
    """
    pool = _market(sc, "trade")
    t, cv = sc["trade"], sc.get("curvature", {})
    deltas = parse_grid(t["delta_grid"])
    etas = parse_grid(t["eta_grid"])
    m = float(cv.get("m", max(deltas)))
    m_price = float(cv.get("m_price", min(m, 0.5 * pool.reserves_in)))
    curv = estimate_curvature(pool, m, int(cv.get("n_grid", 64)), m_price=m_price)
    g0 = forward_rate(pool, 0.0)
    rows, violations = [], 0
    for d in deltas:
        for eta in etas:
            trade = Trade(d, eta)
            res = execute_sandwich(pool, trade)
            sim = {"ds": res.delta_sand, "dsp": res.delta_sand_prime, "pnl": res.pnl}
            b = compute_pnl_bounds(curv, g0, trade)
            flags = []
            for name, key, side in _BOUND_CHECKS:
                bound = getattr(b, name)
                if not b.valid[name]:
                    flags.append(f"{name}=skip")
                    continue
                slack = rtol * (1.0 + abs(sim[key]))
                ok = sim[key] <= bound + slack if side == "ub" else sim[key] >= bound - slack
                violations += not ok
                flags.append(f"{name}={'ok' if ok else 'FAIL'}")
            rows.append(
                {
                    "delta": d,
                    "eta": eta,
                    **sim,
                    **{name: getattr(b, name) for name, _, _ in _BOUND_CHECKS},
                    "flags": ";".join(flags),
                }
            )
    return rows, violations


def run_sandwich(sc):
    pool = _market(sc, "trade")
    t = sc["trade"]
    res = execute_sandwich(pool, Trade(float(t["amount"]), float(t.get("eta", 0.0))))
    return {
        "delta": float(t["amount"]),
        "eta": float(t.get("eta", 0.0)),
        "delta_sand": res.delta_sand,
        "delta_sand_prime": res.delta_sand_prime,
        "pnl": res.pnl,
        "user_output": res.user_output,
        "reserves_in": res.reserves_after.reserves_in,
        "reserves_out": res.reserves_after.reserves_out,
    }


def run_route(sc):
    """Per-path split and output for the optimum and the equilibrium."""
    net = build_network(sc)
    t = sc["trade"]
    amount, eta = float(t["amount"]), float(t.get("eta", 0.0))
    names = [e.name for e in net.graph.edges]
    rows = []
    for regime, solve in (("optimal", optimal_route), ("equilibrium", selfish_route)):
        r = solve(net, amount, eta, sandwiched=True)
        for k, path in enumerate(net.paths):
            rows.append(
                {
                    "regime": regime,
                    "path": "-".join(names[i] for i in path),
                    "alpha": r.alpha[k],
                    "output": r.path_out[k],
                    "total": r.total,
                    "pnl": r.pnl,
                }
            )
    return rows


# ---------------------------------------------------------------- command line


def _parser():
    p = argparse.ArgumentParser(prog="mevsim", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"mevsim {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", type=Path, help="scenario JSON file")
    common.add_argument("--seed", type=int, help="override mc.seed")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--grid", help="override the sweep grid, e.g. log:1e-4:0.9:50")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "sandwich": "attack one trade on one pool",
        "bounds": "simulated attacks against the single-trade bounds",
        "pigou": "slippage sweep on the two-pool network",
        "braess": "slippage sweep on the square network with a middle pool",
        "route": "optimal and equilibrium splits at one slippage limit",
        "reorder": "cost of feudalism over block sizes",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return p


def _outdir(args, sc):
    if args.out is not None:
        return args.out
    return Path(sc.get("outputs", {}).get("dir", "out"))


def _dispatch(args):
    sc = load_scenario(args.scenario, args.command, seed=args.seed, grid=args.grid)
    out = _outdir(args, sc)
    cmd = args.command
    if cmd == "pigou":
        path = write_csv(out / "pigou.csv", "pigou", PIGOU_COLUMNS, run_pigou_sweep(sc))
        print(path)
    elif cmd == "braess":
        rows, base = run_braess_sweep(sc)
        print(write_csv(out / "braess.csv", "braess", BRAESS_COLUMNS, rows))
        print(write_csv(out / "braess_baseline.csv", "braess_baseline", BRAESS_COLUMNS, [base]))
    elif cmd == "reorder":
        rows, fit, samples = run_reorder_study(sc)
        print(write_csv(out / "cof.csv", "cof", COF_COLUMNS, rows))
        print(write_csv(out / "cof_fit.csv", "cof_fit", ["model", "slope", "intercept", "r2"], fit))
        cols = ["n", "sample", "max_diff", "mean_diff"]
        print(write_csv(out / "cof_samples.csv", "cof_samples", cols, samples))
    elif cmd == "bounds":
        rows, bad = run_bounds_report(sc)
        print(write_csv(out / "bounds.csv", "bounds", BOUNDS_COLUMNS, rows))
        print(f"violations: {bad}")
    elif cmd == "sandwich":
        row = run_sandwich(sc)
        print(write_csv(out / "sandwich.csv", "sandwich", list(row), [row]))
    elif cmd == "route":
        rows = run_route(sc)
        cols = ["regime", "path", "alpha", "output", "total", "pnl"]
        print(write_csv(out / "route.csv", "route", cols, rows))
    return 0


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 4
    except ConvergenceFailure as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 2
    except DegenerateDenominator as exc:
        print(f"degenerate statistic: {exc}", file=sys.stderr)
        return 3
    except MevsimError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
