"""Command-line front end.

Usage::

    eqstop SUBCOMMAND [--config FILE] [--out DIR] [--workers N] [--seed S]
                      [--grid-h H] [--quad-nodes N]

Each run writes ``report.json`` plus ``curves.csv`` / ``tables.csv`` into
``DIR/<stem>/`` where the stem encodes the subcommand, parameters, grid hash
and engine version.  Exit status: 0 success, 1 bad configuration, 2 a
checked property or acceptance condition failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .diffusion import DiffusionModel, constant_model
from .discounting import DiscountMeasure, hyperbolic_measure
from .equilibrium import (
    EpsSearchConfig,
    check_equilibrium,
    epsilon_value_table,
    minimality_probe,
    smallest_equilibrium,
)
from .mc_oracle import SimulationConfig, estimate_J
from .reporting import artifact_stem, write_json, write_table
from .rewards import tabulated_reward, tent_reward
from .stability_lab import (
    TwoBarrierParams,
    example41_reproduce,
    example42_reproduce,
    make_grid,
    tent_height,
    theorem31_double_limit,
    theorem32_usc_check,
    two_barrier_reward,
    two_barrier_sequence,
    uniform_J_gap,
)
from .stopping_sets import StoppingSet
from .valuation import continuation_value

SUBCOMMANDS = ("eval-j", "check-eq", "smallest-eq", "value", "value-eps", "sweep",
               "reproduce-41", "reproduce-42", "oracle-validate")

DEFAULTS = {
    "params": {"a": 0.0, "b": 1.0, "d": 1.0, "beta": 1.0, "L0": 1.0},
    "grid": {"lo": -3.0, "hi": 4.0, "h": 1 / 64},
    "n_list": [2, 4, 8, 16, 32, 64],
    "eps_list": [0.2, 0.1, 0.05, 0.02],
    "quad_nodes": 64,
    "seed": 0,
    "workers": 1,
    "reward": {"kind": "two-barrier"},
    "model": {"kind": "constant", "mu": 0.0, "sigma": 1.0},
    "set": [[1.0, 1.0]],
    "eps": 0.0,
    "x": [-1.0],
    "mc": {"n_paths": 200000, "t_max": 1000.0, "dt": 1e-4},
}

# the shifted-tent example runs at beta = 2 on a window around the tent
SUBCOMMAND_DEFAULTS = {"reproduce-42": {"params": {"beta": 2.0}, "grid": {"lo": -1.5, "hi": 2.5}}}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    if path is None:
        return {}
    text = Path(path).read_text()
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"config: cannot parse {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a mapping")
    return data


def _merge(out: dict, extra: dict):
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k].update(v)
        else:
            out[k] = v


def resolve(cfg: dict, args) -> dict:
    """Merge defaults, config file and command-line overrides; validate fields."""
    out = json.loads(json.dumps(DEFAULTS))
    _merge(out, SUBCOMMAND_DEFAULTS.get(getattr(args, "subcommand", None), {}))
    _merge(out, cfg)
    if args.grid_h is not None:
        out["grid"]["h"] = args.grid_h
    if args.quad_nodes is not None:
        out["quad_nodes"] = args.quad_nodes
    if args.seed is not None:
        out["seed"] = args.seed
    if args.workers is not None:
        out["workers"] = args.workers
    p = out["params"]
    for derived in ("c", "alpha"):
        if derived in p:
            raise ConfigError(f"params.{derived}: derived quantity, must not be supplied")
    for key in ("a", "b", "d", "beta", "L0"):
        if not isinstance(p.get(key), (int, float)):
            raise ConfigError(f"params.{key}: expected a number")
    if not p["a"] < p["b"]:
        raise ConfigError("params.a: must be smaller than params.b")
    for key in ("d", "beta", "L0"):
        if not p[key] > 0:
            raise ConfigError(f"params.{key}: must be positive")
    g = out["grid"]
    if not (g["lo"] < g["hi"] and g["h"] > 0):
        raise ConfigError("grid: need lo < hi and h > 0")
    if not (isinstance(out["quad_nodes"], int) and out["quad_nodes"] >= 1):
        raise ConfigError("quad_nodes: expected a positive integer")
    if not all(isinstance(n, int) and n >= 1 for n in out["n_list"]):
        raise ConfigError("n_list: expected positive integers")
    if not all(e > 0 for e in out["eps_list"]):
        raise ConfigError("eps_list: expected positive values")
    if out["eps"] < 0:
        raise ConfigError("eps: must be nonnegative")
    return out


def _params(c) -> TwoBarrierParams:
    p = c["params"]
    return TwoBarrierParams(float(p["a"]), float(p["b"]), float(p["d"]), float(p["beta"]), float(p["L0"]))


def _discount(c) -> DiscountMeasure:
    return hyperbolic_measure(float(c["params"]["beta"]), int(c["quad_nodes"]))


def _model(c) -> DiffusionModel:
    try:
        return DiffusionModel.from_record(dict(c["model"]))
    except (KeyError, ValueError) as e:
        raise ConfigError(f"model: {e}") from e


def _reward(c, D):
    r = c["reward"]
    kind = r.get("kind")
    if kind == "two-barrier":
        return two_barrier_reward(_params(c), D)[0]
    if kind == "tent":
        h = tent_height(float(c["params"]["beta"]))["alpha_quad"]
        return tent_reward(h, float(r.get("center", 0.0)))
    if kind == "table":
        return tabulated_reward(r["xs"], r["ys"])
    raise ConfigError(f"reward.kind: unknown kind {kind!r}")


def _set(c) -> StoppingSet:
    try:
        return StoppingSet.from_record(c["set"])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"set: {e}") from e


def _grid(c, pins=()) -> np.ndarray:
    g = c["grid"]
    return make_grid(float(g["lo"]), float(g["hi"]), float(g["h"]), pins)


def _pins(c):
    p = c["params"]
    return (float(p["a"]), float(p["b"]))


def _emit(out_dir, name, c, grid, report, curves=None, tables=None) -> Path:
    stem = artifact_stem(name, {k: v for k, v in c["params"].items()} | {"nodes": c["quad_nodes"]}, grid)
    d = Path(out_dir) / stem
    report = {"subcommand": name, "engine_version": __version__, "config": c, **report}
    write_json(d / "report.json", report)
    if curves is not None:
        write_table(d / "curves.csv", curves[0], curves[1])
    if tables is not None:
        write_table(d / "tables.csv", tables[0], tables[1])
    return d


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_eval_j(c, out):
    D = _discount(c)
    m, f, S = _model(c), _reward(c, D), _set(c)
    grid = _grid(c, _pins(c))
    res = continuation_value(m, D, f, S, grid)
    _emit(out, "eval-j", c, grid, {"set": S, "diagnostics": res.diagnostics},
          curves=(["x", "J", "f"], zip(grid, res.values, f(grid))))
    return 0


def cmd_check_eq(c, out):
    D = _discount(c)
    m, f, S = _model(c), _reward(c, D), _set(c)
    grid = _grid(c, _pins(c))
    rep = check_equilibrium(m, D, f, S, float(c["eps"]), grid)
    _emit(out, "check-eq", c, grid, {"report": rep.to_record()})
    print(f"verdict={rep.verdict} worst_gap={rep.worst_gap:.3e} at x={rep.worst_state}")
    return 0


def cmd_smallest_eq(c, out):
    D = _discount(c)
    m, f = _model(c), _reward(c, D)
    grid = _grid(c, _pins(c))
    S = smallest_equilibrium(m, D, f, grid)
    rep = check_equilibrium(m, D, f, S, 0.0, grid)
    mini = minimality_probe(m, D, f, S, grid)
    _emit(out, "smallest-eq", c, grid, {"S_star": S, "check": rep.to_record(), "minimality": mini})
    print(f"S* = {S}")
    return 0 if rep.verdict and all(mini) else 2


def cmd_value(c, out):
    D = _discount(c)
    m, f = _model(c), _reward(c, D)
    grid = _grid(c, _pins(c))
    S = smallest_equilibrium(m, D, f, grid)
    V = continuation_value(m, D, f, S, grid).values
    _emit(out, "value", c, grid, {"S_star": S}, curves=(["x", "V", "f"], zip(grid, V, f(grid))))
    return 0


def cmd_value_eps(c, out):
    D = _discount(c)
    m, f = _model(c), _reward(c, D)
    grid = _grid(c, _pins(c))
    xs = np.asarray(c["x"], dtype=float)
    eps = sorted(float(e) for e in c["eps_list"])
    S = smallest_equilibrium(m, D, f, grid)
    V = continuation_value(m, D, f, S, xs).values
    vals, sets = epsilon_value_table(m, D, f, eps, xs, EpsSearchConfig(grid, 8, "auto", S))
    rows = [(e, x, vals[i, j], V[j], str(sets[i][j])) for i, e in enumerate(eps) for j, x in enumerate(xs)]
    nested = bool(np.all(np.diff(vals, axis=0) >= -1e-12))
    _emit(out, "value-eps", c, grid, {"S_star": S, "nested": nested},
          tables=(["eps", "x", "V_eps", "V", "set"], rows))
    return 0 if nested else 2


def cmd_sweep(c, out):
    p = _params(c)
    grid = _grid(c, _pins(c))
    seq = two_barrier_sequence(p, tuple(c["n_list"]), int(c["quad_nodes"]))
    gap = uniform_J_gap(seq, [StoppingSet.points(p.b), StoppingSet.points(p.a, p.b)], grid)
    usc = theorem32_usc_check(seq, grid)
    dbl = theorem31_double_limit(seq, p.a - 1.0, c["eps_list"], grid)
    rows = [(r["n"], r["d_n"], r["g_n"]) for r in gap["rows"]]
    curves = [grid, usc["margin"]]
    cols = ["x", "usc_margin"]
    if "extrapolated_margin" in usc:
        curves.append(usc["extrapolated_margin"])
        cols.append("usc_margin_extrapolated")
    report = {
        "uniform_gap": {k: v for k, v in gap.items() if k != "rows"},
        "usc": {k: usc[k] for k in ("N0", "tail", "min_margin", "argmin", "sets")},
        "double_limit": dbl,
    }
    _emit(out, "sweep", c, grid, report, curves=(cols, zip(*curves)), tables=(["n", "d_n", "g_n"], rows))
    return 0 if gap["strictly_decreasing"] else 2


def cmd_reproduce_41(c, out):
    p = _params(c)
    g = c["grid"]
    r = example41_reproduce(p, tuple(c["n_list"]), float(g["h"]), (float(g["lo"]), float(g["hi"])), int(c["quad_nodes"]))
    grid = r["curves"][:, 0]
    ok = (r["ordering"]["strict_ok"] and r["ordering"]["equality_ok"] and r["S_star_inf_ok"]
          and r["threshold_n"] is not None and r["threshold_stable"] and all(s["ok"] for s in r["sandwich"])
          and r["gap"]["V_gap"] > 0)
    report = {k: v for k, v in r.items() if k not in ("curves", "S_star_inf_set")}
    rows = [(s["n"], s["lower_margin"], s["upper_margin"]) for s in r["sandwich"]]
    _emit(out, "reproduce-41", c, grid, report, curves=(r["curve_columns"], r["curves"].tolist()),
          tables=(["n", "sandwich_lower_margin", "sandwich_upper_margin"], rows))
    print(f"S*(inf) = {r['S_star_inf']}; threshold n = {r['threshold_n']}; gap at x={r['gap']['x']}: "
          f"{r['gap']['limit_gap']:.6f}")
    return 0 if ok else 2


def cmd_reproduce_42(c, out):
    beta = float(c["params"]["beta"])
    g = c["grid"]
    n_list = tuple(c.get("n_list_42", [1, 2, 4, 8, 16]))
    r = example42_reproduce(beta, n_list, float(g["h"]), (float(g["lo"]), float(g["hi"])), int(c["quad_nodes"]))
    grid = make_grid(float(g["lo"]), float(g["hi"]), float(g["h"]))
    ok = (r["alpha_error"] <= 1e-8 and all(row["S_ok"] and row["slope_error"] <= 1e-3 and row["convex_ok"]
                                           for row in r["rows"]) and r["limsup_empty"] and r["S_star_inf_ok"])
    cols = list(r["rows"][0])
    _emit(out, "reproduce-42", c, grid, r, tables=(cols, [[row[k] for k in cols] for row in r["rows"]]))
    print(f"alpha = {r['alpha']['alpha_quad']:.10f}; limsup S*^n = {r['limsup']}; S*(inf) = {r['S_star_inf']}")
    return 0 if ok else 2


def cmd_oracle_validate(c, out):
    p = _params(c)
    D = _discount(c)
    f, k = two_barrier_reward(p, D)
    m = constant_model(0.0)
    mc = c["mc"]
    sim = SimulationConfig(dt=float(mc["dt"]), n_paths=int(mc["n_paths"]), t_max=float(mc["t_max"]),
                           seed=int(c["seed"]), workers=int(c["workers"]))
    xs = np.asarray(c.get("probes", np.linspace(-3.0, 4.0, 11)), dtype=float)
    S = StoppingSet.points(p.b)
    exact = k.J_b(xs)
    rows, inside = [], 0
    for i, x in enumerate(xs):
        r = estimate_J(m, D, f, S, float(x), replace(sim, seed=int(c["seed"]) + i))
        z = 0.0 if r.stderr == 0 else (r.estimate - exact[i]) / r.stderr
        inside += abs(z) <= 3 or r.stderr == 0 and abs(r.estimate - exact[i]) <= 1e-12
        rows.append((x, exact[i], r.estimate, r.stderr, z, r.censored_fraction, r.bias_bound))
    grid = xs
    _emit(out, "oracle-validate", c, grid, {"within_3se": inside, "n_probes": len(xs)},
          tables=(["x", "J_closed", "J_mc", "stderr", "z", "censored_fraction", "bias_bound"], rows))
    print(f"{inside}/{len(xs)} probes within 3 standard errors")
    return 0 if inside == len(xs) else 2


COMMANDS = {
    "eval-j": cmd_eval_j, "check-eq": cmd_check_eq, "smallest-eq": cmd_smallest_eq, "value": cmd_value,
    "value-eps": cmd_value_eps, "sweep": cmd_sweep, "reproduce-41": cmd_reproduce_41,
    "reproduce-42": cmd_reproduce_42, "oracle-validate": cmd_oracle_validate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eqstop", description="Equilibrium stopping experiments.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, default=None, help="YAML or JSON configuration file")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--grid-h", type=float, default=None)
    ap.add_argument("--quad-nodes", type=int, default=None)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(load_config(args.config), args)
        return COMMANDS[args.subcommand](cfg, args.out)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, KeyError, TypeError) as e:
        print(f"error: config: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
