"""Batch experiment runner.

    riskgame analytic --p 1
    riskgame solve --actions 500 --iters 2000 --algo rm
    riskgame ce --actions 8,16
    riskgame sweep --p 0.5,1,2 --tau 0,0.05,0.1
    riskgame oracle-check --tuples 100

Every command takes ``--config FILE`` with ``key = value`` lines; explicit
flags win over the file.  Each output file carries the full config (CSV and
SVG as leading comments).  Wall-clock timings live only under the
``timing`` key of the summary JSON, so everything else is byte-reproducible.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import (
    ConvergenceError,
    EquilibriumKind,
    efficiency,
    solve_correlated_extreme,
    solve_multiplayer,
    solve_two_player,
)
from .corr_eq import CEStatus, max_total_reward_ce
from .discrete import build_grid, matrix_game, payoff_matrices
from .metrics import DeviationTable
from .model import GameSpec, TieRule, utility2
from .oracle import mc_utility2
from .solvers import Algorithm, SolverConfig, solve
from .svg import line_plot

FORMATS = ("json", "csv", "svg")
CHICKEN = ([[0, 7], [2, 6]], [[0, 2], [7, 6]])


class CLIError(Exception):
    pass


_NUM = r"-?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?"


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        # lets values such as "-0.5,0,0.5" through as arguments
        self._negative_number_matcher = re.compile(rf"^{_NUM}(,\s*{_NUM})*$")

    def error(self, message):
        raise CLIError(message)


# -- argument types ------------------------------------------------------------

def _float_list(text):
    vals = [float(v) for v in str(text).split(",") if v.strip()]
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _int_list(text):
    vals = [int(v) for v in str(text).split(",") if v.strip()]
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _formats(text):
    vals = [v.strip() for v in str(text).split(",") if v.strip()]
    bad = [v for v in vals if v not in FORMATS]
    if bad or not vals:
        raise argparse.ArgumentTypeError(f"formats must be drawn from {FORMATS}, got {text!r}")
    return vals


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


# -- parser --------------------------------------------------------------------

def _common(p, workers=False):
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", default="riskgame-out", help="output directory")
    p.add_argument("--format", type=_formats, default=list(FORMATS),
                   help="comma list drawn from json,csv,svg")
    if workers:
        p.add_argument("--workers", type=_positive_int, default=1)


def _game_flags(p, lists):
    kind = _float_list if lists else float
    p.add_argument("--p", type=kind, default=[1.0] if lists else 1.0, help="failure penalty")
    p.add_argument("--tau", type=kind, default=[0.0] if lists else 0.0, help="market friction")
    p.add_argument("--rho", type=kind, default=[0.0] if lists else 0.0, help="latent correlation")
    p.add_argument("--tie-rule", choices=[t.value for t in TieRule], default=TieRule.SHARED.value)


def build_parser():
    parser = _Parser(prog="riskgame", description="Competition-for-risk game experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analytic", help="closed-form and numerical equilibria")
    _common(p)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--rho", type=float, default=0.0, help="0, or the extremes +1 / -1")
    p.add_argument("--resolution", type=_positive_int, default=200)

    p = sub.add_parser("solve", help="learn an equilibrium on an action grid")
    _common(p)
    _game_flags(p, lists=False)
    p.add_argument("--actions", type=_positive_int, default=500)
    p.add_argument("--shift", type=_bool, default=True)
    p.add_argument("--algo", choices=[a.value for a in Algorithm], default="rm")
    p.add_argument("--iters", type=_positive_int, default=2000)
    p.add_argument("--temperature", type=float, default=0.05)
    p.add_argument("--trace-every", type=int, default=0, help="0 picks iters // 20")
    p.add_argument("--qnc-points", type=int, default=0, help="0 picks 8 * actions")

    p = sub.add_parser("ce", help="correlated-equilibrium polytope checks")
    _common(p, workers=True)
    _game_flags(p, lists=True)
    p.set_defaults(p=[0.0, 1.0], tau=[0.0, 0.1], rho=[-0.5, 0.0, 0.5])
    p.add_argument("--actions", type=_int_list, default=[8, 16])
    p.add_argument("--shift", type=_bool, default=True)
    p.add_argument("--K", type=_positive_int, default=5)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--lp-method", choices=["highs", "simplex"], default="highs")
    p.add_argument("--control", type=_bool, default=True, help="add the chicken-game control")

    p = sub.add_parser("sweep", help="regret matching over a parameter grid")
    _common(p, workers=True)
    _game_flags(p, lists=True)
    p.add_argument("--actions", type=_positive_int, default=128)
    p.add_argument("--shift", type=_bool, default=True)
    p.add_argument("--iters", type=_positive_int, default=1000)
    p.add_argument("--qnc-points", type=int, default=0, help="0 picks 8 * actions")

    p = sub.add_parser("oracle-check", help="Monte Carlo check of the utility formula")
    _common(p)
    p.add_argument("--tuples", type=_positive_int, default=100)
    p.add_argument("--samples", type=lambda s: _positive_int(float(s)), default=10 ** 6)
    p.add_argument("--n-sigma", type=float, default=4.0)
    p.add_argument("--tie-rule", choices=[t.value for t in TieRule], default=TieRule.SHARED.value)
    return parser


def _read_config(path):
    out = {}
    for num, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CLIError(f"{path}:{num}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in _read_config(args.config).items():
        act = actions.get(key)
        if act is None or key in ("config", "help"):
            raise CLIError(f"unknown config key {key!r} for {args.command}")
        try:
            value = act.type(raw) if act.type else raw
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise CLIError(f"config key {key!r}: {exc}") from exc
        if act.choices is not None and value not in act.choices:
            raise CLIError(f"config key {key!r}: {value!r} not in {list(act.choices)}")
        defaults[key] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def config_of(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("config", "out", "format", "workers")}


# -- output --------------------------------------------------------------------

class Output:
    def __init__(self, args):
        self.dir = Path(args.out)
        self.formats = set(args.format)
        self.config = config_of(args)
        self.header = json.dumps(self.config, sort_keys=True)
        self.written = []

    def _path(self, name):
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / name
        self.written.append(str(path))
        return path

    def json(self, name, payload):
        if "json" in self.formats:
            doc = {"config": self.config, **payload}
            self._path(name).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def csv(self, name, header, rows):
        if "csv" not in self.formats:
            return
        buf = io.StringIO()
        buf.write(f"# config: {self.header}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([_cell(v) for v in row] for row in rows)
        self._path(name).write_text(buf.getvalue())

    def svg(self, name, series, **labels):
        if "svg" not in self.formats or not series:
            return
        doc = line_plot(series, **labels)
        head, rest = doc.split("\n", 1)
        comment = "<!-- config: " + self.header.replace("--", "- -") + " -->"
        self._path(name).write_text(f"{head}\n{comment}\n{rest}")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return v


def _emit(payload):
    print(json.dumps(payload, sort_keys=True))


# -- analytic ------------------------------------------------------------------

def _equilibrium(P, n, rho):
    if rho in (1.0, -1.0):
        if n != 2:
            raise CLIError("the correlated extremes are two-player results")
        return solve_correlated_extreme(P, int(rho))
    if rho != 0:
        raise CLIError("closed forms exist for rho in {-1, 0, 1}; use `solve` otherwise")
    return solve_two_player(P) if n == 2 else solve_multiplayer(n, P)


def cmd_analytic(args):
    eq = _equilibrium(args.p, args.n, args.rho)
    result = eq.to_dict()
    if eq.w is not None and eq.w > 0:
        result["efficiency"], result["price_of_anarchy"] = efficiency(eq.n, eq.w)
    elif eq.log_w is not None:
        # w underflows for large n; E = n w is then reported through its log
        result["efficiency"], result["price_of_anarchy"] = 0.0, None
    if eq.log_w is not None:
        result["log_efficiency"] = float(np.log(eq.n) + eq.log_w)
    x = np.arange(args.resolution) * (eq.r_max / args.resolution)
    f, F = eq.density(x), eq.cdf(x)
    out = Output(args)
    out.json("analytic.json", {"result": result})
    out.csv("density.csv", ["x", "f", "F"], zip(x, f, F))
    out.svg("density.svg", [{"x": x, "y": f, "label": "f"}],
            title=f"equilibrium density, P={args.p}, n={args.n}", xlabel="risk", ylabel="density")
    return result


# -- solve ---------------------------------------------------------------------

def _reference(spec):
    if spec.tau != 0:
        return None
    try:
        if spec.rho == 0:
            return solve_two_player(spec.P)
        if spec.rho in (1.0, -1.0):
            return solve_correlated_extreme(spec.P, int(spec.rho))
    except ValueError:
        return None
    return None


def run_solve(spec, actions, shift, cfg, qnc_points=0):
    """Grid, solve and evaluate one game; returns a plain dict (plus arrays)."""
    t0 = time.perf_counter()
    game = payoff_matrices(build_grid(actions, shift), spec)
    t1 = time.perf_counter()
    res = solve(game, cfg)
    t2 = time.perf_counter()
    m = qnc_points or 8 * actions
    table = DeviationTable(game, m)
    trace = []
    regrets = {row[0]: row[1:] for row in res.regret_trace}
    for (it, nc), (_, s1, s2) in zip(res.nashconv_trace, res.snapshots):
        r1, r2 = regrets.get(it, (None, None))
        trace.append((it, nc, table(s1, s2), r1, r2))
    t3 = time.perf_counter()
    s1, s2 = res.avg_strategy_p1, res.avg_strategy_p2
    grid = game.grid
    u1, u2 = float(s1 @ game.U1 @ s2), float(s1 @ game.U2 @ s2)
    summary = {
        "r_bar_p1": float(grid.actions_p1 @ s1),
        "r_bar_p2": float(grid.actions_p2 @ s2),
        "u_p1": u1,
        "u_p2": u2,
        "u_total": u1 + u2,
        "nashconv": trace[-1][1],
        "quasi_nash_conv": trace[-1][2],
        "qnc_points": m,
    }
    summary["r_bar"] = 0.5 * (summary["r_bar_p1"] + summary["r_bar_p2"])
    timing = {"payoffs": t1 - t0, "solver": t2 - t1, "metrics": t3 - t2, "total": t3 - t0}
    return {"summary": summary, "timing": timing, "trace": trace, "result": res, "game": game}


def cmd_solve(args):
    spec = GameSpec(P=args.p, tau=args.tau, rho=args.rho, tie_rule=args.tie_rule)
    trace_every = args.trace_every or max(1, args.iters // 20)
    cfg = SolverConfig(algorithm=args.algo, iterations=args.iters, seed=args.seed,
                       softmax_temperature=args.temperature, trace_every=trace_every)
    run = run_solve(spec, args.actions, args.shift, cfg, args.qnc_points)
    res, game, summary = run["result"], run["game"], run["summary"]
    ref = _reference(spec)
    if ref is not None:
        summary["analytic"] = {"r_bar": ref.r_bar, "u_star": ref.u_star, "r_max": ref.r_max}
    out = Output(args)
    a1, a2 = game.grid.actions_p1, game.grid.actions_p2
    out.json("summary.json", {"result": summary, "timing": run["timing"]})
    out.csv("strategies.csv", ["player", "action", "probability"],
            [(1, x, p) for x, p in zip(a1, res.avg_strategy_p1)]
            + [(2, x, p) for x, p in zip(a2, res.avg_strategy_p2)])
    if res.empirical_joint is not None:
        out.csv("joint.csv", ["a1\\a2", *(repr(float(b)) for b in a2)],
                [(x, *row) for x, row in zip(a1, res.empirical_joint)])
    out.csv("trace.csv", ["iteration", "nashconv", "quasi_nash_conv", "avg_regret_p1", "avg_regret_p2"],
            run["trace"])
    width = 1.0 / args.actions
    series = [{"x": a1, "y": res.avg_strategy_p1 / width, "label": "player 1", "style": "points"},
              {"x": a2, "y": res.avg_strategy_p2 / width, "label": "player 2", "style": "points"}]
    if ref is not None and ref.kind is EquilibriumKind.TWO_PLAYER:
        x = np.linspace(0, ref.r_max, 200, endpoint=False)
        series.append({"x": x, "y": ref.density(x), "label": "analytic f"})
    out.svg("density.svg", series, title=f"{args.algo}: empirical density", xlabel="risk",
            ylabel="density")
    return summary


# -- ce ------------------------------------------------------------------------

def _cell_seed(master, index):
    return int(np.random.SeedSequence([master, index]).generate_state(1, np.uint64)[0])


def _ce_cell(job):
    a, shift, P, tau, rho, tie, K, conf, seed, method = job
    spec = GameSpec(P=P, tau=tau, rho=rho, tie_rule=tie)
    game = payoff_matrices(build_grid(a, shift), spec)
    res = max_total_reward_ce(game, K=K, p=conf, seed=seed, method=method)
    return _ce_row(res, {"actions": a, "P": P, "tau": tau, "rho": rho, "seed": seed})


def _ce_row(res, keys):
    row = dict(keys, status=res.status.value, value=res.value, d_max=res.d_max,
               **{"lambda": res.lambda_})
    if res.status is CEStatus.SOLVED:
        row["unique_or_nash"] = bool(res.d_max <= 1e-6 or res.lambda_ <= 1e-6)
    else:
        row["unique_or_nash"] = None
    return row


def _pool_map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def cmd_ce(args):
    jobs = []
    for a in args.actions:
        for P in args.p:
            for tau in args.tau:
                for rho in args.rho:
                    jobs.append((a, args.shift, P, tau, rho, args.tie_rule, args.K,
                                 args.confidence, _cell_seed(args.seed, len(jobs)), args.lp_method))
    rows = _pool_map(_ce_cell, jobs, args.workers)
    control = None
    if args.control:
        game = matrix_game(*CHICKEN)
        res = max_total_reward_ce(game, K=args.K, p=args.confidence, seed=args.seed,
                                  method=args.lp_method)
        control = _ce_row(res, {"game": "chicken"})
        control["nontrivial"] = bool(res.d_max is not None and res.d_max > 0.01)
    solved = [r for r in rows if r["status"] == CEStatus.SOLVED.value]
    summary = {
        "cells": len(rows),
        "solved": len(solved),
        "infeasible": len(rows) - len(solved),
        "unique_or_nash": sum(bool(r["unique_or_nash"]) for r in solved),
        "failing_cells": [{k: r[k] for k in ("actions", "P", "tau", "rho", "d_max", "lambda")}
                          for r in solved if not r["unique_or_nash"]],
        "control": control,
    }
    out = Output(args)
    cols = ["actions", "P", "tau", "rho", "seed", "status", "value", "d_max", "lambda", "unique_or_nash"]
    out.csv("ce_cells.csv", cols, [[r[c] for c in cols] for r in rows])
    for a in args.actions:
        sel = {(r["P"], r["tau"], r["rho"]): r for r in rows if r["actions"] == a}
        for key in ("d_max", "lambda"):
            mat = []
            for P in args.p:
                for tau in args.tau:
                    cells = [sel[(P, tau, rho)] for rho in args.rho]
                    mat.append([f"P={P!r};tau={tau!r}",
                                *(c[key] if c["status"] == "solved" else "Infeasible" for c in cells)])
            out.csv(f"ce_{key}_a{a}.csv", ["cell\\rho", *(repr(r) for r in args.rho)], mat)
    out.json("ce_summary.json", {"result": summary, "cells": rows})
    return summary


# -- sweep ---------------------------------------------------------------------

def _sweep_cell(job):
    P, tau, rho, tie, actions, shift, iters, seed, qnc_points = job
    row = {"P": P, "tau": tau, "rho": rho, "seed": seed}
    try:
        spec = GameSpec(P=P, tau=tau, rho=rho, tie_rule=tie)
        cfg = SolverConfig(iterations=iters, seed=seed, trace_every=iters)
        s = run_solve(spec, actions, shift, cfg, qnc_points)["summary"]
        row.update(status="ok", error="", r_bar=s["r_bar"], u=s["u_total"], r_bar_p1=s["r_bar_p1"],
                   r_bar_p2=s["r_bar_p2"], u_p1=s["u_p1"], u_p2=s["u_p2"],
                   quasi_nash_conv=s["quasi_nash_conv"], nashconv=s["nashconv"])
    except Exception as exc:  # recorded, the sweep goes on
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    return row


SWEEP_COLUMNS = ["P", "tau", "rho", "seed", "status", "r_bar", "u", "quasi_nash_conv", "nashconv",
                 "r_bar_p1", "r_bar_p2", "u_p1", "u_p2", "error"]


def run_sweep(cells, actions=128, iters=1000, seed=0, shift=True, qnc_points=0,
              tie_rule="shared", workers=1, offset=0):
    """Regret matching on each ``(P, tau, rho)`` cell; one row dict per cell.

    Cell ``i`` is seeded from ``(seed, offset + i)``.
    """
    jobs = [(float(P), float(tau), float(rho), tie_rule, actions, shift, iters,
             _cell_seed(seed, offset + i), qnc_points) for i, (P, tau, rho) in enumerate(cells)]
    return _pool_map(_sweep_cell, jobs, workers)


def _level_lines(rows, group, along, ykey, xkey=None):
    ok = [r for r in rows if r["status"] == "ok"]
    series = []
    for key in sorted({tuple(r[g] for g in group) for r in ok}):
        sel = sorted((r for r in ok if tuple(r[g] for g in group) == key), key=lambda r: r[along])
        if len(sel) < 2:
            continue
        xk = xkey or along
        series.append({"x": [r[xk] for r in sel], "y": [r[ykey] for r in sel], "style": "both",
                       "label": ", ".join(f"{g}={v:g}" for g, v in zip(group, key))})
    return series


def cmd_sweep(args):
    cells = [(P, tau, rho) for P in args.p for tau in args.tau for rho in args.rho]
    rows = run_sweep(cells, args.actions, args.iters, args.seed, args.shift, args.qnc_points,
                     args.tie_rule, args.workers)
    out = Output(args)
    out.csv("sweep.csv", SWEEP_COLUMNS, [[r.get(c) for c in SWEEP_COLUMNS] for r in rows])
    out.json("sweep_summary.json", {"cells": rows})
    out.svg("u_vs_rbar_const_P.svg", _level_lines(rows, ("P", "rho"), "tau", "u", "r_bar"),
            title="total reward vs mean risk, varying tau", xlabel="mean risk", ylabel="u")
    out.svg("u_vs_rbar_const_tau.svg", _level_lines(rows, ("tau", "rho"), "P", "u", "r_bar"),
            title="total reward vs mean risk, varying P", xlabel="mean risk", ylabel="u")
    out.svg("rbar_vs_rho.svg", _level_lines(rows, ("P", "tau"), "rho", "r_bar"),
            title="mean risk vs correlation", xlabel="rho", ylabel="mean risk")
    out.svg("u_vs_rho.svg", _level_lines(rows, ("P", "tau"), "rho", "u"),
            title="total reward vs correlation", xlabel="rho", ylabel="u")
    failed = sum(r["status"] != "ok" for r in rows)
    return {"cells": len(rows), "failed": failed}


# -- oracle-check --------------------------------------------------------------

def random_tuples(count, seed):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x0AC1E]))
    out = []
    for _ in range(count):
        r1, r2 = rng.random(2)
        P = rng.uniform(0, 3)
        tau = rng.uniform(0, 0.5) if rng.random() < 0.5 else 0.0
        rho = rng.uniform(-1, 1)
        out.append((float(r1), float(r2), float(P), float(tau), float(rho)))
    return out


def run_oracle_check(tuples, samples, seed=0, n_sigma=4.0, tie_rule="shared"):
    rows = []
    for i, (r1, r2, P, tau, rho) in enumerate(random_tuples(tuples, seed)):
        spec = GameSpec(P=P, tau=tau, rho=rho, tie_rule=tie_rule)
        u1, u2 = utility2(r1, r2, spec)
        e1, e2 = mc_utility2(r1, r2, spec, samples, seed=_cell_seed(seed, i))
        rows.append({"r1": r1, "r2": r2, "P": P, "tau": tau, "rho": rho, "u1": float(u1),
                     "u2": float(u2), "mc_u1": e1.mean, "se_u1": e1.std_error, "mc_u2": e2.mean,
                     "se_u2": e2.std_error,
                     "agrees": bool(e1.agrees(u1, n_sigma) and e2.agrees(u2, n_sigma))})
    return rows


def cmd_oracle_check(args):
    rows = run_oracle_check(args.tuples, args.samples, args.seed, args.n_sigma, args.tie_rule)
    summary = {"tuples": len(rows), "agree": sum(r["agrees"] for r in rows)}
    out = Output(args)
    cols = list(rows[0])
    out.csv("oracle_check.csv", cols, [[r[c] for c in cols] for r in rows])
    out.json("oracle_check.json", {"result": summary})
    return summary


COMMANDS = {"analytic": cmd_analytic, "solve": cmd_solve, "ce": cmd_ce, "sweep": cmd_sweep,
            "oracle-check": cmd_oracle_check}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        _emit(COMMANDS[args.command](args))
        return 0
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except Exception as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ConvergenceError):
            err["bracket"] = exc.bracket
        print(json.dumps(err, sort_keys=True, default=str), file=sys.stderr)
        return 2 if isinstance(exc, CLIError) else 1


if __name__ == "__main__":
    sys.exit(main())
