"""Command-line front end.

Every command prints one table as CSV (with ``#`` provenance lines) or JSON
(with a ``metadata`` object).  Exit status is 0 on success, 2 for invalid
input and 1 for anything else.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import allocation, evr_planner, monte_carlo, rejection_calculus, tail_bounds
from .gaussian_core import bvn_cdf, std_normal_quantile
from .matrix_io import APPENDIX_C_TAGS, CorrelationMatrix, load_appendix_c, load_matrix
from .rejection_calculus import Level

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"


# ---------------------------------------------------------------------------
# argument types

def _typed(convert, check, message):
    def parse(text):
        try:
            value = convert(text)
        except (TypeError, ValueError):
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if not check(value):
            raise argparse.ArgumentTypeError(f"{text!r}: {message}")
        return value
    return parse


pos_int = _typed(int, lambda v: v >= 1, "must be a positive integer")
nonneg_int = _typed(int, lambda v: v >= 0, "must be a nonnegative integer")
pos_float = _typed(float, lambda v: v > 0 and math.isfinite(v), "must be positive")
nonneg_float = _typed(float, lambda v: v >= 0 and math.isfinite(v), "must be nonnegative")
prob_open = _typed(float, lambda v: 0 < v < 1, "must lie in (0, 1)")
unit_half_open = _typed(float, lambda v: 0 < v <= 1, "must lie in (0, 1]")
corr_value = _typed(float, lambda v: -1 <= v <= 1, "must lie in [-1, 1]")
unit_closed = _typed(float, lambda v: 0 <= v <= 1, "must lie in [0, 1]")
finite_float = _typed(float, math.isfinite, "must be finite")
seed_type = _typed(int, lambda v: 0 <= v < 1 << 64, "must be a 64-bit unsigned integer")
precision_type = _typed(int, lambda v: 1 <= v <= 17, "must lie in [1, 17]")


# ---------------------------------------------------------------------------
# output

class Report:
    def __init__(self, columns, rows, seed=None):
        self.columns = list(columns)
        self.rows = [list(r) for r in rows]
        self.seed = seed


def _fmt(value, precision):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.{precision}g}"
    return str(value)


def _json_value(value, precision):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return float(f"{v:.{precision}g}") if math.isfinite(v) else None
    return value


def _render(report: Report, args, argv) -> str:
    meta = {
        "command": "evr-lab " + " ".join(argv),
        "seed": report.seed,
        "version": __version__,
    }
    if args.format == "json":
        rows = [{c: _json_value(v, args.precision) for c, v in zip(report.columns, r)}
                for r in report.rows]
        return json.dumps({"metadata": meta, "rows": rows}, indent=2) + "\n"
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key}: {'' if value is None else value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(report.columns)
    for r in report.rows:
        writer.writerow([_fmt(v, args.precision) for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# shared builders

def _design(args, rule=None, num_studies=None) -> evr_planner.DesignSpec:
    rule = rule or args.rule
    b = getattr(args, "b", None) if rule == "egalitarian" else None
    rate = getattr(args, "rate", None) if rule == "egalitarian" else None
    C = num_studies if num_studies is not None else args.C
    return evr_planner.DesignSpec(args.N, C, Level(args.alpha), rule, b, rate, args.kappa)


def _rules(args) -> list[monte_carlo.Rule]:
    kinds = args.rule or ["all"]
    out = []
    for kind in kinds:
        if kind in ("gluttony", "all"):
            out.append(monte_carlo.Rule("gluttony"))
        if kind in ("splitting", "all"):
            out.append(monte_carlo.Rule("splitting"))
        if kind in ("egalitarian", "all"):
            out.extend(monte_carlo.Rule("egalitarian", b) for b in args.b)
    seen, unique = set(), []
    for r in out:
        if r not in seen:
            seen.add(r)
            unique.append(r)
    return unique


_SUMMARY_COLUMNS = ["rule", "replications", "num_studies", "mean_errors", "se_mean",
                    "variance_errors", "se_variance", "evr", "fwer_hat"]


def _summary_row(s: monte_carlo.ErrorCountSummary):
    return [s.per_rule_label, s.replications, s.num_studies, s.mean_errors, s.se_mean,
            s.variance_errors, s.se_variance, s.evr, s.fwer_hat]


def load_matrix_dir(path) -> dict:
    """``{tag: (sigma_x, sigma_y)}`` for each subdirectory holding both CSVs.

    Shipped fixture tags come first in their canonical order, others sorted.
    """
    root = Path(path)
    if not root.is_dir():
        raise ValueError(f"matrix directory {root} does not exist")
    found = {d.name: d for d in root.iterdir()
             if (d / "sigma_x.csv").is_file() and (d / "sigma_y.csv").is_file()}
    if not found:
        raise ValueError(f"no <tag>/sigma_x.csv + sigma_y.csv pairs under {root}")
    order = [t for t in APPENDIX_C_TAGS if t in found] + sorted(set(found) - set(APPENDIX_C_TAGS))
    return {t: (load_matrix(found[t] / "sigma_x.csv"), load_matrix(found[t] / "sigma_y.csv"))
            for t in order}


# ---------------------------------------------------------------------------
# evr commands

def cmd_evr_bound(args):
    spec = _design(args)
    crit = evr_planner.PerformanceCriteria(args.rho0) if args.rho0 is not None else None
    vb = evr_planner.expected_variance_bound(spec, crit)
    ratio = evr_planner.evr_bound(spec, crit)
    return Report(["rule", "n_total", "num_studies", "n_sub", "rho0", "variance_bound", "evr_bound"],
                  [[spec.rule, spec.n_total, spec.num_studies, spec.n_sub, args.rho0, vb, ratio]])


def cmd_evr_optimize(args):
    spec = _design(args, rule="egalitarian")
    rho0, eps = evr_planner.optimize_rho0(spec, args.grid_step)
    crit = evr_planner.PerformanceCriteria(rho0)
    return Report(["n_total", "num_studies", "n_sub", "rho0", "epsilon", "variance_bound", "evr_bound"],
                  [[spec.n_total, spec.num_studies, spec.n_sub, rho0, eps,
                    evr_planner.expected_variance_bound(spec, crit), evr_planner.evr_bound(spec, crit)]])


def cmd_evr_capacity(args):
    spec = _design(args, num_studies=1)
    crit = evr_planner.PerformanceCriteria(args.rho0) if args.rho0 is not None else None
    res = evr_planner.capacity(spec, args.delta, crit, args.min_per_study, args.grid_step)
    return Report(["rule", "n_total", "n_sub", "max_studies", "delta", "rho0_used", "epsilon", "binding"],
                  [[spec.rule, spec.n_total, spec.n_sub, res.max_studies, res.delta,
                    res.rho0_used, res.epsilon, res.binding]])


def cmd_evr_power(args):
    lv = Level(args.alpha)
    n_ctrl = args.n_ctrl if args.n_ctrl is not None else args.n
    if args.model == "t":
        if n_ctrl != args.n:
            raise ValueError("the t model supports balanced arms only")
        pw = evr_planner.power_two_sample_t(evr_planner.PowerQuery(args.d, lv, args.n))
    else:
        pw = evr_planner.power_unbalanced_z(args.d, lv, args.n, n_ctrl)
    return Report(["effect_size", "alpha", "n_treat", "n_ctrl", "model", "power"],
                  [[args.d, args.alpha, args.n, n_ctrl, args.model, pw]])


def cmd_evr_sample_size(args):
    n = evr_planner.min_sample_size(args.d, Level(args.alpha), args.power, args.model)
    return Report(["effect_size", "alpha", "power_target", "model", "n_per_arm"],
                  [[args.d, args.alpha, args.power, args.model, n]])


def cmd_evr_certify(args):
    spec = _design(args)
    crit = evr_planner.PerformanceCriteria(args.rho0, args.beta0, args.gamma)
    rec = evr_planner.certify_performant(spec, crit, args.d)
    return Report(["rule", "num_studies", "n_sub", "large_pair_expected", "large_pair_budget",
                   "budget_ok", "power", "power_target", "power_ok", "performant"],
                  [[spec.rule, spec.num_studies, spec.n_sub, rec.large_pair_expected,
                    rec.large_pair_budget, rec.budget_ok, rec.power, rec.power_target,
                    rec.power_ok, rec.performant]])


def cmd_evr_tail(args):
    if args.n is not None:
        n_sub = args.n
    elif args.b is not None:
        n_sub = int(round(args.b * math.sqrt(args.N)))
    else:
        n_sub = int(round(args.rate * args.N))
    geom = tail_bounds.OverlapGeometry(args.N, n_sub, args.kappa, args.rho0)
    rep = tail_bounds.p_mixed(geom)
    return Report(["n_total", "n_sub", "kappa", "rho0", "threshold_count", "delta", "p_chernoff",
                   "p_hoeffding", "p_markov", "p_mixed", "p_exact"],
                  [[args.N, n_sub, args.kappa, args.rho0, rep.threshold_count, rep.delta,
                    rep.p_chernoff, rep.p_hoeffding, rep.p_markov, rep.p_mixed, rep.p_exact]])


# ---------------------------------------------------------------------------
# calc commands

def cmd_calc_variance(args):
    lv = Level(args.alpha)
    if args.matrix is not None:
        m = load_matrix(args.matrix)
    elif args.C is not None and args.rho is not None:
        m = CorrelationMatrix.equicorrelated(args.C, args.rho)
    else:
        raise ValueError("give --matrix, or --C with --rho")
    v = rejection_calculus.error_count_variance(m, lv)
    base = m.dim * lv.bernoulli_variance
    return Report(["num_tests", "alpha", "mean_errors", "variance", "sd", "evr"],
                  [[m.dim, args.alpha, m.dim * args.alpha, v, math.sqrt(v), v / base]])


def cmd_calc_fwer(args):
    lv = Level(args.alpha)
    fwer = rejection_calculus.fwer_equicorrelated(rejection_calculus.EquicorrDesign(args.C, args.rho, lv))
    sd = math.sqrt(rejection_calculus.equicorrelated_variance(args.C, args.rho, lv))
    return Report(["num_tests", "rho", "alpha", "fwer", "sd"], [[args.C, args.rho, args.alpha, fwer, sd]])


def cmd_calc_excess(args):
    lv = Level(args.alpha)
    r = rejection_calculus.excess_R(args.rho, lv)
    return Report(["rho", "alpha", "critical_value", "joint_rejection", "excess_R"],
                  [[args.rho, args.alpha, lv.c, lv.alpha ** 2 + r, r]])


def cmd_calc_bvn(args):
    return Report(["x", "y", "rho", "cdf"], [[args.x, args.y, args.rho, bvn_cdf(args.x, args.y, args.rho)]])


def cmd_calc_quantile(args):
    return Report(["p", "z"], [[args.p, std_normal_quantile(args.p)]])


# ---------------------------------------------------------------------------
# alloc commands

def cmd_alloc_split(args):
    plan = allocation.split_uniform(args.N, args.C, args.contiguous)
    rows = [[i, int(j)] for i, block in enumerate(plan.blocks()) for j in block]
    return Report(["study", "index"], rows)


def cmd_alloc_draw(args):
    draw = allocation.egalitarian_draw(args.N, args.n, args.seed, args.study_id)
    if args.format == "text":
        return allocation.draw_to_text(draw)
    if args.format == "json":
        return allocation.draw_to_json(draw) + "\n"
    return Report(["index"], [[int(i)] for i in draw.indices], seed=args.seed)


def _read_draw(path: Path) -> np.ndarray:
    text = path.read_text()
    if text.lstrip().startswith("{"):
        return allocation.draw_from_json(text).indices
    return allocation.draw_from_text(text)


def cmd_alloc_overlap(args):
    sets = [_read_draw(Path(p)) for p in args.files]
    om = allocation.overlap_stats(sets, args.N)
    rows = [[i, j, int(om.counts[i, j]), om.omega[i, j], om.corr_bound[i, j]]
            for i in range(len(sets)) for j in range(i, len(sets))]
    return Report(["i", "j", "overlap_count", "omega", "corr_bound"], rows)


# ---------------------------------------------------------------------------
# sim commands

def cmd_sim_control(args):
    cfg = monte_carlo.SimConfig("control_group", args.N, args.C, Level(args.alpha), _rules(args),
                                args.reps, args.seed)
    return Report(_SUMMARY_COLUMNS, [_summary_row(s) for s in monte_carlo.simulate_control_group(cfg)],
                  seed=args.seed)


def cmd_sim_sur(args):
    if args.regime is not None:
        sx, sy = load_appendix_c(args.regime)
    elif args.sigma_x is not None and args.sigma_y is not None:
        sx, sy = load_matrix(args.sigma_x), load_matrix(args.sigma_y)
    else:
        raise ValueError("give --regime, or both --sigma-x and --sigma-y")
    C = args.C if args.C is not None else sx.dim
    cfg = monte_carlo.SimConfig("sur", args.N, C, Level(args.alpha), _rules(args),
                                args.reps, args.seed, sx, sy)
    return Report(_SUMMARY_COLUMNS, [_summary_row(s) for s in monte_carlo.simulate_sur(cfg)],
                  seed=args.seed)


def cmd_sim_clt(args):
    if args.overlap > args.n or 2 * args.n - args.overlap > args.N:
        raise ValueError("need overlap <= n and 2n - overlap <= N")
    first = np.arange(args.n)
    second = np.arange(args.n - args.overlap, 2 * args.n - args.overlap)
    chk = monte_carlo.clt_joint_cov_check(args.N, [first, second], args.reps, args.seed)
    target = chk.target_cov[0, 1]
    corr = chk.empirical_corr[0, 1]
    se = (1 - target ** 2) / math.sqrt(args.reps)
    return Report(["n_total", "n_sub", "overlap", "replications", "target_corr", "empirical_corr",
                   "se", "deviation_se", "empirical_var_1", "empirical_var_2"],
                  [[args.N, args.n, args.overlap, args.reps, target, corr, se,
                    (corr - target) / se if se > 0 else 0.0,
                    chk.empirical_cov[0, 0], chk.empirical_cov[1, 1]]], seed=args.seed)


# ---------------------------------------------------------------------------
# report commands

TABLE1_COLUMNS = ["design", "n_treat", "n_ctrl", "power", "mean_rho", "variance_bound", "rho0", "max_c"]


def table1_rows(N=10_000, C=10, alpha=0.05, kappa=0.5, delta=0.1, effect_size=0.2,
                power_target=0.99, bs=(10, 15, 20), grid_step=1e-4):
    """Rows of the shared-control design comparison (see ``TABLE1_COLUMNS``)."""
    lv = Level(alpha)
    M = evr_planner.min_sample_size(effect_size, lv, power_target)
    rows = []
    glut = evr_planner.DesignSpec(N, C, lv, "gluttony", kappa=kappa)
    rows.append(["gluttony", N, N, evr_planner.power_unbalanced_z(effect_size, lv, N, N), kappa,
                 evr_planner.expected_variance_bound(glut), None,
                 evr_planner.capacity(glut, delta).max_studies])
    split = evr_planner.DesignSpec(N, C, lv, "splitting", kappa=kappa)
    rows.append(["splitting", N, N // C, evr_planner.power_unbalanced_z(effect_size, lv, N, N // C), 0.0,
                 evr_planner.expected_variance_bound(split), None,
                 evr_planner.capacity(split, delta, min_per_study=M).max_studies])
    for b in bs:
        spec = evr_planner.DesignSpec(N, C, lv, "egalitarian", b=b, kappa=kappa)
        n = spec.n_sub
        rho0, _ = evr_planner.optimize_rho0(spec, grid_step)
        bound = evr_planner.expected_variance_bound(spec, evr_planner.PerformanceCriteria(rho0))
        cap = evr_planner.capacity(spec, delta, evr_planner.PerformanceCriteria(rho0), M)
        rows.append([f"egalitarian(b={b:g})", n, n, evr_planner.power_unbalanced_z(effect_size, lv, n, n),
                     kappa * n / N, bound, rho0, cap.max_studies])
    return rows


def cmd_report_table1(args):
    return Report(TABLE1_COLUMNS, table1_rows(args.N, args.C, args.alpha, args.kappa, args.delta,
                                              args.d, args.power, args.b, args.grid_step))


def cmd_report_table2(args):
    if args.matrices is None:
        mats = {t: load_appendix_c(t) for t in APPENDIX_C_TAGS}
    else:
        mats = load_matrix_dir(args.matrices)
    rules = [monte_carlo.Rule("gluttony"), monte_carlo.Rule("splitting")]
    rules += [monte_carlo.Rule("egalitarian", b) for b in args.b]
    rows = monte_carlo.sur_table(mats, args.N, args.C, Level(args.alpha), rules, args.reps, args.seed)
    return Report(["regime"] + _SUMMARY_COLUMNS, [[tag] + _summary_row(s) for tag, s in rows],
                  seed=args.seed)


def cmd_report_fwer_sd(args):
    grid = np.round(np.arange(0.0, 1.0 + args.step / 2, args.step), 12)
    grid = grid[grid <= 1.0]
    rows = rejection_calculus.fwer_vs_sd_curve(args.C, Level(args.alpha), grid)
    return Report(["rho", "fwer", "sd"], rows)


def cmd_report_subquadratic(args):
    lv = Level(args.alpha)
    grid = np.round(np.arange(-1.0, 1.0 + args.step / 2, args.step), 12)
    grid = grid[np.abs(grid) <= 1.0]
    R = rejection_calculus.excess_R(grid, lv)
    quad = lv.bernoulli_variance * grid ** 2
    return Report(["rho", "excess_R", "quadratic_bound", "gap"],
                  [[float(g), float(r), float(q), float(q - r)] for g, r, q in zip(grid, R, quad)])


# ---------------------------------------------------------------------------
# parser

def _add_output(p, text=False):
    choices = ["csv", "json", "text"] if text else ["csv", "json"]
    p.add_argument("--format", choices=choices, default="csv")
    p.add_argument("--precision", type=precision_type, default=6, help="significant digits")
    p.add_argument("--output", "-o", help="write here instead of standard output")


def _add_design(p, rule=True, studies=True):
    p.add_argument("--N", type=pos_int, required=True, help="dataset size")
    if studies:
        p.add_argument("--C", type=pos_int, default=10, help="number of studies")
    p.add_argument("--alpha", type=prob_open, default=0.05)
    if rule:
        p.add_argument("--rule", choices=evr_planner.RULES, default="egalitarian")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--b", type=pos_float, help="fraction coefficient, r = b / sqrt(N)")
    g.add_argument("--rate", type=unit_half_open, help="fixed per-study fraction")
    p.add_argument("--kappa", type=unit_half_open, default=1.0, help="association bound")


def _add_sim(p):
    p.add_argument("--N", type=pos_int, default=10_000)
    p.add_argument("--C", type=pos_int, default=None)
    p.add_argument("--alpha", type=prob_open, default=0.05)
    p.add_argument("--rule", action="append",
                   choices=["gluttony", "splitting", "egalitarian", "all"],
                   help="repeatable; default all")
    p.add_argument("--b", type=pos_float, nargs="+", default=[10.0, 15.0, 20.0])
    p.add_argument("--reps", type=_typed(int, lambda v: v >= 2, "must be at least 2"), default=5000)
    p.add_argument("--seed", type=seed_type, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evr-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    groups = parser.add_subparsers(dest="group", required=True)

    evr = groups.add_parser("evr", help="variance bounds, power and capacity").add_subparsers(
        dest="command", required=True)
    p = evr.add_parser("bound", help="expected variance and EVR bound")
    _add_design(p)
    p.add_argument("--rho0", type=unit_half_open)
    _add_output(p)
    p.set_defaults(func=cmd_evr_bound)

    p = evr.add_parser("optimize-rho0", help="grid-search the correlation threshold")
    _add_design(p, rule=False)
    p.add_argument("--grid-step", type=pos_float, default=1e-4)
    _add_output(p)
    p.set_defaults(func=cmd_evr_optimize)

    p = evr.add_parser("capacity", help="maximum number of studies")
    _add_design(p, studies=False)
    p.add_argument("--delta", type=pos_float, required=True, help="EVR tolerance, EVR <= 1 + delta")
    p.add_argument("--rho0", type=unit_half_open, help="fix the threshold instead of optimizing")
    p.add_argument("--min-per-study", type=pos_int)
    p.add_argument("--grid-step", type=pos_float, default=1e-4)
    _add_output(p)
    p.set_defaults(func=cmd_evr_capacity)

    p = evr.add_parser("power", help="two-sample test power")
    p.add_argument("--d", type=pos_float, required=True, help="effect size (Cohen's d)")
    p.add_argument("--alpha", type=prob_open, default=0.05)
    p.add_argument("--n", type=pos_int, required=True, help="treatment arm size")
    p.add_argument("--n-ctrl", type=pos_int, help="control arm size (default: balanced)")
    p.add_argument("--model", choices=["z", "t"], default="z")
    _add_output(p)
    p.set_defaults(func=cmd_evr_power)

    p = evr.add_parser("sample-size", help="minimum per-arm size for a power target")
    p.add_argument("--d", type=pos_float, required=True)
    p.add_argument("--alpha", type=prob_open, default=0.05)
    p.add_argument("--power", type=prob_open, default=0.99)
    p.add_argument("--model", choices=["z", "t"], default="t")
    _add_output(p)
    p.set_defaults(func=cmd_evr_sample_size)

    p = evr.add_parser("certify", help="check the pair budget and per-study power")
    _add_design(p)
    p.add_argument("--rho0", type=unit_half_open, required=True)
    p.add_argument("--beta0", type=prob_open, default=0.01)
    p.add_argument("--gamma", type=nonneg_float, default=0.0)
    p.add_argument("--d", type=pos_float, required=True)
    _add_output(p)
    p.set_defaults(func=cmd_evr_certify)

    p = evr.add_parser("tail-bounds", help="overlap tail bounds for one geometry")
    p.add_argument("--N", type=pos_int, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--n", type=pos_int, help="subsample size")
    g.add_argument("--b", type=pos_float)
    g.add_argument("--rate", type=unit_half_open)
    p.add_argument("--kappa", type=unit_half_open, default=1.0)
    p.add_argument("--rho0", type=unit_half_open, required=True)
    _add_output(p)
    p.set_defaults(func=cmd_evr_tail)

    calc = groups.add_parser("calc", help="error-count calculus").add_subparsers(dest="command", required=True)
    p = calc.add_parser("variance", help="error-count variance for a correlation matrix")
    p.add_argument("--matrix", help="CSV correlation matrix")
    p.add_argument("--C", type=pos_int)
    p.add_argument("--rho", type=unit_closed, help="equicorrelation")
    p.add_argument("--alpha", type=prob_open, default=0.05)
    _add_output(p)
    p.set_defaults(func=cmd_calc_variance)

    p = calc.add_parser("fwer", help="familywise error rate of equicorrelated tests")
    p.add_argument("--C", type=pos_int, required=True)
    p.add_argument("--rho", type=unit_closed, required=True)
    p.add_argument("--alpha", type=prob_open, default=0.05)
    _add_output(p)
    p.set_defaults(func=cmd_calc_fwer)

    p = calc.add_parser("excess", help="excess joint rejection probability R(rho, c)")
    p.add_argument("--rho", type=corr_value, required=True)
    p.add_argument("--alpha", type=prob_open, default=0.05)
    _add_output(p)
    p.set_defaults(func=cmd_calc_excess)

    p = calc.add_parser("bvn", help="bivariate normal CDF")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--rho", type=corr_value, required=True)
    _add_output(p)
    p.set_defaults(func=cmd_calc_bvn)

    p = calc.add_parser("quantile", help="standard normal quantile")
    p.add_argument("--p", type=prob_open, required=True)
    _add_output(p)
    p.set_defaults(func=cmd_calc_quantile)

    alloc = groups.add_parser("alloc", help="data allocation").add_subparsers(dest="command", required=True)
    p = alloc.add_parser("split", help="uniform splitting blocks")
    p.add_argument("--N", type=pos_int, required=True)
    p.add_argument("--C", type=pos_int, required=True)
    p.add_argument("--contiguous", action="store_true", help="runs of consecutive indices")
    _add_output(p)
    p.set_defaults(func=cmd_alloc_split)

    p = alloc.add_parser("draw", help="seeded egalitarian subsample")
    p.add_argument("--N", type=pos_int, required=True)
    p.add_argument("--n", type=nonneg_int, required=True)
    p.add_argument("--seed", type=seed_type, required=True)
    p.add_argument("--study-id", type=nonneg_int, required=True)
    _add_output(p, text=True)
    p.set_defaults(func=cmd_alloc_draw)

    p = alloc.add_parser("overlap", help="pairwise overlaps of index files")
    p.add_argument("--N", type=pos_int, required=True)
    p.add_argument("files", nargs="+", help="newline-delimited or JSON index files")
    _add_output(p)
    p.set_defaults(func=cmd_alloc_overlap)

    sim = groups.add_parser("sim", help="Monte Carlo simulations").add_subparsers(dest="command", required=True)
    p = sim.add_parser("control-group", help="shared-control design")
    _add_sim(p)
    _add_output(p)
    p.set_defaults(func=cmd_sim_control)

    p = sim.add_parser("sur", help="regression family with correlated blocks")
    _add_sim(p)
    p.add_argument("--regime", choices=APPENDIX_C_TAGS, help="shipped matrix pair")
    p.add_argument("--sigma-x")
    p.add_argument("--sigma-y")
    _add_output(p)
    p.set_defaults(func=cmd_sim_sur)

    p = sim.add_parser("clt-check", help="joint normality of overlapping subset means")
    p.add_argument("--N", type=pos_int, default=10_000)
    p.add_argument("--n", type=pos_int, default=2000)
    p.add_argument("--overlap", type=nonneg_int, default=1000)
    p.add_argument("--reps", type=_typed(int, lambda v: v >= 2, "must be at least 2"), default=100_000)
    p.add_argument("--seed", type=seed_type, required=True)
    _add_output(p)
    p.set_defaults(func=cmd_sim_clt)

    report = groups.add_parser("report", help="tables and figure data").add_subparsers(
        dest="command", required=True)
    p = report.add_parser("table1", help="shared-control design comparison")
    p.add_argument("--N", type=pos_int, default=10_000)
    p.add_argument("--C", type=pos_int, default=10)
    p.add_argument("--alpha", type=prob_open, default=0.05)
    p.add_argument("--kappa", type=unit_half_open, default=0.5)
    p.add_argument("--delta", type=pos_float, default=0.1)
    p.add_argument("--d", type=pos_float, default=0.2)
    p.add_argument("--power", type=prob_open, default=0.99)
    p.add_argument("--b", type=pos_float, nargs="+", default=[10.0, 15.0, 20.0])
    p.add_argument("--grid-step", type=pos_float, default=1e-4)
    _add_output(p)
    p.set_defaults(func=cmd_report_table1)

    p = report.add_parser("table2", help="simulated variance for the regression family")
    p.add_argument("--matrices", help="directory of <tag>/sigma_{x,y}.csv (default: shipped)")
    p.add_argument("--N", type=pos_int, default=10_000)
    p.add_argument("--C", type=pos_int, default=10)
    p.add_argument("--alpha", type=prob_open, default=0.05)
    p.add_argument("--b", type=pos_float, nargs="+", default=[10.0, 15.0, 20.0])
    p.add_argument("--reps", type=_typed(int, lambda v: v >= 2, "must be at least 2"), default=5000)
    p.add_argument("--seed", type=seed_type, required=True)
    _add_output(p)
    p.set_defaults(func=cmd_report_table2)

    p = report.add_parser("fig-fwer-sd", help="FWER and error-count SD along equicorrelation")
    p.add_argument("--C", type=pos_int, default=10)
    p.add_argument("--alpha", type=prob_open, default=0.05)
    p.add_argument("--step", type=_typed(float, lambda v: 0 < v <= 1, "must lie in (0, 1]"), default=0.01)
    _add_output(p)
    p.set_defaults(func=cmd_report_fwer_sd)

    p = report.add_parser("fig-subquadratic", help="R(rho, c) against a(1-a) rho^2")
    p.add_argument("--alpha", type=prob_open, default=0.05)
    p.add_argument("--step", type=_typed(float, lambda v: 0 < v <= 1, "must lie in (0, 1]"), default=0.01)
    _add_output(p)
    p.set_defaults(func=cmd_report_subquadratic)
    return parser


def run(argv=None, stdout=None, stderr=None) -> int:
    """Parse ``argv``, run the command and return the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        result = args.func(args)
        text = result if isinstance(result, str) else _render(result, args, argv)
        if args.output:
            Path(args.output).write_text(text)
        else:
            stdout.write(text)
    except (ValueError, KeyError, OSError) as exc:
        stderr.write(f"evr-lab: error: {exc}\n")
        return 2
    except Exception as exc:  # noqa: BLE001 - surface as a runtime failure
        stderr.write(f"evr-lab: runtime error: {type(exc).__name__}: {exc}\n")
        return 1
    return 0


def main() -> None:
    sys.exit(run())
