"""Command line entry point: ``catbounds {bound,solve,verify,simulate,example}``.

Exit codes: 0 success, 1 invalid input, 2 bound undefined, 3 solver or
simulator failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import catalog
from .bounds import BoundReport, build_report
from .errors import (
    BoundUndefinedError,
    MajorantError,
    ModelValidationError,
    QuadratureError,
    SolverError,
)
from .model import TimeFunction, WeightSequence
from .montecarlo import compare_tv, simulate_paths
from .schema import ModelSpec, dump_spec, load_spec, parse_weights, write_atomic, write_csv
from .solver import delta, limiting_regime_check, pair_diagnostics, solve_forward

EXIT_OK, EXIT_INPUT, EXIT_UNDEFINED, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3, 4
RATIO_LIMIT = 1.0 + 1e-6
VERIFY_STATES = (1, 5, 20)


class _Run:
    """Resolved configuration for one invocation."""

    def __init__(self, args, spec: ModelSpec):
        for name in ("trunc", "tmax", "grid", "tol", "paths"):
            v = getattr(args, name)
            if not v > 0:
                raise ModelValidationError(f"--{name} must be positive, got {v}")
        if args.grid < 2:
            raise ModelValidationError("--grid needs at least 2 points")
        self.args = args
        self.spec = spec
        self.model = spec.model
        if args.weights is not None:
            self.weights = parse_weights(args.weights)
        else:
            self.weights = spec.weights or WeightSequence.linear()
        self.N = args.trunc
        self.t_grid = np.linspace(0.0, args.tmax, args.grid)
        self.out = Path(args.out)
        self.override = None if args.beta is None else TimeFunction.constant(
            args.beta, name="beta_override", signed=True)

    def report(self) -> BoundReport:
        return build_report(self.model, self.weights, self.N, t_max=self.args.tmax,
                            claims=self.spec.claims, beta_override=self.override)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(args, summary: dict, lines: list[str]) -> None:
    if args.json:
        print(json.dumps(summary, indent=2, default=_jsonable))
    else:
        print("\n".join(lines))


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _json_text(obj) -> str:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        return v
    return json.dumps(clean(json.loads(json.dumps(obj, default=_jsonable))), indent=2) + "\n"


# -- subcommands ----------------------------------------------------------------
def _bound(run: _Run) -> tuple[int, dict, list[str]]:
    rep = run.report()
    data = rep.to_json()
    write_atomic(run.out / "bounds.json", _json_text(data))
    write_csv(run.out / "beta.csv", ["t", "beta_double_star", "integral", "bound_general"],
              rep.csv_rows(run.t_grid))
    lines = [f"status: {rep.status}" + (f" ({rep.message})" if rep.message else ""),
             f"mean contraction rate: {rep.beta_mean:.6g}",
             f"b_star: {rep.b_star:.6g}"]
    if rep.envelope is not None:
        lines += [f"R_star_star: {rep.envelope.R:.12g}", f"b_star_star: {rep.envelope.b:.12g}",
                  f"limit bound: {rep.limit_bound():.12g}"]
    for c in rep.discrepancies:
        lines.append(f"discrepancy {c['quantity']}: published {c['published']}, "
                     f"computed {c['computed']}")
    code = EXIT_OK if rep.status == "ok" else EXIT_UNDEFINED
    return code, {"command": "bound", "exit": code, "report": data}, lines


def _solve(run: _Run) -> tuple[int, dict, list[str]]:
    traj = solve_forward(run.model, run.N, delta(run.args.initial, run.N), run.t_grid,
                         run.args.tol, weights=run.weights)
    header, data = traj.table()
    write_csv(run.out / "trajectory.csv", header, data)
    st = traj.stats
    summary = {"command": "solve", "exit": EXIT_OK, "steps": st.steps, "rejected": st.rejected,
               "max_local_error": st.max_local_error,
               "max_mass_drift": float(np.abs(traj.tail_defect).max()),
               "final_mean": float(traj.mean[-1]), "final_norm_1D": float(traj.norm_1D[-1])}
    lines = [f"{k}: {v}" for k, v in summary.items() if k not in ("command", "exit")]
    return EXIT_OK, summary, lines


def _verify(run: _Run, rep: BoundReport | None = None) -> tuple[int, dict, list[str]]:
    rep = rep or run.report()
    if rep.status != "ok" or rep.envelope is None:
        raise BoundUndefinedError(rep.message or "no envelope for the contraction rate")
    rows, worst = [], 0.0
    states = [j for j in VERIFY_STATES if j <= run.N]
    for j in states:
        pd = pair_diagnostics(run.model, run.N, delta(0, run.N), delta(j, run.N), run.weights,
                              rep, run.t_grid, run.args.tol)
        header, data = pd.table()
        write_csv(run.out / f"pair_0_{j}.csv", header, data)
        ratio = pd.violation_ratio or 0.0
        mean_ratio = None
        if rep.bounds().applicable["mean"]:
            mb = rep.bounds().mean(run.t_grid, j)
            gap = np.abs(pd.mean_gap)
            with np.errstate(divide="ignore", invalid="ignore"):
                mean_ratio = float(np.max(np.where(gap == 0, 0.0, gap / mb)))
        worst = max(worst, ratio, mean_ratio or 0.0)
        rows.append({"j": j, "contraction_ratio": ratio, "mean_ratio": mean_ratio,
                     "norm_equivalence": pd.norm_equivalence})
    lc = limiting_regime_check(run.model, run.N, run.weights, rep, run.t_grid, tol=run.args.tol)
    limit_ratio = lc.observed_sup / lc.limit_bound if lc.limit_bound else math.inf
    worst = max(worst, limit_ratio)
    ok = worst <= RATIO_LIMIT
    code = EXIT_OK if ok else EXIT_VERIFY
    summary = {"command": "verify", "exit": code, "passed": ok, "max_ratio": worst,
               "pairs": rows, "limit": {"window": list(lc.window), "observed_sup": lc.observed_sup,
                                        "bound": lc.limit_bound, "ratio": limit_ratio},
               "rate_override": rep.overridden}
    lines = [f"{'pair':>8} {'contraction':>14} {'mean':>14}"]
    for r in rows:
        mr = "n/a" if r["mean_ratio"] is None else f"{r['mean_ratio']:.9f}"
        lines.append(f"{'0 vs ' + str(r['j']):>8} {r['contraction_ratio']:>14.9f} {mr:>14}")
    lines.append(f"late-window sup {lc.observed_sup:.6g} vs limit bound {lc.limit_bound:.6g}")
    lines.append(f"{'PASS' if ok else 'FAIL'}: max ratio {worst:.9f} (limit {RATIO_LIMIT})")
    write_atomic(run.out / "verify.json", _json_text(summary))
    return code, summary, lines


def _simulate(run: _Run) -> tuple[int, dict, list[str]]:
    a = run.args
    ens = simulate_paths(run.model, a.initial, a.tmax, a.paths, a.seed, eval_times=run.t_grid,
                         record_events=a.events)
    write_csv(run.out / "ensemble.csv", ["t", "state", "empirical_p", "stderr"],
              ens.summary_rows())
    if a.events:
        write_atomic(run.out / "events.jsonl", "".join(l + "\n" for l in ens.event_lines()))
    traj = solve_forward(run.model, run.N, delta(a.initial, run.N), run.t_grid, a.tol)
    tv_times = [t for t in run.t_grid if t > 0 and abs(t - round(t)) < 1e-9]
    tvs = [compare_tv(ens, traj, t, seed=a.seed) for t in tv_times]
    write_csv(run.out / "tv.csv", ["t", "tv", "stderr", "null_mean", "null_sd"],
              [(c.t, c.tv, c.stderr, c.null_mean, c.null_sd) for c in tvs])
    summary = {"command": "simulate", "exit": EXIT_OK, "paths": a.paths, "seed": a.seed,
               "tv": [{"t": c.t, "tv": c.tv, "stderr": c.stderr, "null_mean": c.null_mean,
                       "consistent": c.consistent} for c in tvs]}
    lines = [f"t={c.t:g}: tv {c.tv:.5f} (se {c.stderr:.5f}, noise level {c.null_mean:.5f})"
             for c in tvs]
    return EXIT_OK, summary, lines


def _example(args) -> tuple[int, dict, list[str]]:
    variant = args.variant
    weights = catalog.example_weights()
    claims = catalog.published_claims() if variant == "published" else None
    spec = ModelSpec(catalog.example_model(variant), weights, claims)
    out = Path(args.out)
    path = out / f"example_{variant}.json"
    write_atomic(path, json.dumps(dump_spec(spec), indent=2) + "\n")
    args.model, args.weights = str(path), None
    run = _Run(args, load_spec(path))
    b_code, b_sum, b_lines = _bound(run)
    rep_json = b_sum["report"]
    _, s_sum, _ = _solve(run)
    lines = [f"example {variant}: spec written to {path}",
             *(l for l in b_lines if not l.startswith("discrepancy")),
             f"solve: {s_sum['steps']} steps, mass drift {s_sum['max_mass_drift']:.3g}"]
    summary = {"command": "example", "variant": variant, "spec": str(path),
               "bound": rep_json, "solve": s_sum}
    code = EXIT_OK
    if b_code == EXIT_OK:
        v_code, v_sum, v_lines = _verify(run)
        summary["verify"] = v_sum
        lines += v_lines
        code = v_code
    else:
        lines.append("verify skipped: the first-principles contraction rate has no positive mean")
    if claims is not None:
        lines.append(f"{'quantity':<36} {'published':>14} {'computed':>14}  agrees")
        for c in rep_json["comparisons"]:
            lines.append(f"{c['quantity']:<36} {_fmt(c['published']):>14} "
                         f"{_fmt(c['computed']):>14}  {'yes' if c['agrees'] else 'NO'}")
    summary["exit"] = code
    return code, summary, lines


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.6g}"


# -- parser ---------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--weights", default=None,
                        help="linear | one | geometric:RHO | file:PATH (default: spec or linear)")
    common.add_argument("--trunc", type=int, default=200, help="truncation level N")
    common.add_argument("--tmax", type=float, default=10.0)
    common.add_argument("--grid", type=int, default=201, help="number of output times")
    common.add_argument("--tol", type=float, default=1e-10, help="local error tolerance")
    common.add_argument("--paths", type=int, default=10_000, help="Monte Carlo path count")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--initial", type=int, default=0, help="initial state")
    common.add_argument("--beta", type=float, default=None,
                        help="replace the computed contraction rate by this constant")
    common.add_argument("--out", default="catbounds-out", help="output directory")
    common.add_argument("--json", action="store_true", help="machine-readable summary")

    p = argparse.ArgumentParser(prog="catbounds", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in [("bound", "contraction rate, envelope and bounds"),
                       ("solve", "integrate the forward equations"),
                       ("verify", "check the bounds against solved trajectories"),
                       ("simulate", "Monte Carlo paths and TV distance to the ODE")]:
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("--model", required=True, help="JSON model spec")
        if name == "simulate":
            sp.add_argument("--events", action="store_true", help="write events.jsonl")
    ex = sub.add_parser("example", parents=[common], help="built-in example, full pipeline")
    ex.add_argument("variant", choices=catalog.VARIANTS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "example":
            code, summary, lines = _example(args)
        else:
            run = _Run(args, load_spec(args.model))
            handler = {"bound": _bound, "solve": _solve, "verify": _verify,
                       "simulate": _simulate}[args.command]
            code, summary, lines = handler(run)
    except (ModelValidationError, ValueError, OSError) as exc:
        _log(f"error: {exc}")
        return EXIT_INPUT
    except BoundUndefinedError as exc:
        _log(f"bound undefined: {exc}")
        return EXIT_UNDEFINED
    except (SolverError, MajorantError, QuadratureError) as exc:
        _log(f"solver failure: {exc}")
        return EXIT_SOLVER
    _emit(args, summary, lines)
    return code


if __name__ == "__main__":
    sys.exit(main())
