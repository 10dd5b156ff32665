"""Command-line interface: plan -> simulate -> reconstruct, plus cost comparison tables.

Exit codes: 0 success, 2 invalid input, 3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import nullcontext

import numpy as np

from . import io
from .errors import TomographyError
from .measurement import MODE_EXACT, MODE_SAMPLED, ReadoutNoiseModel, simulate_plan
from .planner import COVERAGE_RULES, COVERAGE_SINGLE, TomographyPlan, build_plan
from .reconstruction import FitConfig, LikelihoodProblem, fidelity, fit, progressive_fit
from .states import SparseStateVector, parse_state_spec, to_density
from .thresholds import DiagonalMeasurement
from .tqst import cost_report

log = logging.getLogger("ectqst")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NONCONVERGED = 3

PUBLISHED_W_CROSSINGS = {4: 5, 5: 7, 6: 5, 7: 10}


class NonConvergence(Exception):
    pass


def exact_diagonal(state: SparseStateVector) -> DiagonalMeasurement:
    return DiagonalMeasurement.from_probabilities(np.abs(state.to_dense()) ** 2, state.d, state.N)


def _thread_limit():
    limit = os.environ.get("ECTQST_THREADS")
    if not limit:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(limit))


def make_plan(args) -> TomographyPlan:
    policy = io.parse_threshold(args.threshold)
    if args.state:
        state = parse_state_spec(args.state)
        for flag, value in (("--d", args.d), ("--n", args.n)):
            expected = state.d if flag == "--d" else state.N
            if value is not None and value != expected:
                raise TomographyError(f"{flag} {value} disagrees with state {args.state}")
        diag = exact_diagonal(state)
    else:
        diag = io.load_diagonal(args.diagonal, args.d, args.n)
    return build_plan(diag, policy, skip_imaginary=args.skip_imaginary,
                      coverage=args.coverage, seed=args.seed)


def cmd_plan(args) -> int:
    plan = make_plan(args)
    io.save_plan(args.out, plan)
    print(f"plan: d={plan.d} N={plan.N} t={plan.threshold:.6g} targets={len(plan.targets)} "
          f"candidates={len(plan.candidates)} settings={len(plan.settings)} (incl. diagonal)")
    return EXIT_OK


def _noise(eps: float | None):
    return ReadoutNoiseModel(eps) if eps else None


def cmd_simulate(args) -> int:
    plan = io.load_plan(args.plan)
    state = parse_state_spec(args.state)
    if (state.d, state.N) != (plan.d, plan.N):
        raise TomographyError(f"state is d={state.d}, N={state.N} but plan is d={plan.d}, N={plan.N}")
    from .generators import build_catalog

    noise = _noise(args.noise)
    records = simulate_plan(to_density(state), plan.settings, args.shots, args.seed,
                            catalog=build_catalog(plan.d, plan.mas), noise=noise, mode=args.mode)
    io.write_json(args.out, io.counts_to_dict(records, plan.d, plan.N, shots=args.shots,
                                              mode=args.mode, noise=noise, seed=args.seed))
    print(f"simulated {len(records)} settings x {args.shots} shots ({args.mode})")
    return EXIT_OK


def _match_records(plan: TomographyPlan, records, prefix_ok: bool):
    by_setting = {r.setting: r for r in records}
    matched = []
    for K in plan.settings:
        if K not in by_setting:
            break
        matched.append(by_setting[K])
    if not matched:
        raise TomographyError("counts do not include the diagonal setting")
    if len(matched) < len(plan.settings) and not prefix_ok:
        missing = plan.settings[len(matched)]
        raise TomographyError(f"counts are missing setting {missing}")
    return matched


def _fit_summary(report) -> dict:
    return {"objective": report.objective, "iterations": report.iterations,
            "grad_norm": report.grad_norm, "rank_history": report.rank_history,
            "purity": report.purity, "converged": report.converged,
            "rank_adequate": report.rank_adequate}


def _cost_dict(cost) -> dict:
    return {name: {"settings": s, "measurements": m} for name, s, m in cost.rows()}


def cmd_reconstruct(args) -> int:
    plan = io.load_plan(args.plan)
    meta, records = io.load_counts(args.counts)
    if (meta["d"], meta["N"]) != (plan.d, plan.N):
        raise TomographyError("counts and plan dimensions differ")
    matched = _match_records(plan, records, prefix_ok=args.progressive)
    problem = LikelihoodProblem.from_records(matched, plan.d, plan.N, floor=args.floor, mas=plan.mas)
    config = FitConfig(rank=args.rank, seed=args.seed, init=args.init, max_iter=args.max_iter)
    target = None
    if args.target:
        state = parse_state_spec(args.target)
        target = to_density(state)
        if target.shape != (problem.dim, problem.dim):
            raise TomographyError("target state dimension differs from the plan")

    with _thread_limit():
        report = fit(problem, config)
        result = None
        if args.progressive and len(problem.settings) > 1:
            result = progressive_fit(problem, config, target=target,
                                     stop_fidelity=args.stop_fidelity, stability=args.stability,
                                     truncate=args.stop_early)

    fids = {"vs_target": fidelity(report.rho, target) if target is not None else None,
            "vs_full_plan": None}
    out = {
        "version": io.FORMAT_VERSION,
        "d": plan.d,
        "N": plan.N,
        "settings_used": len(matched),
        "rho": io.matrix_to_pairs(report.rho),
        "fit": _fit_summary(report),
        "fidelities": fids,
        "cost": _cost_dict(cost_report(plan)),
        "curve": [],
        "l_star": None,
    }
    if result is not None:
        curve = result.curve()
        out["curve"] = [{"l": l, "fidelity_prev": fp, "fidelity_target": ft} for l, fp, ft in curve]
        out["l_star"] = result.l_star
        if result.l_star is not None:
            rho_star = result.steps[result.l_star - 1].report.rho
            fids["vs_full_plan"] = fidelity(rho_star, report.rho)
            if target is not None:
                fids["l_star_vs_target"] = fidelity(rho_star, target)
        if args.curve:
            io.write_curve_csv(args.curve, curve)
            if not args.no_figure:
                from .plotting import figure_path, plot_fidelity_curve

                plot_fidelity_curve(curve, figure_path(args.curve),
                                    title=f"d={plan.d}, N={plan.N}, {len(plan.settings)} settings")
    io.write_json(args.out, out)
    msg = f"reconstructed with {len(matched)} settings, rank history {report.rank_history}"
    if fids["vs_target"] is not None:
        msg += f", F(target)={fids['vs_target']:.6f}"
    if result is not None and target is not None:
        msg += f", first l with F>0.999: {result.first_crossing(0.999)}"
    if out["l_star"] is not None:
        msg += f", l*={out['l_star']}"
    print(msg)
    if not report.converged:
        log.warning("fit did not converge: %s", report.message)
        return EXIT_NONCONVERGED
    return EXIT_OK


COMPARE_HEADER = ("state", "d", "N", "diag_nonzero", "threshold",
                  "fqst_settings", "fqst_M", "tqst_settings", "tqst_M",
                  "ect_settings", "ect_M", "ect_fidelity_target")


def compare_row(spec: str, threshold: str, coverage: str = COVERAGE_SINGLE,
                shots: int = 10_000, seed: int = 0) -> tuple[list, object]:
    state = parse_state_spec(spec)
    diag = exact_diagonal(state)
    plan = build_plan(diag, io.parse_threshold(threshold), coverage=coverage)
    cost = cost_report(plan)
    rho = to_density(state)
    records = simulate_plan(rho, plan.settings, shots, seed, mode=MODE_EXACT)
    report = fit(LikelihoodProblem.from_records(records, plan.d, plan.N), FitConfig(seed=seed))
    row = [spec, plan.d, plan.N, state.diagonal_fill(), "%.6g" % plan.threshold,
           cost.fqst_settings, cost.fqst_measurements, cost.tqst_settings, cost.tqst_measurements,
           cost.ect_settings, cost.ect_measurements, "%.6g" % fidelity(report.rho, rho)]
    return row, cost


def cmd_compare(args) -> int:
    rows, costs = [], []
    with _thread_limit():
        for spec in args.state:
            row, cost = compare_row(spec, args.threshold, args.coverage, seed=args.seed)
            rows.append(row)
            costs.append(cost)
            print(", ".join(f"{h}={v}" for h, v in zip(COMPARE_HEADER, row)))
    io.write_table_csv(args.out, COMPARE_HEADER, rows)
    if not args.no_figure:
        from .plotting import figure_path, plot_cost_comparison

        plot_cost_comparison(args.state, {
            "fQST": [c.fqst_measurements for c in costs],
            "tQST": [c.tqst_measurements for c in costs],
            "ECT-QST": [c.ect_measurements for c in costs]}, figure_path(args.out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ectqst", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="choose measurement settings from a diagonal")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--state", help="state spec; its exact diagonal is used")
    src.add_argument("--diagonal", help="JSON file with measured diagonal counts")
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--threshold", default="min-nonzero",
                   help="fixed:<t> | gini | min-nonzero | noise:<calibration.json>")
    p.add_argument("--skip-imaginary", action="store_true",
                   help="only target real parts (known-real states)")
    p.add_argument("--coverage", choices=COVERAGE_RULES, default=COVERAGE_SINGLE)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="sample counts for every plan setting")
    p.add_argument("--state", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--shots", type=int, default=10_000)
    p.add_argument("--mode", choices=(MODE_EXACT, MODE_SAMPLED), default=MODE_SAMPLED)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0, help="per-qudit readout flip probability")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="maximum-likelihood density matrix")
    p.add_argument("--counts", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--rank", type=int, help="initial rank (default N)")
    p.add_argument("--init", choices=("diagonal", "random"), default="diagonal")
    p.add_argument("--floor", type=float, default=1.0, help="denominator floor in counts")
    p.add_argument("--max-iter", type=int, default=5000, help="optimizer iterations per fit")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--progressive", action="store_true")
    p.add_argument("--stop-fidelity", type=float, default=0.95,
                   help="F* for l*: F(l, l-1) must exceed it for --stability more settings")
    p.add_argument("--stability", type=int, default=3)
    p.add_argument("--stop-early", action="store_true",
                   help="end the progressive sweep at l* instead of running every setting")
    p.add_argument("--target", help="state spec of the ideal state")
    p.add_argument("--curve", help="CSV output for the progressive fidelity curve")
    p.add_argument("--no-figure", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("compare", help="settings and measurement counts of fQST / tQST / ECT-QST")
    p.add_argument("--state", required=True, action="append")
    p.add_argument("--threshold", default="min-nonzero")
    p.add_argument("--coverage", choices=COVERAGE_RULES, default=COVERAGE_SINGLE)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-figure", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (TomographyError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
