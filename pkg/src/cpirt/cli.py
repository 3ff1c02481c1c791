"""Command-line surface: simulate, fit, select, score, study.

Exit status: 0 on success, 1 on usage errors, 2 on data or convergence
errors. Diagnostics go to stderr; results go to files (and stdout summaries).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .estimation import FitConfig, InitializationError, fit
from .inference import score_persons
from .io import (
    ResponseParseError,
    read_fit,
    read_responses,
    write_fit,
    write_metrics_csv,
    write_metrics_json,
    write_scores,
    write_selection_report,
)
from .selection import SelectionError, select_c
from .simulation import ScenarioConfig, run_scenario, simulate_dataset

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _fit_config(args) -> FitConfig:
    return FitConfig(
        quadrature_nodes=args.nodes,
        max_iterations=args.max_iter,
        gradient_tolerance=args.tol,
        ridge_penalty=args.ridge,
    )


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--nodes", type=int, default=49, help="quadrature nodes (default 49)")
    p.add_argument("--tol", type=float, default=1e-6, help="gradient max-norm tolerance")
    p.add_argument("--max-iter", type=int, default=500, help="iteration cap")
    p.add_argument("--ridge", type=float, default=0.0, help="ridge penalty on item parameters")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cpirt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset with truth files")
    p_sim.add_argument("--n", type=int, required=True, help="number of respondents")
    p_sim.add_argument("--j", type=int, required=True, help="number of items")
    p_sim.add_argument("--c", type=int, required=True, help="earliest change-point")
    p_sim.add_argument("--alpha", type=float, default=0.2)
    p_sim.add_argument("--beta", type=float, default=-0.1)
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--out-dir", required=True)

    p_fit = sub.add_parser("fit", help="fit the change-point model at a fixed c")
    p_fit.add_argument("--responses", required=True)
    p_fit.add_argument("--c", type=int, required=True)
    _add_fit_flags(p_fit)
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument("--plots", help="directory for rendered figures")

    p_sel = sub.add_parser("select", help="choose the earliest change-point by BIC/AIC")
    p_sel.add_argument("--responses", required=True)
    p_sel.add_argument(
        "--c-grid",
        help="comma-separated c values (default: ceil(J/2)..J-1 plus the baseline)",
    )
    p_sel.add_argument("--criterion", choices=("bic", "aic"), default="bic")
    _add_fit_flags(p_sel)
    p_sel.add_argument("--out", required=True, help="selection report path (JSON)")
    p_sel.add_argument("--plots", help="directory for rendered figures")

    p_score = sub.add_parser("score", help="posterior change-points and ability estimates")
    p_score.add_argument("--responses", required=True)
    p_score.add_argument("--fit", required=True, help="fit document from `fit` or `select`")
    p_score.add_argument("--nodes", type=int, default=49)
    p_score.add_argument("--out", required=True, help="scores CSV path")
    p_score.add_argument("--plots", help="directory for rendered figures")

    p_study = sub.add_parser("study", help="run a simulation study cell")
    p_study.add_argument("--scenario", type=int, choices=(1, 2), required=True)
    p_study.add_argument("--c", type=int, default=20)
    p_study.add_argument("--beta", type=float, default=-0.1)
    p_study.add_argument("--alpha", type=float, default=0.2)
    p_study.add_argument("--n", type=int, default=1000)
    p_study.add_argument("--j", type=int, default=30)
    p_study.add_argument("--replications", type=int, default=25)
    p_study.add_argument("--seed", type=int, required=True)
    p_study.add_argument("--nodes", type=int, default=49)
    p_study.add_argument("--tol", type=float, default=1e-4)
    p_study.add_argument("--max-iter", type=int, default=500)
    p_study.add_argument("--ridge", type=float, default=0.0,
                         help="ridge penalty on item parameters")
    p_study.add_argument("--out", required=True, help="output stem; writes .csv and .json")
    p_study.add_argument("--plots", help="directory for rendered figures")
    return parser


def _cmd_simulate(args) -> int:
    config = ScenarioConfig(
        scenario=2,
        n_persons=args.n,
        n_items=args.j,
        c=args.c,
        alpha=args.alpha,
        beta=args.beta,
        replications=1,
        seed=args.seed,
    )
    ds = simulate_dataset(config, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "responses.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in ds.responses.entries:
            writer.writerow([int(v) for v in row])
    with open(out / "theta_true.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["person_index", "theta"])
        for i, t in enumerate(ds.theta_true, start=1):
            writer.writerow([i, repr(float(t))])
    with open(out / "tau_true.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["person_index", "tau"])
        for i, t in enumerate(ds.tau_true, start=1):
            writer.writerow([i, int(t)])
    items_doc = {
        "schema_version": "cpirt-items/1",
        "c": args.c,
        "J": args.j,
        "alpha": args.alpha,
        "beta": args.beta,
        "seed": args.seed,
        "d": [float(v) for v in ds.items_true.d],
        "a": [float(v) for v in ds.items_true.a],
        "gamma": [float(v) for v in ds.items_true.gamma],
    }
    (out / "items_true.json").write_text(json.dumps(items_doc, indent=2) + "\n")
    print(f"wrote {out}/responses.csv plus truth files", file=sys.stderr)
    return EXIT_OK


def _cmd_fit(args) -> int:
    data = read_responses(args.responses)
    result = fit(data, args.c, _fit_config(args))
    write_fit(result, args.out)
    for msg in result.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    if not result.converged:
        print(
            f"warning: not converged (gradient norm {result.gradient_norm:.3e} "
            f"after {result.iterations} iterations)",
            file=sys.stderr,
        )
    if args.plots:
        _render_fit_plots(result, Path(args.plots))
    print(f"loglik {result.loglik:.6f}  bic {result.bic:.6f}", file=sys.stderr)
    return EXIT_OK


def _render_fit_plots(result, plot_dir: Path) -> None:
    from .plots import plot_item_parameters, plot_tau_distribution

    plot_dir.mkdir(parents=True, exist_ok=True)
    plot_tau_distribution(result, plot_dir / "tau_distribution.png")
    plot_item_parameters(result, plot_dir / "item_parameters.png")


def _cmd_select(args) -> int:
    data = read_responses(args.responses)
    grid = None
    if args.c_grid:
        try:
            grid = [int(tok) for tok in args.c_grid.split(",") if tok.strip()]
        except ValueError:
            print(f"error: bad --c-grid {args.c_grid!r}", file=sys.stderr)
            return EXIT_USAGE
    report = select_c(data, c_grid=grid, config=_fit_config(args), criterion=args.criterion)
    write_selection_report(report, args.out)
    chosen_fit_path = Path(args.out).with_suffix(".fit.json")
    if report.chosen.fit is not None:
        write_fit(report.chosen.fit, chosen_fit_path)
        if args.plots:
            _render_fit_plots(report.chosen.fit, Path(args.plots))
    print(
        f"chosen: {report.chosen.label} ({report.criterion_name} "
        f"{report.chosen.criterion:.4f}); fit written to {chosen_fit_path}",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_score(args) -> int:
    data = read_responses(args.responses)
    fit_result = read_fit(args.fit)
    config = FitConfig(quadrature_nodes=args.nodes)
    posteriors = score_persons(data, fit_result, config)
    write_scores(posteriors, fit_result.support, args.out)
    if args.plots:
        from .plots import plot_prob_change_histogram

        plot_dir = Path(args.plots)
        plot_dir.mkdir(parents=True, exist_ok=True)
        plot_prob_change_histogram(posteriors, plot_dir / "prob_change_histogram.png")
    print(f"scored {data.n_persons} respondents", file=sys.stderr)
    return EXIT_OK


def _cmd_study(args) -> int:
    config = ScenarioConfig(
        scenario=args.scenario,
        n_persons=args.n,
        n_items=args.j,
        c=args.c,
        alpha=args.alpha,
        beta=args.beta,
        replications=args.replications,
        seed=args.seed,
        fit_config=FitConfig(
            quadrature_nodes=args.nodes,
            gradient_tolerance=args.tol,
            max_iterations=args.max_iter,
            ridge_penalty=args.ridge,
        ),
    )
    table = run_scenario(config)
    stem = Path(args.out)
    csv_path = stem.with_suffix(".csv") if stem.suffix != ".csv" else stem
    json_path = csv_path.with_suffix(".json")
    write_metrics_csv(table, csv_path)
    write_metrics_json(table, json_path)
    if args.plots and table.per_item:
        from .plots import plot_item_recovery

        plot_dir = Path(args.plots)
        plot_dir.mkdir(parents=True, exist_ok=True)
        plot_item_recovery(table, plot_dir / "item_recovery.png")
    print(f"wrote {csv_path} and {json_path}", file=sys.stderr)
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "select": _cmd_select,
    "score": _cmd_score,
    "study": _cmd_study,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ResponseParseError, InitializationError, SelectionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
