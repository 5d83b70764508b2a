"""Command-line surface.

Subcommands: ``simulate`` runs the Monte Carlo benchmarks, ``fit`` estimates
directions from a data file, ``select-dim`` chooses the structural dimension
by bootstrap, ``predict`` applies a saved model to a test file, and
``tecator`` runs the spectra workflow end to end. Every command honors
``--seed``; reports are CSV/JSON with figures rendered next to them unless
``--no-figures`` is given.

Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure, 4 invalid run.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import dataio, figures
from .dataio import PredictionModel, RunConfig, rmse
from .errors import DataFormatError, FsdrError, InvalidRunError
from .funcbase import Grid
from .pipeline import fit_dense, fit_sparse
from .sdr import select_dimension
from .simlab import ModelSpec, run_monte_carlo
from .sparse import Bandwidths

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3
EXIT_INVALID_RUN = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems must exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit((EXIT_USAGE, f"{self.prog}: error: {message}"))


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fve-threshold", type=float, default=None,
                   help="fraction-of-variance threshold for truncation (default 0.99)")
    p.add_argument("--restarts", type=int, default=None,
                   help="random restarts per search stage (default 10)")
    p.add_argument("--max-iter", type=int, default=None,
                   help="iteration cap per restart (default 500)")
    p.add_argument("--search-dim", type=int, default=None,
                   help="leading components searched; 0 = all (default K+1)")
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes; never changes numeric results (default 1)")
    p.add_argument("--config", type=str, default=None,
                   help="JSON config file; explicit flags override its values")


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dense", type=str, default=None,
                   help="dense sample CSV (grid row, curve rows with response)")
    p.add_argument("--sparse", type=str, default=None,
                   help="long-format sparse observations CSV (id,t,u)")
    p.add_argument("--responses", type=str, default=None,
                   help="per-subject responses CSV (id,y), required with --sparse")
    p.add_argument("--h-mu", type=float, default=None,
                   help="mean smoother bandwidth (default: rule of thumb)")
    p.add_argument("--h-sigma", type=float, default=None,
                   help="covariance smoother bandwidth (default: rule of thumb)")
    p.add_argument("--grid-points", type=int, default=None,
                   help="output grid size for sparse fits (default 100)")


def build_parser() -> _Parser:
    parser = _Parser(prog="fsdr", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo benchmark")
    p_sim.add_argument("--model", type=int, default=None, help="benchmark model 1..5")
    p_sim.add_argument("--n", type=int, default=None, help="sample size per replicate")
    p_sim.add_argument("--design", choices=["dense", "sparse"], default=None)
    p_sim.add_argument("--replicates", type=int, default=None)
    p_sim.add_argument("--h-mu", type=float, default=None)
    p_sim.add_argument("--h-sigma", type=float, default=None)
    _add_solver_flags(p_sim)
    p_sim.add_argument("--out", type=str, required=True,
                       help="output prefix; writes <out>.csv, <out>.json")
    p_sim.add_argument("--no-figures", dest="figures", action="store_false")

    p_fit = sub.add_parser("fit", help="fit directions from a data file")
    _add_data_flags(p_fit)
    p_fit.add_argument("--num-directions", type=int, default=None,
                       help="number of directions K (default 1)")
    p_fit.add_argument("--k-nn", type=int, default=None,
                       help="neighbors stored for prediction (default 5)")
    _add_solver_flags(p_fit)
    p_fit.add_argument("--out", type=str, required=True, help="model JSON path")
    p_fit.add_argument("--no-figures", dest="figures", action="store_false")

    p_sel = sub.add_parser("select-dim", help="bootstrap structural dimension")
    _add_data_flags(p_sel)
    p_sel.add_argument("--n-boot", type=int, default=None,
                       help="bootstrap replicates (default 50)")
    p_sel.add_argument("--max-candidates", type=int, default=None,
                       help="largest candidate k; 0 = D-1 (default 6)")
    _add_solver_flags(p_sel)
    p_sel.add_argument("--out", type=str, required=True, help="report JSON path")
    p_sel.add_argument("--no-figures", dest="figures", action="store_false")

    p_pred = sub.add_parser("predict", help="predict responses for a test file")
    p_pred.add_argument("--model-file", type=str, required=True)
    p_pred.add_argument("--test", type=str, required=True,
                        help="dense test CSV on the training grid")
    p_pred.add_argument("--k-nn", type=int, default=None,
                        help="override the stored neighbor count")
    p_pred.add_argument("--out", type=str, required=True,
                        help="output prefix; writes <out>.csv, <out>.json")
    p_pred.add_argument("--no-figures", dest="figures", action="store_false")

    p_tec = sub.add_parser("tecator", help="spectra workflow: fit, select, predict")
    p_tec.add_argument("--input", type=str, required=True,
                       help="CSV with 100 absorbance channels plus fat percent")
    p_tec.add_argument("--train-size", type=int, default=150)
    p_tec.add_argument("--num-directions", type=int, default=None,
                       help="fix K instead of selecting it by bootstrap")
    p_tec.add_argument("--n-boot", type=int, default=None)
    p_tec.add_argument("--max-candidates", type=int, default=None)
    p_tec.add_argument("--k-nn", type=int, default=None)
    _add_solver_flags(p_tec)
    p_tec.add_argument("--out", type=str, required=True, help="output prefix")
    p_tec.add_argument("--no-figures", dest="figures", action="store_false")
    return parser


def _merge_config(args: argparse.Namespace) -> RunConfig:
    """Start from defaults, apply --config file, then explicit flags."""
    base = RunConfig.from_json(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    for f in fields(RunConfig):
        if hasattr(args, f.name) and getattr(args, f.name) is not None:
            overrides[f.name] = getattr(args, f.name)
    return replace(base, **overrides) if overrides else base


def _bandwidths(cfg: RunConfig) -> Bandwidths | None:
    if cfg.h_mu is None and cfg.h_sigma is None:
        return None
    if cfg.h_mu is None or cfg.h_sigma is None:
        raise DataFormatError("give both --h-mu and --h-sigma or neither")
    return Bandwidths(h_mu=cfg.h_mu, h_sigma=cfg.h_sigma)


def _load_fit_inputs(args, cfg: RunConfig):
    """Returns (kind, fitted FitResult factory input) for fit/select commands."""
    if (args.dense is None) == (args.sparse is None):
        raise DataFormatError("give exactly one of --dense or --sparse")
    if args.dense is not None:
        return "dense", dataio.read_dense_csv(args.dense)
    if args.responses is None:
        raise DataFormatError("--sparse requires --responses")
    return "sparse", dataio.read_sparse_csv(args.sparse, args.responses)


def _fit_any(kind, data, cfg: RunConfig, num_directions: int):
    if kind == "dense":
        return fit_dense(
            data, num_directions, seed=cfg.seed, config=cfg.solver(),
            fve_threshold=cfg.fve_threshold,
        )
    return fit_sparse(
        data, Grid.uniform(cfg.grid_points), num_directions, seed=cfg.seed,
        config=cfg.solver(), fve_threshold=cfg.fve_threshold,
        bandwidths=_bandwidths(cfg),
    )


def _cmd_simulate(args) -> int:
    cfg = _merge_config(args)
    if cfg.model is None or cfg.n is None:
        raise DataFormatError("simulate needs --model and --n")
    report = run_monte_carlo(
        ModelSpec(cfg.model),
        n=cfg.n,
        design=cfg.design,
        replicates=cfg.replicates or 100,
        seed=cfg.seed,
        config=cfg.solver(),
        fve_threshold=cfg.fve_threshold,
        bandwidths=_bandwidths(cfg),
        n_jobs=cfg.threads,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataio.write_simulation_csv(report, out.with_suffix(".csv"))
    dataio.write_simulation_summary(report, out.with_suffix(".json"))
    if args.figures:
        figures.simulation_figure(report, out.parent / (out.name + "_errors.png"))
    print(
        f"model {report.model_id} n={report.n} {report.design}: "
        f"mean error {report.mean:.4f} (sd {report.sd:.4f}) over "
        f"{len(report.errors)} replicates"
    )
    if not report.valid:
        print(
            f"invalid run: {len(report.failures)} of {report.replicates} "
            f"replicates failed",
            file=sys.stderr,
        )
        return EXIT_INVALID_RUN
    return EXIT_OK


def _cmd_fit(args) -> int:
    cfg = _merge_config(args)
    kind, data = _load_fit_inputs(args, cfg)
    k = cfg.num_directions or 1
    fit = _fit_any(kind, data, cfg, k)
    model = PredictionModel.from_fit(
        fit, k_nn=min(cfg.k_nn, len(data.responses)), seed=cfg.seed,
        responses=data.responses,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataio.save_model(model, out)
    if args.figures:
        figures.directions_figure(
            fit.basis, out.parent / (out.stem + "_directions.png")
        )
    d = fit.eigensystem.num_components
    print(
        f"fitted {k} direction(s) from {kind} data: {d} components retained, "
        f"objective {fit.basis.coefficients.objective_values[-1]:.6f}"
    )
    return EXIT_OK


def _cmd_select_dim(args) -> int:
    cfg = _merge_config(args)
    kind, data = _load_fit_inputs(args, cfg)
    fit = _fit_any(kind, data, cfg, 1)
    selection = select_dimension(
        fit.scores,
        data.responses,
        n_boot=cfg.n_boot,
        seed=cfg.seed,
        config=cfg.solver(),
        max_candidates=cfg.max_candidates,
        n_jobs=cfg.threads,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataio.write_selection_report(
        selection, out, config={"fve_threshold": cfg.fve_threshold, "seed": cfg.seed}
    )
    if args.figures:
        figures.selection_figure(
            selection, out.parent / (out.stem + "_variability.png")
        )
    print(
        f"chosen k = {selection.chosen_k} "
        f"(variability {np.array2string(selection.variability, precision=4)})"
    )
    return EXIT_OK


def _cmd_predict(args) -> int:
    model = dataio.load_model(args.model_file)
    if args.k_nn is not None:
        model = PredictionModel(
            basis=model.basis,
            train_projections=model.train_projections,
            train_responses=model.train_responses,
            k_nn=args.k_nn,
            score_source=model.score_source,
            seed=model.seed,
            extra=model.extra,
        )
    test = dataio.read_dense_csv(args.test)
    predictions = model.predict_dense(test)
    error = rmse(test.responses, predictions)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    import csv as _csv

    with out.with_suffix(".csv").open("w", newline="") as fh:
        wr = _csv.writer(fh)
        wr.writerow(["row", "observed", "predicted"])
        for i, (y, yh) in enumerate(zip(test.responses, predictions)):
            wr.writerow([i, repr(float(y)), repr(float(yh))])
    import json as _json

    out.with_suffix(".json").write_text(
        _json.dumps(
            {"rmse": error, "n_test": int(test.n), "k_nn": model.k_nn}, indent=2
        )
        + "\n"
    )
    if args.figures:
        figures.prediction_figure(
            test.responses, predictions, out.parent / (out.name + "_pred_vs_obs.png")
        )
    print(f"predicted {test.n} rows: RMSE = {error:.4f}")
    return EXIT_OK


def _cmd_tecator(args) -> int:
    cfg = _merge_config(args)
    sample = dataio.load_tecator(args.input)
    if not 2 <= args.train_size < sample.n:
        raise DataFormatError(
            f"train size {args.train_size} incompatible with {sample.n} records"
        )
    from .fpca import DenseFunctionalSample

    train = DenseFunctionalSample(
        sample.grid,
        sample.curves[: args.train_size],
        sample.responses[: args.train_size],
    )
    test = DenseFunctionalSample(
        sample.grid,
        sample.curves[args.train_size:],
        sample.responses[args.train_size:],
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    chosen_k = cfg.num_directions
    selection = None
    if chosen_k is None:
        probe = fit_dense(train, 1, seed=cfg.seed, config=cfg.solver(),
                          fve_threshold=cfg.fve_threshold)
        selection = select_dimension(
            probe.scores, train.responses, n_boot=cfg.n_boot, seed=cfg.seed,
            config=cfg.solver(), max_candidates=cfg.max_candidates,
            n_jobs=cfg.threads,
        )
        chosen_k = selection.chosen_k
        dataio.write_selection_report(
            selection, out.parent / (out.name + "_selection.json")
        )
        if args.figures:
            figures.selection_figure(
                selection, out.parent / (out.name + "_variability.png")
            )
    fit = fit_dense(train, chosen_k, seed=cfg.seed, config=cfg.solver(),
                    fve_threshold=cfg.fve_threshold)
    model = PredictionModel.from_fit(
        fit, k_nn=min(cfg.k_nn, train.n), seed=cfg.seed, responses=train.responses
    )
    dataio.save_model(model, out.parent / (out.name + "_model.json"))
    predictions = model.predict_dense(test)
    error = rmse(test.responses, predictions)
    import json as _json

    summary = {
        "n_train": int(train.n),
        "n_test": int(test.n),
        "chosen_k": int(chosen_k),
        "selected_by_bootstrap": selection is not None,
        "rmse": error,
        "k_nn": model.k_nn,
        "retained_components": int(fit.eigensystem.num_components),
    }
    (out.parent / (out.name + "_summary.json")).write_text(
        _json.dumps(summary, indent=2) + "\n"
    )
    if args.figures:
        figures.directions_figure(
            fit.basis, out.parent / (out.name + "_directions.png")
        )
        figures.prediction_figure(
            test.responses, predictions, out.parent / (out.name + "_pred_vs_obs.png")
        )
    print(f"K = {chosen_k}, test RMSE = {error:.4f}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "select-dim": _cmd_select_dim,
    "predict": _cmd_predict,
    "tecator": _cmd_tecator,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # raised by _Parser.error with (code, message)
        if isinstance(exc.code, tuple):
            code, message = exc.code
            print(message, file=sys.stderr)
            return code
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvalidRunError as exc:
        print(f"invalid run: {exc}", file=sys.stderr)
        return EXIT_INVALID_RUN
    except FsdrError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
