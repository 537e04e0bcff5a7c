"""Batch command line front end.

Subcommands: weights | simulate | sweep | train | verify. Every run takes
a JSON config (schema-validated, unknown keys rejected), an optional seed
override, an output directory, a thread count, and a format choice. Runs
are reproducible: the same config and seed give byte-identical report and
CSV files at any thread count. Wall-clock timing goes to stderr only.

Exit codes: 0 success, 2 config error (message names the field), 3
numerical failure, 4 verification verdict failure.
"""

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from .config import COMMANDS, load_config, validate_config
from .errors import (
    ConfigError,
    ConvergenceError,
    ParameterError,
    RegimeError,
    ScaleError,
    SupportError,
    UnsupportedFamilyError,
)
from .families import get_family
from .harness import (
    DEFAULT_WEIGHT_TRIALS,
    PlanView,
    build_ensemble,
    sweep_quantity,
    sweep_weight,
    verify_claim,
)
from .kl import mc_expected_kl
from .planner import build_qp_matrix, optimal_plan, plan_from_parameters
from .reporting import Report, write_csv, write_json
from .rng import derive_rng
from .trainer import TrainConfig, pretrain_params, train_multi_source, train_multi_task

_CONFIG_EXIT = (ConfigError, ParameterError, UnsupportedFamilyError, ValueError)
_NUMERIC_EXIT = (ConvergenceError, RegimeError, ScaleError, SupportError,
                 FloatingPointError, np.linalg.LinAlgError)

# data-generation stream roles for the train command
_TARGET_ROLE = 0
_HOLDOUT_ROLE = 9
_TASK_HOLDOUT_BASE = 9000


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="transferopt",
        description="plan source weights and quantities, simulate, sweep, "
                    "train, and verify",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "weights": "compute the optimal transfer plan for a config",
        "simulate": "Monte Carlo estimate of a plan, or a named check",
        "sweep": "measured and predicted curves along one axis",
        "train": "run the dynamic reweighting training loops",
        "verify": "run a named oracle check and report the verdict",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, help="path to a JSON config")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed, overrides the config")
        p.add_argument("--out", default=None,
                       help="output directory (default: $TRANSFEROPT_OUT or .)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: hardware parallelism); "
                            "results do not depend on this")
        p.add_argument("--format", choices=["json", "csv", "both"],
                       default="both")
        if name == "sweep":
            p.add_argument("--gnuplot", action="store_true",
                           help="also emit a gnuplot script for the curves")
    return parser


def _ensemble_from(config, seed):
    family = get_family(config["family"]["name"],
                        config["family"].get("params", {}))
    return family, build_ensemble(family, config, seed)


def _plan_csv(plan_dict):
    rows = [
        {
            "source": i + 1,
            "alpha": plan_dict["alpha"][i],
            "weight": plan_dict["weights"][i],
            "quantity": plan_dict["quantities"][i],
        }
        for i in range(len(plan_dict["weights"]))
    ]
    return ("plan.csv", ["source", "alpha", "weight", "quantity"], rows)


def _cmd_weights(config, seed, threads):
    if "directions" in config:
        directions = np.asarray(config["directions"], dtype=float)
        fisher = np.asarray(config["fisher_matrix"], dtype=float)
        budgets = np.asarray(config["budgets"], dtype=float)
        if directions.ndim != 2:
            raise ConfigError("directions must be vectors of equal length",
                              field="/directions")
        d = directions.shape[1]
        if fisher.shape != (d, d):
            raise ConfigError(f"fisher_matrix must be {d}x{d}",
                              field="/fisher_matrix")
        if len(budgets) != len(directions):
            raise ConfigError("need one budget per direction",
                              field="/budgets")
        gram = directions @ fisher @ directions.T
        qp = build_qp_matrix(None, gram, budgets, d)
        plan = optimal_plan(qp, n_target=int(config["n_target"]))
        results = {"mode": "explicit", "plan": plan.to_json_dict()}
    else:
        family, ens = _ensemble_from(config, seed)
        plan = plan_from_parameters(family, ens.target_params,
                                    ens.source_params, ens.source_budgets,
                                    ens.target_budget)
        results = {
            "mode": "ensemble",
            "ensemble": ens.to_json_dict(),
            "plan": plan.to_json_dict(),
        }
    lines = [f"weights: {results['plan']['weights']}",
             f"predicted divergence: {results['plan']['predicted_kl']['total']}"]
    return results, [_plan_csv(results["plan"])], False, lines


def _check_results(check, nested, seed, threads):
    report = verify_claim(check, nested, seed, threads=threads)
    rows = [{
        "check": check,
        "verdict": report["verdict"],
        "n_target": report["n_target"],
    }]
    csvs = [("verdict.csv", ["check", "verdict", "n_target"], rows)]
    fail = report["verdict"] != "pass"
    return report, csvs, fail, [f"check {check}: {report['verdict']}"]


def _cmd_simulate(config, seed, threads):
    if "check" in config:
        return _check_results(config["check"], config["config"], seed, threads)
    family, ens = _ensemble_from(config, seed)
    spec = config.get("weights", "optimal")
    if spec == "optimal":
        plan = plan_from_parameters(family, ens.target_params,
                                    ens.source_params, ens.source_budgets,
                                    ens.target_budget)
        weights = plan.weights
        plan_dict = plan.to_json_dict()
    else:
        weights = np.asarray(spec, dtype=float)
        if weights.shape != (ens.k,):
            raise ConfigError("need one weight per source", field="/weights")
        plan = PlanView(weights, ens.source_budgets)
        plan_dict = None
    est = mc_expected_kl(family, ens, plan, int(config["trials"]), seed,
                         threads=threads)
    results = {
        "ensemble": ens.to_json_dict(),
        "weights": [float(w) for w in weights],
        "quantities": [int(n) for n in ens.source_budgets],
        "estimate": {
            "mean": est.mean,
            "std_error": est.std_error,
            "trials": est.trials,
        },
    }
    if plan_dict is not None:
        results["plan"] = plan_dict
    rows = [{"mean": est.mean, "std_error": est.std_error,
             "trials": est.trials}]
    csvs = [("estimate.csv", ["mean", "std_error", "trials"], rows)]
    lines = [f"expected divergence: {est.mean} (se {est.std_error}, "
             f"{est.trials} trials)"]
    return results, csvs, False, lines


def _cmd_sweep(config, seed, threads):
    family, ens = _ensemble_from(config, seed)
    axis = config["axis"]
    idx = int(config.get("source_index", 0))
    trials = int(config.get("trials", DEFAULT_WEIGHT_TRIALS))
    pinned = config.get("pinned_weights")
    if axis == "weight":
        result = sweep_weight(ens, idx, config["grid"], trials, seed,
                              threads=threads, pinned_weights=pinned)
    else:
        result = sweep_quantity(ens, idx, config["grid"],
                                config.get("rule", "optimal"), trials, seed,
                                threads=threads, pinned_weights=pinned)
    results = {"ensemble": ens.to_json_dict(), "sweep": result.to_json_dict()}
    name = f"sweep_{axis}.csv"
    csvs = [(name, ["axis_value", "mc_mean", "mc_stderr", "predicted"],
             result.rows())]
    lines = [
        f"{axis} sweep over {len(result.grid)} points",
        f"measured argmin at {axis}={result.grid[result.mc_argmin]}, "
        f"predicted argmin at {axis}={result.grid[result.predicted_argmin]}",
    ]
    return results, csvs, False, lines


_GNUPLOT_TEMPLATE = """set datafile separator ","
set key autotitle columnhead
set xlabel "{axis}"
set ylabel "expected divergence"
plot "{csv}" using 1:2:3 with yerrorlines title "measured", \\
     "{csv}" using 1:4 with lines title "predicted"
"""


def _trace_csv(name, trace):
    rows = trace.rows()
    return (name, list(rows[0].keys()), rows)


def _cmd_train(config, seed, threads):
    family = get_family(config["family"]["name"],
                        config["family"].get("params", {}))
    train_block = dict(config["train"])
    cfg = TrainConfig(seed=seed, **train_block)
    holdout_n = int(config.get("holdout_n", 0))
    if config["mode"] == "multi_source":
        tgt = config["target"]
        tp = family.validate(np.asarray(tgt["params"], dtype=float))
        target_data = family.sample(tp, int(tgt["n"]),
                                    derive_rng(seed, _TARGET_ROLE))
        source_data = []
        pretrained = []
        for k, src in enumerate(config["sources"]):
            sp = family.validate(np.asarray(src["params"], dtype=float))
            data = family.sample(sp, int(src["n"]), derive_rng(seed, k + 1))
            source_data.append(data)
            pretrained.append(pretrain_params(
                family, data, ridge=float(config.get("pretrain_ridge", 0.0))))
        holdout = None
        if holdout_n:
            holdout = family.sample(tp, holdout_n,
                                    derive_rng(seed, _HOLDOUT_ROLE))
        trace = train_multi_source(family, target_data, source_data,
                                   pretrained, cfg, holdout_data=holdout)
        results = {"mode": "multi_source", "trace": trace.to_json_dict()}
        csvs = [_trace_csv("trace.csv", trace)]
        lines = [f"stopped after {results['trace']['epochs_run']} epochs "
                 f"({results['trace']['stop_reason']})",
                 f"final weights: {results['trace']['final_weights']}"]
    else:
        datasets, holdouts = [], []
        for k, task in enumerate(config["tasks"]):
            tp = family.validate(np.asarray(task["params"], dtype=float))
            datasets.append(family.sample(tp, int(task["n"]),
                                          derive_rng(seed, k)))
            holdouts.append(
                family.sample(tp, holdout_n,
                              derive_rng(seed, _TASK_HOLDOUT_BASE + k))
                if holdout_n else None)
        traces = train_multi_task(family, datasets, cfg, holdouts=holdouts)
        results = {
            "mode": "multi_task",
            "traces": [t.to_json_dict() for t in traces],
        }
        csvs = [_trace_csv(f"trace_task{k + 1}.csv", t)
                for k, t in enumerate(traces)]
        lines = [f"task {k + 1}: final loss "
                 f"{results['traces'][k]['final_loss']}"
                 for k in range(len(traces))]
    return results, csvs, False, lines


def _cmd_verify(config, seed, threads):
    return _check_results(config["check"], config["config"], seed, threads)


_HANDLERS = {
    "weights": _cmd_weights,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "train": _cmd_train,
    "verify": _cmd_verify,
}


def _run(args):
    config = load_config(args.config)
    validate_config(args.command, config)
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        seed = args.seed
    else:
        seed = int(config.get("seed", 0))
    threads = args.threads if args.threads else (os.cpu_count() or 1)
    if threads < 1:
        raise ConfigError("threads must be positive")
    out_dir = Path(args.out or os.environ.get("TRANSFEROPT_OUT") or ".")
    out_dir.mkdir(parents=True, exist_ok=True)

    results, csvs, fail, lines = _HANDLERS[args.command](config, seed, threads)

    written = []
    if args.format in ("json", "both"):
        report = Report(command=args.command, config=config, seed=seed,
                        results=results)
        written.append(write_json(out_dir / "report.json",
                                  report.to_payload()))
    if args.format in ("csv", "both"):
        for name, fieldnames, rows in csvs:
            written.append(write_csv(out_dir / name, fieldnames, rows))
        if args.command == "sweep" and getattr(args, "gnuplot", False):
            axis = config["axis"]
            script = _GNUPLOT_TEMPLATE.format(axis=axis,
                                              csv=f"sweep_{axis}.csv")
            gp = out_dir / f"sweep_{axis}.gp"
            gp.write_text(script, encoding="utf-8")
            written.append(gp)

    for line in lines:
        print(line)
    for path in written:
        print(f"wrote {path}")
    return 4 if fail else 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        return _run(args)
    except _CONFIG_EXIT as err:
        field = getattr(err, "field", None)
        where = f" at {field}" if field else ""
        print(f"config error{where}: {err}", file=sys.stderr)
        return 2
    except _NUMERIC_EXIT as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    finally:
        elapsed = time.perf_counter() - start
        print(f"elapsed: {elapsed:.3f}s", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
