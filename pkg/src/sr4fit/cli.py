"""Command-line interface: ``sr4fit {train,predict,trials,grid,rules}``.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .classifier import SR4FitClassifier
from .dataset import SplitSpec, load_csv, read_feature_matrix, train_test_split
from .experiment import (ConfigError, ExperimentConfig, grid_search, read_trials_csv, run_trials,
                         summarize, trial_rules_json, trials_csv)

class UsageError(Exception):
    pass


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config; flags override its values")
    common.add_argument("--data", help="input CSV (comma separated, header row)")
    common.add_argument("--target", help="name of the class column")
    common.add_argument("--model", help="model JSON path")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="base seed")
    common.add_argument("--trials", type=int, help="number of trials")
    common.add_argument("--lambda", dest="lam", type=float, help="sparsity weight")
    common.add_argument("--kappa", type=float, help="coupling weight")
    common.add_argument("--rmax", type=int, help="maximum rules per class")
    common.add_argument("--test-fraction", type=float, help="test share of each split")
    common.add_argument("--compare", help="trials.csv of another run for paired t-tests")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sr4fit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="fit on a CSV and write model + rules.txt")
    sub.add_parser("predict", parents=[common], help="predict classes for a CSV")
    sub.add_parser("trials", parents=[common], help="repeated split/fit/evaluate runs")
    sub.add_parser("grid", parents=[common], help="grid search over r_max, lambda, kappa")
    sub.add_parser("rules", parents=[common], help="print the rule report of a model")
    return parser


def load_config(args):
    config = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    overrides = {"data": args.data, "target": args.target, "out": args.out, "base_seed": args.seed,
                 "n_trials": args.trials, "lam": args.lam, "kappa": args.kappa, "r_max": args.rmax,
                 "test_fraction": args.test_fraction, "compare_to": args.compare}
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    if args.trials is not None and config.seeds is not None and len(config.seeds) != args.trials:
        config.seeds = None
    config.validate()
    return config


def _require(config, *names):
    missing = [n for n in names if getattr(config, n) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n for n in missing))


def _write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def cmd_train(args, config):
    _require(config, "data", "target")
    data = load_csv(config.data, config.target)
    clf = config.estimator(config.base_seed).fit(data.features, data.labels,
                                                 feature_names=data.feature_names,
                                                 class_names=data.class_names)
    out = Path(config.out)
    model_path = Path(args.model) if args.model else out / "model.json"
    payload = clf.to_dict()
    payload["target"] = config.target
    _write(model_path, json.dumps(payload, indent=1) + "\n")
    _write(out / "rules.txt", clf.rule_report())
    for cm in clf.class_models_:
        d = cm.diagnostics
        print(f"class {clf.class_names_[cm.class_id]}: nnz={d.nnz} rules={len(cm.rules)} "
              f"converged={d.converged} outer_iterations={d.outer_iterations} "
              f"objective={d.final_objective:.6g}")
    print(f"model written to {model_path}")
    return 0


def cmd_predict(args, config):
    if not args.model:
        raise UsageError("predict needs --model")
    _require(config, "data")
    payload = json.loads(Path(args.model).read_text(encoding="utf-8"))
    clf = SR4FitClassifier.from_dict(payload)
    target = config.target or payload.get("target")
    X = read_feature_matrix(config.data, clf.feature_names_, drop=[target] if target else [])
    P = clf.predict_proba(X)
    best = np.argmax(P, axis=1)
    rows = [["row", "predicted"] + [f"p_{n}" for n in clf.class_names_]]
    for i in range(X.shape[0]):
        rows.append([i, clf.class_names_[best[i]]] + [repr(float(p)) for p in P[i]])
    path = Path(config.out) / "predictions.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    print(f"{X.shape[0]} predictions written to {path}")
    return 0


def cmd_trials(args, config):
    _require(config, "data", "target")
    data = load_csv(config.data, config.target)
    reports = run_trials(data, config)
    baseline = read_trials_csv(config.compare_to) if config.compare_to else None
    max_depth = config.forest.get("max_depth", SR4FitClassifier().max_depth)
    summary = summarize(reports, config.r_max, max_depth, data.n_classes, baseline)
    out = Path(config.out)
    _write(out / "trials.csv", trials_csv(reports))
    _write(out / "summary.json", _dump_json(summary))
    _write(out / "trial_rules.json", _dump_json(trial_rules_json(reports)))
    for r in reports:
        print(f"trial {r.trial_index} seed {r.seed}: accuracy={r.accuracy:.4f} f1={r.f1:.4f} "
              f"rules={r.n_rules} fit={r.fit_seconds:.2f}s", file=sys.stderr)
    acc = summary["accuracy"]
    print(f"accuracy {acc['mean']:.4f} +/- {acc['std']:.4f} over {len(reports)} trials; "
          f"stability {summary['stability']}; results in {out}")
    return 0


def cmd_grid(args, config):
    _require(config, "data", "target")
    data = load_csv(config.data, config.target)
    train, _ = train_test_split(data, SplitSpec(config.test_fraction, config.base_seed))
    result = grid_search(train, config)
    _write(Path(config.out) / "grid.json", _dump_json(result.to_dict()))
    c = result.chosen
    print(f"chosen r_max={c['r_max']} lambda={c['lambda']} kappa={c['kappa']} "
          f"(mean validation accuracy {c['mean_accuracy']:.4f})")
    return 0


def cmd_rules(args, config):
    if not args.model:
        raise UsageError("rules needs --model")
    print(SR4FitClassifier.load(args.model).rule_report(), end="")
    return 0


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "trials": cmd_trials, "grid": cmd_grid,
            "rules": cmd_rules}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args)
        return COMMANDS[args.command](args, config)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"sr4fit {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"sr4fit {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
