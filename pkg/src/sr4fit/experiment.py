"""Multi-trial evaluation and hyperparameter grid search."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import dataclass, field, fields
from itertools import product
from pathlib import Path

import numpy as np
from sklearn.base import clone

from .classifier import SR4FitClassifier
from .dataset import SplitSpec, train_test_split
from .metrics import (TrialReport, classification_metrics, confusion_counts,
                      interpretability_score, paired_t_test, stability)
from .rules import STABILITY_PRECISION

log = logging.getLogger(__name__)

METRICS = ("accuracy", "precision", "recall", "f1")
TRIAL_COLUMNS = ("trial_index", "seed") + METRICS + ("n_rules", "avg_rule_len")

FOREST_KEYS = {"n_trees", "max_depth", "min_leaf", "max_features", "bootstrap"}
OPTIMIZER_KEYS = {"max_outer_iters", "outer_tol", "max_inner_iters", "inner_tol", "armijo_c",
                  "backtrack_factor", "initial_step", "inner_solver"}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _default_grid():
    return {"r_max": [50, 100, 200], "lambda": [0.01, 0.1, 1.0], "kappa": [0.1, 1.0, 10.0]}


@dataclass
class ExperimentConfig:
    data: str | None = None
    target: str | None = None
    test_fraction: float = 0.25
    n_trials: int = 30
    base_seed: int = 0
    seeds: list | None = None
    r_max: int = 100
    lam: float = 0.1
    kappa: float = 1.0
    grid: dict = field(default_factory=_default_grid)
    validation_trials: int = 5
    forest: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    out: str = "."
    compare_to: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n_trials < 1:
            raise ConfigError("n_trials must be at least 1")
        if self.validation_trials < 1:
            raise ConfigError("validation_trials must be at least 1")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if set(self.grid) != {"r_max", "lambda", "kappa"} or not all(self.grid.values()):
            raise ConfigError("grid needs nonempty 'r_max', 'lambda' and 'kappa' lists")
        if self.seeds is not None and len(self.seeds) != self.n_trials:
            raise ConfigError(f"{len(self.seeds)} seeds given for {self.n_trials} trials")
        unknown = set(self.forest) - FOREST_KEYS
        unknown |= set(self.optimizer) - OPTIMIZER_KEYS
        if unknown:
            raise ConfigError(f"unknown forest/optimizer settings: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, payload):
        payload = dict(payload)
        if "lambda" in payload:
            payload["lam"] = payload.pop("lambda")
        names = {f.name for f in fields(cls)}
        unknown = set(payload) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)

    @classmethod
    def from_json(cls, path):
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(payload, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(payload)

    def trial_seeds(self):
        if self.seeds is not None:
            return [int(s) for s in self.seeds]
        return [self.base_seed + i for i in range(self.n_trials)]

    def estimator(self, seed, **overrides):
        params = dict(r_max=self.r_max, lam=self.lam, kappa=self.kappa, random_state=int(seed))
        params.update(self.forest)
        params.update(self.optimizer)
        params.update(overrides)
        return SR4FitClassifier(**params)


def _rule_lengths(clf):
    out = []
    for cm in clf.class_models_:
        d = cm.standardizer.n_features_in_
        out.extend(len(cm.rules[j - d]) for j in cm.model.support if j >= d)
    return out


def evaluate(clf, data):
    """Accuracy, macro precision, macro recall and macro F1 of ``clf`` on ``data``."""
    counts = confusion_counts(data.labels, clf.predict(data.features), data.n_classes)
    return classification_metrics(counts)


def run_trial(data, config, trial_index, seed):
    """Fresh split, fit and test evaluation for one seed."""
    train, test = train_test_split(data, SplitSpec(config.test_fraction, seed))
    start = time.perf_counter()
    clf = config.estimator(seed).fit(train.features, train.labels,
                                     feature_names=data.feature_names,
                                     class_names=[data.class_names[c] for c in np.unique(train.labels)])
    elapsed = time.perf_counter() - start
    acc, prec, rec, f1 = evaluate(clf, test)
    lengths = _rule_lengths(clf)
    return TrialReport(trial_index, seed, acc, prec, rec, f1,
                       selected_rules=clf.selected_rules(precision=STABILITY_PRECISION),
                       avg_rule_len=float(np.mean(lengths)) if lengths else 0.0,
                       fit_seconds=elapsed)


def run_trials(data, config):
    reports = []
    for i, seed in enumerate(config.trial_seeds()):
        try:
            reports.append(run_trial(data, config, i, seed))
        except Exception as exc:
            raise RuntimeError(f"trial {i} (seed {seed}) failed: {exc}") from exc
        log.info("trial %d seed %d accuracy %.4f (%.1fs)", i, seed, reports[-1].accuracy,
                 reports[-1].fit_seconds)
    return reports


def _mean_std(values):
    values = np.asarray(values, dtype=float)
    return {"mean": float(values.mean()), "std": float(values.std())}


def summarize(reports, r_max, max_depth, n_classes, baseline=None):
    """Aggregate trial reports into the summary document.

    ``baseline`` is an optional list of per-trial metric dicts from another
    run on the same seeds; paired t-tests are taken on this run minus it.
    """
    summary = {"n_trials": len(reports)}
    for m in METRICS:
        summary[m] = _mean_std([getattr(r, m) for r in reports])
    summary["n_rules"] = _mean_std([r.n_rules for r in reports])
    summary["avg_rule_len"] = _mean_std([r.avg_rule_len for r in reports])
    if len(reports) >= 2:
        stab = stability(reports)
        summary["stability"] = stab
        per_class_rules = float(np.mean([r.n_rules for r in reports])) / n_classes
        rule_len = float(np.mean([max(r.avg_rule_len, 1.0) for r in reports]))
        summary["ips"] = interpretability_score(summary["accuracy"]["mean"], stab, per_class_rules,
                                                rule_len, r_max, max_depth)
    else:
        log.warning("stability and IPS need at least two trials; stability reported as null")
        summary["stability"] = None
    summary["t_test"] = None
    if baseline is not None:
        if len(baseline) != len(reports):
            raise ValueError(f"baseline has {len(baseline)} trials, this run has {len(reports)}")
        summary["t_test"] = {
            m: paired_t_test([getattr(r, m) for r in reports], [float(b[m]) for b in baseline]).to_dict()
            for m in METRICS}
    return summary


def trials_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_COLUMNS)
    for r in reports:
        w.writerow([r.trial_index, r.seed] + [repr(float(getattr(r, m))) for m in METRICS]
                   + [r.n_rules, repr(float(r.avg_rule_len))])
    return buf.getvalue()


def read_trials_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def trial_rules_json(reports):
    return {str(r.trial_index): [sorted(s) for s in r.selected_rules] for r in reports}


@dataclass
class GridResult:
    points: list
    chosen: dict
    seeds: list

    def to_dict(self):
        return {"validation_trials": len(self.seeds), "seeds": self.seeds,
                "points": self.points, "chosen": self.chosen}


def _grid_key(point):
    return (-point["mean_accuracy"], point["r_max"], -point["lambda"], point["kappa"])


def grid_search(train_data, config):
    """Pick (r_max, lambda, kappa) by mean validation accuracy.

    Every validation split is carved out of ``train_data`` only. Forests do
    not depend on the grid values, so each split trains them once and all
    grid points reuse them. Ties prefer smaller r_max, then larger lambda,
    then smaller kappa.
    """
    grid = config.grid
    combos = list(product(grid["r_max"], grid["lambda"], grid["kappa"]))
    seeds = [config.base_seed + i for i in range(config.validation_trials)]
    accs = {c: [] for c in combos}
    for seed in seeds:
        tr, va = train_test_split(train_data, SplitSpec(config.test_fraction, seed))
        base = config.estimator(seed)
        forests = base.train_forests(tr.features, tr.labels)
        for r_max, lam, kappa in combos:
            clf = clone(base).set_params(r_max=r_max, lam=lam, kappa=kappa)
            clf.fit(tr.features, tr.labels, forests=forests)
            accs[(r_max, lam, kappa)].append(evaluate(clf, va)[0])
    points = [{"r_max": int(r), "lambda": float(lam), "kappa": float(k),
               "mean_accuracy": float(np.mean(accs[(r, lam, k)])),
               "accuracies": [float(a) for a in accs[(r, lam, k)]]}
              for r, lam, k in combos]
    chosen = min(points, key=_grid_key)
    return GridResult(points, chosen, seeds)
