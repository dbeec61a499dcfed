import json

import numpy as np
import pytest

import sr4fit.experiment as experiment
from sr4fit.classifier import SR4FitClassifier
from sr4fit.dataset import Dataset, SplitSpec, load_csv, train_test_split
from sr4fit.experiment import (ConfigError, ExperimentConfig, grid_search, read_trials_csv,
                               run_trials, summarize, trial_rules_json, trials_csv)

FAST = {"forest": {"n_trees": 5}, "optimizer": {"max_outer_iters": 60}}


@pytest.fixture
def toy(toy_csv):
    return load_csv(toy_csv, "label")


def config(**kw):
    return ExperimentConfig(**{**FAST, **kw})


class TestConfig:
    def test_from_dict_lambda_alias(self):
        c = ExperimentConfig.from_dict({"lambda": 0.5, "n_trials": 2})
        assert c.lam == 0.5 and c.estimator(3).get_params()["random_state"] == 3

    @pytest.mark.parametrize("payload", [
        {"n_trials": 0}, {"test_fraction": 1.0}, {"bogus": 1},
        {"grid": {"r_max": [], "lambda": [1], "kappa": [1]}},
        {"grid": {"r_max": [1], "lambda": [1]}},
        {"forest": {"depth": 3}}, {"seeds": [1, 2], "n_trials": 3},
    ])
    def test_invalid(self, payload):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(payload)

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(p)

    def test_seeds(self):
        assert ExperimentConfig(n_trials=3, base_seed=10).trial_seeds() == [10, 11, 12]
        assert ExperimentConfig(n_trials=2, seeds=[5, 5]).trial_seeds() == [5, 5]

    def test_overrides_reach_estimator(self):
        est = config(r_max=7).estimator(1)
        assert (est.r_max, est.n_trees, est.max_outer_iters) == (7, 5, 60)


class TestTrials:
    def test_identical_seeds_are_stable(self, toy):
        reports = run_trials(toy, config(n_trials=2, seeds=[4, 4]))
        s = summarize(reports, 100, 4, toy.n_classes)
        assert s["stability"] == 1.0
        assert reports[0].accuracy == reports[1].accuracy

    def test_summary_recomputable_from_csv(self, toy, tmp_path):
        reports = run_trials(toy, config(n_trials=3))
        s = summarize(reports, 100, 4, toy.n_classes)
        p = tmp_path / "trials.csv"
        p.write_text(trials_csv(reports))
        rows = read_trials_csv(p)
        for m in ("accuracy", "precision", "recall", "f1", "n_rules", "avg_rule_len"):
            col = np.array([float(r[m]) for r in rows])
            assert abs(col.mean() - s[m]["mean"]) <= 1e-12
            assert abs(col.std() - s[m]["std"]) <= 1e-12

    def test_single_trial(self, toy, caplog):
        reports = run_trials(toy, config(n_trials=1))
        s = summarize(reports, 100, 4, toy.n_classes)
        assert s["stability"] is None and "ips" not in s
        assert "at least two trials" in caplog.text

    def test_baseline_t_test(self, toy):
        reports = run_trials(toy, config(n_trials=3))
        base = [{"accuracy": r.accuracy - 0.01 * (i + 1), "precision": r.precision,
                 "recall": r.recall, "f1": r.f1} for i, r in enumerate(reports)]
        s = summarize(reports, 100, 4, toy.n_classes, baseline=base)
        assert s["t_test"]["accuracy"]["t"] > 0
        assert s["t_test"]["precision"]["p_value"] == 1.0
        with pytest.raises(ValueError):
            summarize(reports, 100, 4, toy.n_classes, baseline=base[:2])

    def test_trial_error_names_index(self, toy, monkeypatch):
        def boom(*a, **k):
            raise ValueError("bad")
        monkeypatch.setattr(experiment, "run_trial", boom)
        with pytest.raises(RuntimeError, match=r"trial 0 \(seed 0\) failed: bad"):
            run_trials(toy, config(n_trials=2))

    def test_rules_json_sorted(self, toy):
        reports = run_trials(toy, config(n_trials=2))
        doc = trial_rules_json(reports)
        assert list(doc) == ["0", "1"]
        assert all(rules == sorted(rules) for trial in doc.values() for rules in trial)
        json.dumps(doc)


class TestGrid:
    def test_single_point(self, toy):
        g = grid_search(toy, config(grid={"r_max": [20], "lambda": [0.1], "kappa": [1.0]},
                                    validation_trials=2))
        assert (g.chosen["r_max"], g.chosen["lambda"], g.chosen["kappa"]) == (20, 0.1, 1.0)
        assert len(g.chosen["accuracies"]) == 2

    def test_intercept_only_point_loses(self, toy):
        g = grid_search(toy, config(grid={"r_max": [20], "lambda": [0.01, 1e6], "kappa": [1.0]},
                                    validation_trials=2))
        assert g.chosen["lambda"] == 0.01
        worst = [p for p in g.points if p["lambda"] == 1e6][0]
        assert worst["mean_accuracy"] < g.chosen["mean_accuracy"]

    def test_tie_break(self, toy, monkeypatch):
        monkeypatch.setattr(experiment, "evaluate", lambda clf, data: (0.5, 0, 0, 0))
        grid = {"r_max": [30, 10], "lambda": [0.1, 1.0], "kappa": [10.0, 1.0]}
        g = grid_search(toy, config(grid=grid, validation_trials=1))
        assert (g.chosen["r_max"], g.chosen["lambda"], g.chosen["kappa"]) == (10, 1.0, 1.0)

    def test_never_reads_test_rows(self, toy, monkeypatch):
        cfg = config(grid={"r_max": [10, 20], "lambda": [0.1], "kappa": [1.0]}, validation_trials=3)
        train, test = train_test_split(toy, SplitSpec(cfg.test_fraction, cfg.base_seed))
        forbidden = {tuple(r) for r in test.features}
        assert not forbidden & {tuple(r) for r in train.features}
        seen = []
        for name in ("fit", "predict", "train_forests"):
            original = getattr(SR4FitClassifier, name)

            def spy(self, X, *a, _original=original, **k):
                seen.extend(tuple(r) for r in np.asarray(X))
                return _original(self, X, *a, **k)

            monkeypatch.setattr(SR4FitClassifier, name, spy)
        grid_search(train, cfg)
        assert seen and not forbidden & set(seen)
