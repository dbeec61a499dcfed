"""One-vs-rest SR4-Fit classifier with a scikit-learn estimator interface."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features
from .dataset import Standardizer
from .forest import Forest, train_forest
from .rules import RuleFeatureTransformer, Rule, RuleSet, extended_matrix, rule_matrix
from .sr3 import FitDiagnostics, HyperParams, OptimizerConfig, SparseLinearModel, fit_sr3, prune

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """A model file is unreadable or does not follow the expected schema."""


class ModelVersionError(ModelFormatError):
    """A model file was written by an incompatible format version."""


class FitError(RuntimeError):
    """Fitting one of the per-class models failed."""


def class_seed(seed, class_index):
    """Per-class seed: first 64-bit word of ``SeedSequence(seed, spawn_key=(c,))``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(class_index),))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class ClassModel:
    class_id: int
    rules: RuleSet
    model: SparseLinearModel
    standardizer: Standardizer
    diagnostics: FitDiagnostics
    forest: Forest | None = None

    def design_matrix(self, X):
        return extended_matrix(self.standardizer.transform(X), rule_matrix(self.rules, X))

    def decision_function(self, X):
        return self.model.decision_function(self.design_matrix(X))

    def point_score(self, x):
        """Score of one vector, summing only over the selected terms."""
        d = self.standardizer.n_features_in_
        x = np.asarray(x, dtype=float)
        if x.shape != (d,):
            raise ValueError(f"expected a vector of {d} features, got shape {x.shape}")
        z_raw = (x - self.standardizer.means_) / self.standardizer.stds_
        s = self.model.intercept
        for j in self.model.support:
            zj = z_raw[j] if j < d else float(self.rules[j - d].evaluate(x))
            s += self.model.beta[j] * zj
        return float(s)

    def to_dict(self):
        return {
            "class_id": self.class_id,
            "standardizer": self.standardizer.to_dict(),
            "rules": [r.to_dict() for r in self.rules],
            "beta": self.model.beta.tolist(),
            "intercept": self.model.intercept,
            "w": self.model.w.tolist(),
            "objective_trace": list(self.model.objective_trace),
            "diagnostics": self.diagnostics.to_dict(),
            "forest": self.forest.to_dict() if self.forest is not None else None,
        }

    @classmethod
    def from_dict(cls, p):
        rules = RuleSet(tuple(Rule.from_dict(r) for r in p["rules"]), int(p["class_id"]))
        model = SparseLinearModel(np.asarray(p["beta"], dtype=float), float(p["intercept"]),
                                  np.asarray(p["w"], dtype=float), list(p.get("objective_trace", [])))
        std = Standardizer.from_dict(p["standardizer"])
        if model.beta.shape != (std.n_features_in_ + len(rules),) or model.w.shape != model.beta.shape:
            raise ModelFormatError(f"class {p['class_id']}: coefficient length does not match "
                                   f"{std.n_features_in_} features + {len(rules)} rules")
        forest = Forest.from_dict(p["forest"]) if p.get("forest") else None
        return cls(int(p["class_id"]), rules, model, std, FitDiagnostics(**p["diagnostics"]), forest)


class SR4FitClassifier(ClassifierMixin, BaseEstimator):
    """Sparse relaxed logistic model over raw features and forest-derived rules.

    One binary model is fitted per class (one-vs-rest, also for two-class
    problems). For class ``c`` a forest is trained to separate ``c`` from the
    rest, up to ``r_max`` distinct path rules are extracted, and a sparse
    relaxed logistic fit over ``[standardized X | rule indicators]`` selects
    the terms. Prediction takes the class with the largest per-class
    probability.

    Parameters
    ----------
    r_max : int, default=100
        Maximum number of distinct rules per class; 0 disables rules.
    lam : float, default=0.1
        Sparsity weight on ``||w||_1``.
    kappa : float, default=1.0
        Coupling weight on ``||beta - w||^2 / 2``.
    n_trees, max_depth, min_leaf, max_features, bootstrap :
        Rule-generating forest settings. ``max_features=None`` draws
        ``ceil(sqrt(d))`` candidate features per split.
    max_outer_iters, outer_tol, max_inner_iters, inner_tol, armijo_c, backtrack_factor, initial_step, inner_solver :
        Optimizer settings, see :class:`sr4fit.sr3.OptimizerConfig`.
    random_state : int, default=0
        Master seed; class ``c`` uses :func:`class_seed` ``(random_state, c)``.

    Attributes
    ----------
    classes_ : ndarray
        Sorted class labels.
    class_names_ : list of str
    feature_names_ : list of str
    class_models_ : list of ClassModel
        One fitted model per entry of ``classes_``.
    """

    def __init__(self, r_max=100, lam=0.1, kappa=1.0, n_trees=25, max_depth=4, min_leaf=5,
                 max_features=None, bootstrap=True, max_outer_iters=500, outer_tol=1e-6,
                 max_inner_iters=100, inner_tol=1e-8, armijo_c=1e-4, backtrack_factor=0.5,
                 initial_step=1.0, inner_solver="newton", random_state=0):
        self.r_max = r_max
        self.lam = lam
        self.kappa = kappa
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.max_outer_iters = max_outer_iters
        self.outer_tol = outer_tol
        self.max_inner_iters = max_inner_iters
        self.inner_tol = inner_tol
        self.armijo_c = armijo_c
        self.backtrack_factor = backtrack_factor
        self.initial_step = initial_step
        self.inner_solver = inner_solver
        self.random_state = random_state

    def hyperparams(self):
        return HyperParams(lam=float(self.lam), kappa=float(self.kappa), r_max=int(self.r_max))

    def optimizer_config(self):
        return OptimizerConfig(max_outer_iters=self.max_outer_iters, outer_tol=self.outer_tol,
                               max_inner_iters=self.max_inner_iters, inner_tol=self.inner_tol,
                               armijo_c=self.armijo_c, backtrack_factor=self.backtrack_factor,
                               initial_step=self.initial_step, inner_solver=self.inner_solver)

    def _rule_transformer(self, class_index):
        return RuleFeatureTransformer(r_max=self.r_max, n_trees=self.n_trees, max_depth=self.max_depth,
                                      min_leaf=self.min_leaf, max_features=self.max_features,
                                      bootstrap=self.bootstrap,
                                      random_state=class_seed(self.random_state, class_index))

    def fit(self, X, y, feature_names=None, class_names=None, forests=None):
        """Fit one sparse rule model per class.

        Parameters
        ----------
        X : array-like of shape (n_samples, n_features)
        y : array-like of shape (n_samples,)
        feature_names : sequence of str, optional
            Defaults to DataFrame column names, else ``x0, x1, ...``.
        class_names : sequence of str, optional
            Display names aligned with the sorted classes.
        forests : sequence of Forest, optional
            Pre-trained per-class forests (aligned with the sorted classes).
            They must come from the same data and forest settings; used to
            share forests across a hyperparameter grid.
        """
        if feature_names is None and hasattr(X, "columns"):
            feature_names = [str(c) for c in X.columns]
        X = check_features(X)
        y = np.asarray(y)
        if y.shape != (X.shape[0],):
            raise ValueError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
        check_classification_targets(y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes to fit a one-vs-rest model")
        self.n_features_in_ = X.shape[1]
        self.feature_names_ = list(feature_names) if feature_names is not None else [
            f"x{j}" for j in range(X.shape[1])]
        if len(self.feature_names_) != X.shape[1]:
            raise ValueError(f"{len(self.feature_names_)} feature names for {X.shape[1]} columns")
        self.class_names_ = ([str(c) for c in class_names] if class_names is not None
                             else [str(c) for c in self.classes_])
        if len(self.class_names_) != len(self.classes_):
            raise ValueError(f"{len(self.class_names_)} class names for {len(self.classes_)} classes")
        if forests is not None and len(forests) != len(self.classes_):
            raise ValueError("need exactly one pre-trained forest per class")

        hp, cfg = self.hyperparams(), self.optimizer_config()
        self.class_models_ = []
        for c in range(len(self.classes_)):
            yc = np.where(y_idx == c, 1.0, -1.0)
            try:
                tf = self._rule_transformer(c).fit(X, yc, forest=None if forests is None else forests[c],
                                                   source=c)
                Z = tf.transform(X)
                model, diag = fit_sr3(Z, yc, hp, cfg)
                model = prune(model, Z, yc)
            except (ValueError, ArithmeticError) as exc:
                raise FitError(f"class {self.class_names_[c]!r}: {exc}") from exc
            self.class_models_.append(
                ClassModel(c, tf.rules_, model, tf.standardizer_, diag, tf.forest_))
        return self

    def train_forests(self, X, y):
        """Per-class forests exactly as :meth:`fit` would train them."""
        X = check_features(X)
        classes, y_idx = np.unique(np.asarray(y), return_inverse=True)
        out = []
        for c in range(len(classes)):
            yc = np.where(y_idx == c, 1.0, -1.0)
            out.append(train_forest(X, yc, self._rule_transformer(c).forest_config()))
        return out

    def decision_function(self, X):
        """Per-class scores ``b0 + Z(x) . beta``, shape (n_samples, n_classes)."""
        check_is_fitted(self, "class_models_")
        X = check_features(X, n_features=self.n_features_in_, allow_empty=True)
        return np.column_stack([m.decision_function(X) for m in self.class_models_])

    def class_score(self, x, class_index):
        check_is_fitted(self, "class_models_")
        return self.class_models_[class_index].point_score(x)

    def predict_proba(self, X, normalize=False):
        """Per-class one-vs-rest sigmoid probabilities.

        Rows need not sum to one; ``normalize=True`` rescales them for display.
        """
        P = expit(self.decision_function(X))
        if normalize:
            P = P / P.sum(axis=1, keepdims=True)
        return P

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def selected_rules(self, precision=None):
        """Per class, the set of canonical texts of rules with nonzero w."""
        check_is_fitted(self, "class_models_")
        out = []
        for cm in self.class_models_:
            d = cm.standardizer.n_features_in_
            kw = {} if precision is None else {"precision": precision}
            out.append({cm.rules[j - d].text(**kw) for j in cm.model.support if j >= d})
        return out

    def rule_report(self):
        return rule_report(self)

    def to_dict(self):
        check_is_fitted(self, "class_models_")
        return {
            "format_version": FORMAT_VERSION,
            "feature_names": list(self.feature_names_),
            "class_names": list(self.class_names_),
            "classes": self.classes_.tolist(),
            "hyperparams": {"lambda": float(self.lam), "kappa": float(self.kappa), "r_max": int(self.r_max)},
            "params": self.get_params(),
            "class_models": [m.to_dict() for m in self.class_models_],
        }

    @classmethod
    def from_dict(cls, payload):
        if not isinstance(payload, dict) or "format_version" not in payload:
            raise ModelFormatError("missing format_version")
        version = payload["format_version"]
        if version != FORMAT_VERSION:
            raise ModelVersionError(f"model format_version {version} is not supported "
                                    f"(this build reads version {FORMAT_VERSION})")
        try:
            clf = cls(**payload["params"])
            clf.classes_ = np.asarray(payload["classes"])
            clf.class_names_ = list(payload["class_names"])
            clf.feature_names_ = list(payload["feature_names"])
            clf.n_features_in_ = len(clf.feature_names_)
            clf.class_models_ = [ClassModel.from_dict(m) for m in payload["class_models"]]
        except (KeyError, TypeError) as exc:
            raise ModelFormatError(f"malformed model file: {exc!r}") from exc
        if len(clf.class_models_) != len(clf.classes_):
            raise ModelFormatError("number of class models does not match the classes")
        return clf

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: not a valid model file ({exc})") from exc
        return cls.from_dict(payload)


def save_model(clf, path):
    clf.save(path)


def load_model(path):
    return SR4FitClassifier.load(path)


def _coef(v):
    return f"{v:+.6g}"


def rule_report(clf):
    """Plain-text listing of selected terms per class, largest |beta| first."""
    check_is_fitted(clf, "class_models_")
    lines = []
    for cm in clf.class_models_:
        d = cm.standardizer.n_features_in_
        terms = []
        for j in cm.model.support:
            if j < d:
                terms.append((cm.model.beta[j], "feature", clf.feature_names_[j]))
            else:
                terms.append((cm.model.beta[j], "rule", cm.rules[j - d].text(clf.feature_names_)))
        terms.sort(key=lambda t: -abs(t[0]))
        n_rules = sum(1 for t in terms if t[1] == "rule")
        name = clf.class_names_[cm.class_id]
        diag = cm.diagnostics
        lines.append(f"class {name} (id {cm.class_id}): {len(terms)} selected terms "
                     f"({n_rules} rules, {len(terms) - n_rules} features) of "
                     f"{d} features + {len(cm.rules)} rules")
        lines.append(f"  intercept {_coef(cm.model.intercept)}")
        lines.append(f"  converged={diag.converged} outer_iterations={diag.outer_iterations} "
                     f"objective={diag.final_objective:.6g}")
        for beta, kind, text in terms:
            lines.append(f"  {_coef(beta):>12}  {kind:<7} {text}")
        lines.append("")
    return "\n".join(lines)
