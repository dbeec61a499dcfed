"""Classification metrics, rule-set stability, interpretability score and paired t-tests."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class TrialReport:
    trial_index: int
    seed: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    selected_rules: list = field(default_factory=list)  # one set of rule texts per class
    avg_rule_len: float = 0.0
    fit_seconds: float = 0.0

    @property
    def n_rules(self):
        return sum(len(s) for s in self.selected_rules)

    def tagged_rules(self):
        """All selected rules of the trial, each prefixed with its class index."""
        return {f"{c}:{r}" for c, rules in enumerate(self.selected_rules) for r in rules}


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    p_value: float
    df: int

    def to_dict(self):
        t = self.t_statistic
        return {"t": t if math.isfinite(t) else ("inf" if t > 0 else "-inf"),
                "p_value": self.p_value, "df": self.df}


def confusion_counts(y_true, y_pred, n_classes):
    """Matrix whose entry (a, b) counts rows with truth a predicted as b."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("confusion counts need at least one row")
    for y in (y_true, y_pred):
        if y.min() < 0 or y.max() >= n_classes:
            raise ValueError(f"labels must lie in 0..{n_classes - 1}")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return counts


def _ratio(num, den):
    return np.divide(num, den, out=np.zeros_like(num, dtype=float), where=den > 0)


def classification_metrics(counts):
    """Accuracy and macro-averaged precision, recall and F1 (0/0 counts as 0)."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total < 1:
        raise ValueError("empty confusion matrix")
    tp = np.diag(counts)
    precision = _ratio(tp, counts.sum(axis=0))
    recall = _ratio(tp, counts.sum(axis=1))
    f1 = _ratio(2 * precision * recall, precision + recall)
    return float(tp.sum() / total), float(precision.mean()), float(recall.mean()), float(f1.mean())


def dice_sorensen(a, b):
    """``2|A & B| / (|A| + |B|)``; two empty sets score 1."""
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return 2.0 * len(a & b) / (len(a) + len(b))


def stability(trials):
    """Mean pairwise Dice-Sorensen index of the trials' class-tagged rule sets."""
    if len(trials) < 2:
        raise ValueError("stability needs at least two trials")
    sets = [t.tagged_rules() if isinstance(t, TrialReport) else set(t) for t in trials]
    pairs = [dice_sorensen(a, b) for a, b in itertools.combinations(sets, 2)]
    return float(np.mean(pairs))


def interpretability_score(mean_accuracy, stability, mean_n_rules, mean_rule_len, r_max, max_depth):
    """Equal-weight mean of accuracy, stability, simplicity and brevity.

    simplicity = 1 - min(rules / r_max, 1) and brevity =
    1 - min((rule_len - 1) / max(max_depth - 1, 1), 1). A rule length below
    one (models without rules) counts as one.
    """
    simplicity = 1.0 - min(mean_n_rules / r_max, 1.0) if r_max > 0 else 1.0
    length = max(mean_rule_len, 1.0)
    brevity = 1.0 - min((length - 1.0) / max(max_depth - 1, 1), 1.0)
    return 0.25 * (mean_accuracy + stability + simplicity + brevity)


def _betacf(a, b, x, max_iter=500, eps=1e-16, tiny=1e-300):
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a, b, x):
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided(t, df):
    """Two-sided tail probability P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    if t == 0:
        return 1.0
    t2 = t * t
    if t2 < df:
        # df / (df + t^2) sits near 1 here; use the complement so 1 - x is exact
        return 1.0 - regularized_incomplete_beta(0.5, 0.5 * df, t2 / (df + t2))
    return regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t2))


def paired_t_test(a, b):
    """Paired two-sided t-test on ``a - b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-D and of equal length")
    n = a.shape[0]
    if n < 2:
        raise ValueError("a paired t-test needs at least two pairs")
    d = a - b
    if np.ptp(d) == 0.0:
        if d[0] == 0.0:
            return TTestResult(0.0, 1.0, n - 1)
        return TTestResult(math.copysign(math.inf, d[0]), 0.0, n - 1)
    t = float(d.mean()) / (float(d.std(ddof=1)) / math.sqrt(n))
    return TTestResult(t, student_t_two_sided(t, n - 1), n - 1)
