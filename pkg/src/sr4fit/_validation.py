"""Input validation shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array


def check_features(X, n_features=None, allow_empty=False):
    """Finite float64 2-D array, optionally with a fixed column count."""
    X = check_array(X, dtype=np.float64, ensure_all_finite=True,
                    ensure_min_samples=0 if allow_empty else 1)
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"X has {X.shape[1]} features, expected {n_features}")
    return X


def check_signed_labels(y, n_samples):
    """Targets coded as -1/+1 floats."""
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != n_samples:
        raise ValueError(f"y has {y.shape[0]} entries, expected {n_samples}")
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ValueError("binary targets must be coded as -1/+1")
    return y
