"""Input validation helpers shared by the estimator-style classes."""

import numpy as np


class NotFittedError(RuntimeError):
    pass


def check_array(X, name="X") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or infinite values")
    return X


def check_X_y(X, y):
    X = check_array(X)
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != X.shape[0]:
        raise ValueError(f"y shape {y.shape} does not match X shape {X.shape}")
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    labels = np.unique(y)
    if not np.all(np.isin(labels, [0, 1])):
        raise ValueError(f"labels must be binary 0/1, got {labels}")
    return X, y.astype(np.int64)


def check_is_fitted(estimator, attr: str):
    if not hasattr(estimator, attr):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted; call fit() first")
