"""Small input-validation helpers shared across the package."""

import numpy as np


def as_f64(x, name="array"):
    """Return ``x`` as a contiguous float64 ndarray."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    return arr


def check_finite(arr, name="array"):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_shape(arr, shape, name="array"):
    """Check trailing dims; ``None`` entries in ``shape`` match anything."""
    if arr.ndim != len(shape):
        raise ValueError(f"{name} has ndim {arr.ndim}, expected {len(shape)}")
    for got, want in zip(arr.shape, shape):
        if want is not None and got != want:
            raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
    return arr


def check_length(vec, n, name="vector"):
    vec = as_f64(vec, name)
    if vec.ndim != 1 or vec.shape[0] != n:
        raise ValueError(f"{name} has shape {vec.shape}, expected ({n},)")
    return vec


def check_labels(labels, n_classes, name="labels"):
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(
            f"{name} out of range: values must lie in [0, {n_classes})"
        )
    return labels.astype(np.int64)


def check_expression_code(weights, n_exp, name="expression code"):
    """Nonnegative finite intensity vector of length n_exp."""
    w = check_length(weights, n_exp, name)
    check_finite(w, name)
    if np.any(w < 0):
        raise ValueError(f"{name} has negative entries")
    return w


def is_one_hot(vec, tol=0.0):
    vec = np.asarray(vec, dtype=np.float64)
    if vec.ndim != 1:
        return False
    hits = np.isclose(vec, 1.0, atol=tol).sum()
    zeros = np.isclose(vec, 0.0, atol=tol).sum()
    return hits == 1 and hits + zeros == vec.shape[0]


def one_hot(index, n):
    if not 0 <= index < n:
        raise ValueError(f"index {index} out of range for one-hot of length {n}")
    v = np.zeros(n, dtype=np.float64)
    v[index] = 1.0
    return v
