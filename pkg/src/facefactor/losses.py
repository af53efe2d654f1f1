"""Loss functions with analytic gradients.

Every loss returns ``(scalar, grad)`` where the gradient is taken with
respect to the first argument. Batched inputs average over the batch so the
reported value is a per-sample expectation.
"""

import numpy as np

from .validation import as_f64, check_finite


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax_cross_entropy(logits, one_hot_labels):
    """Mean cross-entropy between softmax(logits) and one-hot labels.

    grad = (softmax(logits) - labels) / batch.
    """
    logits = as_f64(logits)
    labels = as_f64(one_hot_labels)
    if logits.size == 0:
        raise ValueError("softmax_cross_entropy on empty input")
    if logits.shape != labels.shape:
        raise ValueError(
            f"logits shape {logits.shape} != labels shape {labels.shape}"
        )
    squeeze = logits.ndim == 1
    if squeeze:
        logits = logits[None, :]
        labels = labels[None, :]
    n = logits.shape[0]
    loss = -(labels * log_softmax(logits)).sum() / n
    grad = (softmax(logits) - labels) / n
    check_finite(np.asarray(loss), "cross-entropy loss")
    return float(loss), (grad[0] if squeeze else grad)


def l1_loss(a, b):
    """Mean absolute difference; subgradient at exact ties is 0."""
    a = as_f64(a)
    b = as_f64(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    loss = float(np.abs(diff).mean())
    grad = np.sign(diff) / diff.size
    return loss, grad


def sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def log_sigmoid(x):
    # log sigmoid(x) = -softplus(-x), stable on both tails
    return np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))),
                    x - np.log1p(np.exp(-np.abs(x))))


def mean_log_sigmoid(logits, positive=True):
    """Mean of log p(s=1) (positive) or log p(s=0) over a batch of logits.

    Returns (value, d value / d logits).
    """
    u = as_f64(np.atleast_1d(logits))
    n = u.size
    s = sigmoid(u)
    if positive:
        value = float(log_sigmoid(u).mean())
        grad = (1.0 - s) / n
    else:
        value = float(log_sigmoid(-u).mean())
        grad = -s / n
    check_finite(np.asarray(value), "source log-likelihood")
    return value, grad
