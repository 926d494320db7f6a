"""Layer primitives with exact reverse-mode gradients.

Forward/backward pairs for dense affine maps, batch normalization, tanh,
two-way elementwise addition, and softmax cross-entropy. Inputs are
(n_samples x n_features) float64 matrices.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .numerics import matmul

TRAIN = "train"
EVAL = "eval"


def dense_forward(x, w, b):
    """y = x @ w + b with the bias row broadcast over samples."""
    b = np.asarray(b, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if b.ndim != 1 or b.shape[0] != w.shape[1]:
        raise ShapeError(f"bias shape {b.shape} does not match weight fan-out {w.shape}")
    y = matmul(x, w)
    y += b
    return y


def dense_backward(x, w, upstream):
    """Gradients (dx, dw, db) of a dense forward given upstream dL/dy."""
    if upstream.shape != (x.shape[0], w.shape[1]):
        raise ShapeError(
            f"upstream shape {upstream.shape} does not match dense output ({x.shape[0]}, {w.shape[1]})"
        )
    dx = upstream @ w.T
    dw = x.T @ upstream
    db = upstream.sum(axis=0)
    return dx, dw, db


@dataclass
class BatchNormTrace:
    """Quantities cached by a train-mode batch-norm forward for backward."""

    x_hat: np.ndarray
    inv_std: np.ndarray
    gamma: np.ndarray


def batchnorm_forward(x, gamma, beta, eps, momentum, mode,
                      running_mean=None, running_var=None, update_running=True):
    """Per-column standardization followed by scale-and-shift.

    Train mode standardizes by the batch mean and (biased) variance and, when
    update_running is set, folds them into the running statistics in place:
    running <- momentum * running + (1 - momentum) * batch. Eval mode
    standardizes by the running statistics and returns no trace.

    Train mode requires n >= 2 so the batch variance is defined.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"batch norm expects a 2-D input, got shape {x.shape}")
    n, d = x.shape
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(f"gamma/beta shapes {gamma.shape}/{beta.shape} do not match width {d}")

    if mode == TRAIN:
        if n < 2:
            raise ShapeError(f"batch norm train mode needs n >= 2 samples, got n={n}")
        mean = x.mean(axis=0)
        x_hat = x - mean
        var = np.einsum("ij,ij->j", x_hat, x_hat) / n
        inv_std = 1.0 / np.sqrt(var + eps)
        x_hat *= inv_std
        if update_running:
            running_mean *= momentum
            running_mean += (1.0 - momentum) * mean
            running_var *= momentum
            running_var += (1.0 - momentum) * var
        out = x_hat * gamma
        out += beta
        return out, BatchNormTrace(x_hat, inv_std, gamma)

    if mode == EVAL:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        return gamma * (x - running_mean) * inv_std + beta, None

    raise ValueError(f"unknown batch norm mode {mode!r}")


def batchnorm_backward(trace, upstream):
    """Gradients (dx, dgamma, dbeta) of a train-mode batch-norm forward.

    Exact reverse mode including the dependence of the batch mean and
    variance on every sample.
    """
    x_hat = trace.x_hat
    n = x_hat.shape[0]
    if upstream.shape != x_hat.shape:
        raise ShapeError(f"upstream shape {upstream.shape} does not match input {x_hat.shape}")
    dbeta = upstream.sum(axis=0)
    dgamma = np.einsum("ij,ij->j", upstream, x_hat)
    dx = n * upstream
    dx -= dbeta
    dx -= x_hat * dgamma
    dx *= trace.gamma * (trace.inv_std / n)
    return dx, dgamma, dbeta


def tanh_forward(x):
    return np.tanh(x)


def tanh_backward(y, upstream):
    """Gradient through tanh given its cached output y: upstream * (1 - y^2)."""
    out = y * y
    np.subtract(1.0, out, out=out)
    out *= upstream
    return out


def add_forward(a, b):
    """Elementwise sum of two equal-shape matrices."""
    if a.shape != b.shape:
        raise ShapeError(f"add requires equal shapes, got {a.shape} and {b.shape}")
    return a + b


def add_backward(upstream):
    """Both branches receive the identical upstream gradient."""
    return upstream, upstream


def softmax(logits):
    """Row-wise softmax, numerically stabilized by the row max."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean negative log-likelihood and its gradient wrt the logits.

    loss = mean_i of -log softmax(logits_i)[labels_i],
    grad = (softmax(logits) - onehot(labels)) / n.
    Labels must be integers in [0, n_classes).
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ShapeError(f"logits must be 2-D, got shape {logits.shape}")
    n, classes = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"labels shape {labels.shape} does not match {n} logit rows")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValueError(f"labels must be integers, got dtype {labels.dtype}")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise ValueError(
            f"label out of range: values span [{labels.min()}, {labels.max()}], expected [0, {classes})"
        )

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(n)
    loss = float(-log_probs[rows, labels].mean())
    grad = np.exp(log_probs)
    grad[rows, labels] -= 1.0
    grad /= n
    return loss, grad
