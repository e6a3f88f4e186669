"""Numerical learning substrate: linear layers, Adamax, metrics, grad checks.

Everything runs in float64.  Parameters are plain dicts of ndarrays; the
optimizer is pure (returns new dicts), which keeps training runs trivially
reproducible and lets the harness run many of them concurrently.

Collapse (a non-finite loss or gradient) is recorded on the optimizer state
rather than raised: benchmark cells must be able to report NaN results.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

Params = dict[str, np.ndarray]


def linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """y = x W^T + b for a single vector or a batch of row vectors."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2):
        raise ValueError(f"x must be 1-D or 2-D, got {x.ndim}-D")
    if x.shape[-1] != w.shape[1]:
        raise ValueError(f"shape mismatch: x {x.shape} vs W {w.shape}")
    return x @ w.T + b


def linear_backward(
    grad_out: np.ndarray, x: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of a linear layer given upstream grad_out.

    Returns (grad_x, grad_w, grad_b); for 1-D inputs grad_b equals grad_out
    exactly, for batches it is the sum over rows.
    """
    grad_out = np.asarray(grad_out, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if grad_out.ndim == 1:
        return grad_out @ w, np.outer(grad_out, x), grad_out.copy()
    return grad_out @ w, grad_out.T @ x, grad_out.sum(axis=0)


@dataclass(frozen=True)
class AdamaxState:
    """Optimizer state; `collapsed` latches when a non-finite gradient appears."""

    m: Params
    u: Params
    t: int = 0
    lr: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    collapsed: bool = False

    @classmethod
    def init(cls, params: Params, lr: float = 0.002) -> "AdamaxState":
        zeros = {k: np.zeros_like(v) for k, v in params.items()}
        return cls(m=zeros, u={k: np.zeros_like(v) for k, v in params.items()}, lr=lr)


def adamax_step(
    params: Params, grads: Params, state: AdamaxState
) -> tuple[Params, AdamaxState]:
    """One Adamax update.

    m <- beta1 m + (1 - beta1) g;  u <- max(beta2 u, |g|);
    theta <- theta - lr / (1 - beta1^t) * m / (u + eps),  t incremented first.

    A non-finite gradient refuses the step: parameters are returned untouched
    and the collapse flag is raised.
    """
    if set(params) != set(grads):
        raise ValueError("params and grads must share keys")
    if any(not np.isfinite(g).all() for g in grads.values()):
        return params, replace(state, collapsed=True)

    t = state.t + 1
    correction = 1.0 - state.beta1**t
    new_params: Params = {}
    new_m: Params = {}
    new_u: Params = {}
    for key, theta in params.items():
        g = grads[key]
        m = state.beta1 * state.m[key] + (1.0 - state.beta1) * g
        u = np.maximum(state.beta2 * state.u[key], np.abs(g))
        new_params[key] = theta - (state.lr / correction) * m / (u + state.eps)
        new_m[key] = m
        new_u[key] = u
    if any(not np.isfinite(p).all() for p in new_params.values()):
        return params, replace(state, collapsed=True)
    return new_params, replace(state, m=new_m, u=new_u, t=t)


def grad_check(f, params: Params, h: float = 1e-5) -> float:
    """Max deviation between analytic and central-difference gradients.

    `f(params)` must return ``(loss, grads)``.  The deviation is normalized by
    the infinity norm of the finite-difference gradient, so a correct gradient
    scores ~1e-9 on smooth f64 problems while a gradient that is wrong by a
    factor of two scores ~1.
    """
    _, analytic = f(params)
    worst = 0.0
    scale = 0.0
    for key, arr in params.items():
        flat = arr.ravel()
        fd = np.zeros_like(flat)
        for i in range(flat.size):
            bumped = {k: v.copy() for k, v in params.items()}
            bumped[key].ravel()[i] = flat[i] + h
            up, _ = f(bumped)
            bumped[key].ravel()[i] = flat[i] - h
            down, _ = f(bumped)
            fd[i] = (up - down) / (2.0 * h)
        scale = max(scale, float(np.abs(fd).max(initial=0.0)))
        worst = max(worst, float(np.abs(analytic[key].ravel() - fd).max(initial=0.0)))
    return worst / max(scale, 1e-12)


def mae(preds, targets) -> float:
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape or preds.size == 0:
        raise ValueError(f"length mismatch: {preds.shape} vs {targets.shape}")
    return float(np.mean(np.abs(preds - targets)))


def balanced_accuracy(preds, labels) -> float:
    """(TPR + TNR) / 2 for binary labels; both classes must be present."""
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape:
        raise ValueError("length mismatch")
    pos = labels == 1
    neg = labels == 0
    if not pos.any() or not neg.any():
        raise ValueError("both classes must be present in labels")
    tpr = float(np.mean(preds[pos] == 1))
    tnr = float(np.mean(preds[neg] == 0))
    return (tpr + tnr) / 2.0


def log_softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def cross_entropy(logits: np.ndarray, target: int) -> float:
    """-log softmax(logits)[target], computed with max subtraction."""
    return float(-log_softmax(np.asarray(logits, dtype=np.float64))[target])


def cross_entropy_grad(logits: np.ndarray, target: int) -> np.ndarray:
    """d loss / d logits = softmax - one_hot(target)."""
    grad = softmax(logits)
    grad[target] -= 1.0
    return grad
