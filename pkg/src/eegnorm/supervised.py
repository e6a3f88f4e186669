"""Supervised window benchmarks: age regression and gender classification.

The model is deliberately small and statistics-free: features are raw strided
samples, so whatever the normalization plan did to the values reaches the
network undisturbed.  One hidden tanh layer feeds a linear head (1 output for
age, 2 for gender); training uses Adamax, the test metric is computed after
every epoch, and the best epoch is reported.

A non-finite loss anywhere flags the run as collapsed and freezes training;
the result then carries a NaN metric rather than an exception, so benchmark
grids can tabulate the failure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .learn import (
    AdamaxState,
    adamax_step,
    balanced_accuracy,
    linear_backward,
    linear_forward,
    log_softmax,
    mae,
    softmax,
)
from .normalize import NormalizationPlan, WindowTensor
from .util import rng_for

TASK_AGE = "age"
TASK_GENDER = "gender"


@dataclass(frozen=True)
class SupervisedConfig:
    """`hidden_bias_scale` sets the uniform init range of the hidden biases.
    Nonzero biases break the odd symmetry of tanh, letting the linear head
    read oscillation energy (not just phase-dependent amplitude) from the
    hidden layer."""

    task: str = TASK_GENDER
    window_len_s: float = 2.0
    batch_size: int = 64
    epochs: int = 5
    hidden_dim: int = 32
    downsample_stride: int = 8
    hidden_bias_scale: float = 3.0
    lr: float = 0.002
    seed: int = 0

    def __post_init__(self):
        if self.task not in (TASK_AGE, TASK_GENDER):
            raise ValueError(f"unknown task {self.task!r}: valid values are age|gender")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.downsample_stride < 1:
            raise ValueError("stride must be >= 1")


@dataclass
class TaskResult:
    task: str
    plan: NormalizationPlan | None
    seed: int
    metric: float  # best-epoch test metric; NaN when collapsed
    final: float
    history: list[tuple[int, float, float]]  # (epoch, train loss, test metric)
    collapsed: bool
    higher_is_better: bool


def featurize(window: WindowTensor, stride: int) -> np.ndarray:
    """Flatten every stride-th timepoint of every channel; no statistics."""
    return window.data[:, ::stride].reshape(-1).copy()


def balance_classes(
    pairs: list[tuple[WindowTensor, int]], rng: np.random.Generator
) -> list[tuple[WindowTensor, int]]:
    """Subsample the majority class uniformly down to the minority count."""
    by_label: dict[int, list[int]] = {0: [], 1: []}
    for i, (_, label) in enumerate(pairs):
        if label not in by_label:
            raise ValueError(f"labels must be binary, got {label}")
        by_label[label].append(i)
    if not by_label[0] or not by_label[1]:
        raise ValueError("both classes must be present")
    n_keep = min(len(by_label[0]), len(by_label[1]))
    keep: list[int] = []
    for label in (0, 1):
        idx = by_label[label]
        if len(idx) > n_keep:
            chosen = rng.choice(len(idx), size=n_keep, replace=False)
            idx = [idx[j] for j in sorted(chosen)]
        keep.extend(idx)
    keep.sort()
    return [pairs[i] for i in keep]


def _forward(x: np.ndarray, params: dict[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    hidden = np.tanh(linear_forward(x, params["w1"], params["b1"]))
    return linear_forward(hidden, params["w2"], params["b2"]), hidden


def _loss_and_grads(
    x: np.ndarray, y: np.ndarray, params: dict[str, np.ndarray], task: str
) -> tuple[float, dict[str, np.ndarray]]:
    out, hidden = _forward(x, params)
    n = x.shape[0]
    if task == TASK_AGE:
        diff = out[:, 0] - y
        loss = float(np.mean(diff**2))
        d_out = (2.0 / n) * diff[:, None]
    else:
        logp = log_softmax(out)
        loss = float(-logp[np.arange(n), y.astype(int)].mean())
        d_out = softmax(out)
        d_out[np.arange(n), y.astype(int)] -= 1.0
        d_out /= n
    d_hidden, g_w2, g_b2 = linear_backward(d_out, hidden, params["w2"])
    d_pre = d_hidden * (1.0 - hidden**2)
    _, g_w1, g_b1 = linear_backward(d_pre, x, params["w1"])
    return loss, {"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2}


def _init_params(
    n_features: int,
    hidden: int,
    n_out: int,
    rng: np.random.Generator,
    out_bias: float,
    bias_scale: float,
) -> dict[str, np.ndarray]:
    params = {
        "w1": rng.normal(0.0, 1.0 / np.sqrt(n_features), (hidden, n_features)),
        "b1": rng.uniform(-bias_scale, bias_scale, hidden),
        "w2": rng.normal(0.0, 1.0 / np.sqrt(hidden), (n_out, hidden)),
        "b2": np.full(n_out, out_bias),
    }
    return params


def _metric(task: str, out: np.ndarray, y: np.ndarray) -> float:
    if task == TASK_AGE:
        return mae(out[:, 0], y)
    preds = out.argmax(axis=1)
    return balanced_accuracy(preds, y.astype(int))


def train_supervised(
    train: list[tuple[WindowTensor, float]],
    test: list[tuple[WindowTensor, float]],
    cfg: SupervisedConfig,
    plan: NormalizationPlan | None = None,
) -> TaskResult:
    """Train the reference model on labeled windows and report the best epoch.

    Inputs are (window, label) pairs produced under one normalization plan;
    gender labels are 0/1, age labels are years.  The run is deterministic
    given cfg.seed.
    """
    if not train or not test:
        raise ValueError("need non-empty train and test sets")
    rng = rng_for(cfg.seed, "supervised", cfg.task)
    stride = cfg.downsample_stride

    x_train = np.stack([featurize(w, stride) for w, _ in train])
    y_train = np.array([label for _, label in train], dtype=np.float64)
    x_test = np.stack([featurize(w, stride) for w, _ in test])
    y_test = np.array([label for _, label in test], dtype=np.float64)

    n_out = 1 if cfg.task == TASK_AGE else 2
    # regression starts at the constant-mean baseline; classification at zero
    out_bias = float(y_train.mean()) if cfg.task == TASK_AGE else 0.0
    params = _init_params(
        x_train.shape[1], cfg.hidden_dim, n_out, rng, out_bias, cfg.hidden_bias_scale
    )
    opt = AdamaxState.init(params, lr=cfg.lr)

    higher = cfg.task == TASK_GENDER
    history: list[tuple[int, float, float]] = []
    collapsed = False
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            rows = order[start : start + cfg.batch_size]
            loss, grads = _loss_and_grads(x_train[rows], y_train[rows], params, cfg.task)
            losses.append(loss)
            if not np.isfinite(loss):
                collapsed = True
                break
            params, opt = adamax_step(params, grads, opt)
            if opt.collapsed:
                collapsed = True
                break
        if collapsed:
            history.append((epoch, float("nan"), float("nan")))
            break
        out, _ = _forward(x_test, params)
        if not np.isfinite(out).all():
            collapsed = True
            history.append((epoch, float(np.mean(losses)), float("nan")))
            break
        history.append((epoch, float(np.mean(losses)), _metric(cfg.task, out, y_test)))

    finite = [m for _, _, m in history if np.isfinite(m)]
    if collapsed or not finite:
        best = final = float("nan")
        collapsed = True
    else:
        best = max(finite) if higher else min(finite)
        final = finite[-1]
    return TaskResult(
        task=cfg.task,
        plan=plan,
        seed=cfg.seed,
        metric=best,
        final=final,
        history=history,
        collapsed=collapsed,
        higher_is_better=higher,
    )
