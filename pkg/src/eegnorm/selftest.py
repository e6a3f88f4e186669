"""Built-in oracle checks, runnable without the test suite installed."""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from .data import Recording, SubjectMeta
from .dsp import chain_gain, design_notch
from .learn import AdamaxState, adamax_step, cross_entropy
from .cpc import info_nce
from .normalize import quantile, robust_stats
from .recio import read_recording, write_recording


def _check_quantile() -> bool:
    rng = np.random.default_rng(0)
    for _ in range(100):
        xs = rng.normal(size=rng.integers(1, 400)) * rng.choice([1e-2, 1.0, 1e3])
        q = rng.random()
        if abs(quantile(xs, q) - np.quantile(xs, q)) > 1e-12:
            return False
    data = rng.normal(size=(5, 200))
    stats = robust_stats(data, "per_channel")
    med = np.quantile(data, 0.5, axis=1)
    iqr = np.quantile(data, 0.75, axis=1) - np.quantile(data, 0.25, axis=1)
    return bool(
        np.abs(stats.median - med).max() <= 1e-12
        and np.abs(stats.iqr - iqr).max() <= 1e-12
    )


def _check_notch() -> bool:
    sec = design_notch(60.0, 500.0, q=30.0)
    return (
        chain_gain(sec, 60.0, 500.0) < 1e-10
        and abs(chain_gain(sec, 0.0, 500.0) - 1.0) < 1e-12
    )


def _check_adamax() -> bool:
    params = {"w": np.array([0.5])}
    out, _ = adamax_step(params, {"w": np.array([1.0])}, AdamaxState.init(params))
    return abs(out["w"][0] - (0.5 - 0.002 / (1 + 1e-8))) < 1e-12


def _check_info_nce_plateau() -> bool:
    rng = np.random.default_rng(1)
    losses = []
    for _ in range(300):
        vecs = rng.normal(size=(22, 64))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        loss, _ = info_nce(vecs[0], vecs[1], vecs[2:])
        losses.append(loss)
    return abs(np.mean(losses) - np.log(21)) < 0.02


def _check_cross_entropy() -> bool:
    logits = np.arange(8.0)
    shifted = cross_entropy(logits + 123.0, 3)
    return (
        abs(cross_entropy(np.zeros(21), 0) - np.log(21)) < 1e-12
        and abs(shifted - cross_entropy(logits, 3)) < 1e-12
    )


def _check_round_trip() -> bool:
    rng = np.random.default_rng(2)
    meta = SubjectMeta("s0", 9.0, 1, "g1")
    rec = Recording("r0", ("a", "b"), 500.0, rng.normal(size=(2, 64)), meta)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "r.eegn"
        write_recording(rec, path)
        back = read_recording(path)
    return bool(
        np.array_equal(back.data, rec.data.astype(np.float32).astype(np.float64))
    )


CHECKS = [
    ("quantile vs independent oracle", _check_quantile),
    ("notch gain profile", _check_notch),
    ("adamax hand-computed step", _check_adamax),
    ("contrastive chance plateau ln(21)", _check_info_nce_plateau),
    ("cross-entropy identities", _check_cross_entropy),
    ("recording file round trip", _check_round_trip),
]


def run() -> int:
    passed = 0
    for name, check in CHECKS:
        ok = False
        try:
            ok = check()
        except Exception as exc:  # a selftest must never crash the CLI
            print(f"FAIL {name}: {exc}")
        if ok:
            passed += 1
            print(f"ok   {name}")
        else:
            print(f"FAIL {name}")
    print(f"{passed}/{len(CHECKS)} checks passed")
    return 0 if passed == len(CHECKS) else 1
