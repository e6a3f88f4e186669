"""Normalized-window export: a flat f32 payload plus a JSON manifest.

Binary layout (little-endian):

    magic   4 bytes  b"EEGW"
    version u32      1
    n_win   u32
    n_chan  u32
    n_samp  u32
    payload n_win * n_chan * n_samp f32, window-major then channel-major

The manifest (same path + ``.manifest.json``) carries the window count and
shape, aligned label arrays, the plan and policy used, and the SHA-256 of the
payload bytes so consumers in other environments can verify they loaded the
exact bytes this library produced.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .data import LabeledDataset
from .normalize import DegeneracyPolicy, NormalizationPlan, WindowTensor, apply_plan
from .util import sha256_hex

MAGIC = b"EEGW"
VERSION = 1
_HEAD = struct.Struct("<4sIIII")


def manifest_path(path: str | Path) -> Path:
    return Path(str(path) + ".manifest.json")


def collect_windows(
    ds: LabeledDataset,
    plan: NormalizationPlan,
    window_len_s: float,
    policy: DegeneracyPolicy = DegeneracyPolicy.FLAG_IDENTITY,
) -> tuple[list[WindowTensor], list[dict]]:
    """Windows for every recording (dataset order) with aligned label rows."""
    windows: list[WindowTensor] = []
    labels: list[dict] = []
    for rec in ds:
        for win in apply_plan(rec, plan, window_len_s, policy):
            windows.append(win)
            labels.append(
                {
                    "recording_id": win.recording_id,
                    "offset_samples": win.offset_samples,
                    "age": rec.meta.age,
                    "gender": rec.meta.gender,
                    "group": rec.meta.group,
                    "flagged_channels": sorted(win.flags),
                }
            )
    return windows, labels


def write_windows(
    path: str | Path,
    windows: list[WindowTensor],
    labels: list[dict],
    plan: NormalizationPlan,
    window_len_s: float,
    policy: DegeneracyPolicy,
) -> dict:
    """Write payload + manifest; returns the manifest dict."""
    if not windows:
        raise ValueError("no windows to export")
    n_chan, n_samp = windows[0].data.shape
    stack = np.stack([w.data for w in windows]).astype("<f4")
    payload = stack.tobytes()

    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_HEAD.pack(MAGIC, VERSION, len(windows), n_chan, n_samp))
        fh.write(payload)

    manifest = {
        "format": "eegw",
        "version": VERSION,
        "n_windows": len(windows),
        "n_channels": n_chan,
        "n_samples": n_samp,
        "window_len_s": window_len_s,
        "plan": {"recording": str(plan.recording), "window": str(plan.window)},
        "policy": policy.value,
        "payload_sha256": sha256_hex(payload),
        "labels": labels,
    }
    manifest_path(path).write_text(
        json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8"
    )
    return manifest


def read_windows(path: str | Path) -> tuple[np.ndarray, dict]:
    """Read a window file back: (n_win, C, S) float32 array and its manifest."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEAD.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n_win, n_chan, n_samp = _HEAD.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    expected = n_win * n_chan * n_samp * 4
    payload = blob[_HEAD.size :]
    if len(payload) != expected:
        raise ValueError(f"{path}: payload size {len(payload)} != expected {expected}")
    data = np.frombuffer(payload, dtype="<f4").reshape(n_win, n_chan, n_samp)
    manifest = json.loads(manifest_path(path).read_text(encoding="utf-8"))
    return data, manifest
