"""Bit-exact on-disk recording format.

Layout (little-endian throughout):

    magic   4 bytes  b"EEGN"
    version u32      1
    n_chan  u32
    n_samp  u64
    fs      f64
    names   per channel: u16 byte length + UTF-8 name
    data    f32, channel-major (channel 0's samples, then channel 1's, ...)

Subject metadata lives in a sidecar text file with the same basename and a
`.meta` suffix, one `key=value` per line (subject_id, age, gender, group).

Values are stored at f32 precision; reading a written recording reproduces the
f32-rounded data bit for bit.  Computation elsewhere stays in f64.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .data import Recording, SubjectMeta

MAGIC = b"EEGN"
VERSION = 1

_HEAD = struct.Struct("<4sIIQd")


class RecordingFormatError(Exception):
    """Base class for malformed recording files."""


class BadMagicError(RecordingFormatError):
    pass


class VersionMismatchError(RecordingFormatError):
    pass


class TruncatedFileError(RecordingFormatError):
    pass


def meta_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".meta")


def write_recording(rec: Recording, path: str | Path) -> None:
    """Write a recording plus its `.meta` sidecar. Rejects non-finite data."""
    if not np.isfinite(rec.data).all():
        raise ValueError(f"non-finite data in recording {rec.id!r}")
    path = Path(path)

    blob = bytearray()
    blob += _HEAD.pack(MAGIC, VERSION, rec.n_channels, rec.n_samples, float(rec.fs))
    for name in rec.channels:
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValueError(f"channel name too long: {name!r}")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
    blob += np.ascontiguousarray(rec.data, dtype="<f4").tobytes()
    path.write_bytes(blob)

    meta = rec.meta
    lines = [
        f"id={rec.id}",
        f"subject_id={meta.subject_id}",
        f"age={meta.age!r}",
        f"gender={meta.gender}",
        f"group={meta.group}",
    ]
    meta_path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_meta(path: Path) -> tuple[str, SubjectMeta]:
    fields: dict[str, str] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise RecordingFormatError(f"malformed meta line in {path}: {line!r}")
        key, value = line.split("=", 1)
        fields[key.strip()] = value.strip()
    missing = {"id", "subject_id", "age", "gender", "group"} - fields.keys()
    if missing:
        raise RecordingFormatError(f"meta file {path} missing keys: {sorted(missing)}")
    meta = SubjectMeta(
        subject_id=fields["subject_id"],
        age=float(fields["age"]),
        gender=int(fields["gender"]),
        group=fields["group"],
    )
    return fields["id"], meta


def read_recording(path: str | Path) -> Recording:
    """Read a recording written by `write_recording`.

    Distinct errors are raised for a bad magic, an unsupported version, and a
    payload shorter than the declared dimensions.
    """
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEAD.size:
        raise TruncatedFileError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, n_channels, n_samples, fs = _HEAD.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: format error, bad magic {magic!r}")
    if version != VERSION:
        raise VersionMismatchError(f"{path}: unsupported version {version}")

    offset = _HEAD.size
    names = []
    for _ in range(n_channels):
        if offset + 2 > len(blob):
            raise TruncatedFileError(f"{path}: truncated channel-name block")
        (length,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        if offset + length > len(blob):
            raise TruncatedFileError(f"{path}: truncated channel-name block")
        names.append(blob[offset : offset + length].decode("utf-8"))
        offset += length

    expected = n_channels * n_samples * 4
    payload = blob[offset:]
    if len(payload) < expected:
        raise TruncatedFileError(
            f"{path}: truncated payload, declared {expected} data bytes, got {len(payload)}"
        )
    if len(payload) > expected:
        raise RecordingFormatError(f"{path}: {len(payload) - expected} trailing bytes")
    data = np.frombuffer(payload, dtype="<f4").reshape(n_channels, n_samples)
    data = data.astype(np.float64)
    if not np.isfinite(data).all():
        raise ValueError(f"non-finite data in {path}")

    rec_id, meta = _read_meta(meta_path(path))
    return Recording(id=rec_id, channels=tuple(names), fs=fs, data=data, meta=meta)
