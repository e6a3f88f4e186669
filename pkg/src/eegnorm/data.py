"""Canonical data model: recordings, subject metadata, datasets, splitting.

Recordings are treated as immutable after construction; operations return new
objects and never mutate the input arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


class DataModelError(ValueError):
    """Invalid construction or operation on the data model."""


@dataclass(frozen=True)
class SubjectMeta:
    """Subject attributes attached to a recording.

    `group` is the split unit: train/test partitions are formed by holding out
    whole groups, and subject disjointness across the split is verified.
    """

    subject_id: str
    age: float
    gender: int
    group: str

    def __post_init__(self):
        if not self.subject_id:
            raise DataModelError("subject_id must be non-empty")
        if not self.group:
            raise DataModelError("group must be non-empty")
        if self.age < 0:
            raise DataModelError(f"age must be >= 0, got {self.age}")
        if self.gender not in (0, 1):
            raise DataModelError(f"gender must be 0 or 1, got {self.gender}")


@dataclass(frozen=True, eq=False)
class Recording:
    """One multichannel recording: C channels x N samples, in microvolts.

    Invariants checked on construction: the data row count matches the channel
    list, there is at least one sample, and the sampling rate is positive.
    Finiteness is checked at ingest boundaries (file IO, dataset validation)
    rather than here, so that diagnostic paths can hold non-finite data.
    """

    id: str
    channels: tuple[str, ...]
    fs: float
    data: np.ndarray
    meta: SubjectMeta

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        if data.ndim != 2:
            raise DataModelError(f"data must be 2-D (C x N), got shape {data.shape}")
        if data.shape[0] != len(self.channels):
            raise DataModelError(
                f"{data.shape[0]} data rows but {len(self.channels)} channel names"
            )
        if data.shape[1] < 1:
            raise DataModelError("recording must contain at least one sample")
        if not (self.fs > 0):
            raise DataModelError(f"sampling rate must be positive, got {self.fs}")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.fs


@dataclass(frozen=True)
class Provenance:
    master_seed: int
    config_hash: str


@dataclass(frozen=True)
class LabeledDataset:
    recordings: tuple[Recording, ...]
    provenance: Provenance

    def __post_init__(self):
        object.__setattr__(self, "recordings", tuple(self.recordings))

    def __len__(self) -> int:
        return len(self.recordings)

    def __iter__(self):
        return iter(self.recordings)

    def groups(self) -> list[str]:
        seen: dict[str, None] = {}
        for rec in self.recordings:
            seen.setdefault(rec.meta.group, None)
        return list(seen)

    def subject_ids(self) -> set[str]:
        return {rec.meta.subject_id for rec in self.recordings}


@dataclass
class ValidationReport:
    """Findings from `validate_dataset`; empty report means the dataset is valid."""

    nonfinite: list[tuple[str, str, int]] = field(default_factory=list)
    channel_mismatches: list[str] = field(default_factory=list)
    duplicate_ids: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.nonfinite or self.channel_mismatches or self.duplicate_ids)


def drop_channels(rec: Recording, names: list[str]) -> Recording:
    """Remove the named channels, preserving the order of the rest."""
    name_set = set(names)
    unknown = name_set - set(rec.channels)
    if unknown:
        raise DataModelError(f"unknown channel name(s): {sorted(unknown)}")
    keep = [i for i, ch in enumerate(rec.channels) if ch not in name_set]
    if not keep:
        raise DataModelError("cannot drop every channel")
    return replace(
        rec,
        channels=tuple(rec.channels[i] for i in keep),
        data=rec.data[keep].copy(),
    )


def split_by_group(ds: LabeledDataset, test_group: str) -> tuple[LabeledDataset, LabeledDataset]:
    """Partition a dataset by holding out one group as the test side.

    Raises if the group is unknown, if either side would be empty, or if any
    subject ends up on both sides (corrupt input).
    """
    groups = set(ds.groups())
    if test_group not in groups:
        raise DataModelError(f"unknown group {test_group!r}; have {sorted(groups)}")
    test = [r for r in ds.recordings if r.meta.group == test_group]
    train = [r for r in ds.recordings if r.meta.group != test_group]
    if not train or not test:
        raise DataModelError("split produced an empty train or test side")
    overlap = {r.meta.subject_id for r in train} & {r.meta.subject_id for r in test}
    if overlap:
        raise DataModelError(f"subject overlap across split: {sorted(overlap)}")
    return (
        LabeledDataset(tuple(train), ds.provenance),
        LabeledDataset(tuple(test), ds.provenance),
    )


def validate_dataset(ds: LabeledDataset) -> ValidationReport:
    """Scan for non-finite values, inconsistent channel lists, duplicate ids."""
    report = ValidationReport()

    seen_ids: set[str] = set()
    for rec in ds.recordings:
        if rec.id in seen_ids:
            report.duplicate_ids.append(rec.id)
        seen_ids.add(rec.id)
        bad = ~np.isfinite(rec.data)
        if bad.any():
            for ch_idx in np.nonzero(bad.any(axis=1))[0]:
                count = int(bad[ch_idx].sum())
                report.nonfinite.append((rec.id, rec.channels[ch_idx], count))

    layouts: dict[tuple[str, ...], list[str]] = {}
    for rec in ds.recordings:
        layouts.setdefault(rec.channels, []).append(rec.id)
    if len(layouts) > 1:
        top = max(len(ids) for ids in layouts.values())
        majority = [ids for ids in layouts.values() if len(ids) == top]
        flag_all = len(majority) > 1
        for ids in layouts.values():
            if flag_all or len(ids) < top:
                report.channel_mismatches.extend(ids)

    return report
