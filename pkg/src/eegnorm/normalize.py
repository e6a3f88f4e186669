"""Robust median/IQR scaling, windowing, and degeneracy diagnostics.

Scaling subtracts the median and divides by the interquartile range, with the
statistics computed at one of two scopes:

* ``all`` (cross-channel): one (median, IQR) pair pooled over every channel
  and timepoint in scope, preserving relative channel amplitudes;
* ``channel`` (within-channel): one pair per channel, erasing per-channel
  scale but preserving each channel's temporal shape.

A scheme is applied either to a whole recording or to each fixed-length
window, giving the 3x3 plan grid (``none`` being the identity).  Channels
whose IQR collapses to ~0 would divide to NaN/inf; `DegeneracyPolicy` decides
whether that aborts, is patched and flagged, or propagates for downstream
collapse reporting.

Quantiles use linear interpolation between order statistics: with
``h = (n - 1) * q`` on the sorted values, the result interpolates between the
values at ``floor(h)`` and ``floor(h) + 1``.  Even-length medians are thus the
mean of the two central order statistics.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .data import Recording


class Scheme(enum.Enum):
    """Normalization scheme: identity, pooled statistics, per-channel statistics."""

    NONE = "none"
    ALL = "all"
    CHANNEL = "channel"

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(
                f"invalid scheme {text!r}: valid values are none|all|channel"
            ) from None

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, order=True)
class NormalizationPlan:
    """A (recording scheme, window scheme) pair; 9 possible values."""

    recording: Scheme
    window: Scheme

    @classmethod
    def parse(cls, text: str) -> "NormalizationPlan":
        parts = text.split(",")
        if len(parts) != 2:
            raise ValueError(
                f"invalid plan {text!r}: expected 'recording,window' with "
                "schemes none|all|channel"
            )
        return cls(Scheme.parse(parts[0]), Scheme.parse(parts[1]))

    def __str__(self) -> str:
        return f"{self.recording},{self.window}"


SCHEMES = (Scheme.NONE, Scheme.ALL, Scheme.CHANNEL)
ALL_PLANS: tuple[NormalizationPlan, ...] = tuple(
    NormalizationPlan(r, w) for r in SCHEMES for w in SCHEMES
)


class DegeneracyPolicy(enum.Enum):
    """What to do when an IQR in scope falls below the degeneracy threshold.

    ERROR aborts; FLAG_IDENTITY divides by 1 instead and flags the channel;
    PROPAGATE divides regardless, letting IEEE NaN/inf surface downstream.
    """

    ERROR = "error"
    FLAG_IDENTITY = "flag_identity"
    PROPAGATE = "propagate"

    @classmethod
    def parse(cls, text: str) -> "DegeneracyPolicy":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(
                f"invalid policy {text!r}: valid values are "
                "error|flag_identity|propagate"
            ) from None


class DegenerateScaleError(ValueError):
    """IQR below threshold under DegeneracyPolicy.ERROR."""


@dataclass(frozen=True)
class RobustStats:
    """Median and IQR at a given scope: scalars (pooled) or per-channel vectors."""

    scope: str  # "pooled" | "per_channel"
    median: np.ndarray
    iqr: np.ndarray


@dataclass(frozen=True)
class WindowTensor:
    """One C x S window with provenance and degenerate-channel flags."""

    data: np.ndarray
    recording_id: str
    offset_samples: int
    flags: frozenset[int] = frozenset()

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


def _interp_sorted(sorted_vals: np.ndarray, q: float) -> np.ndarray:
    """Interpolated quantile along the last axis of already-sorted values.

    Matches the midpoint-stable lerp used by mainstream numeric stacks so that
    cross-implementation comparisons agree to the last bit in common cases.
    """
    n = sorted_vals.shape[-1]
    h = (n - 1) * q
    lo = int(np.floor(h))
    if lo >= n - 1:
        return sorted_vals[..., n - 1]
    t = h - lo
    a = sorted_vals[..., lo]
    b = sorted_vals[..., lo + 1]
    if t < 0.5:
        return a + (b - a) * t
    return b - (b - a) * (1.0 - t)


def quantile(xs, q: float) -> float:
    """Linear-interpolation quantile of a 1-D collection.

    Requires a non-empty input and 0 <= q <= 1.  Non-finite inputs yield NaN
    (callers on strict paths validate finiteness up front).
    """
    xs = np.asarray(xs, dtype=np.float64).ravel()
    if xs.size == 0:
        raise ValueError("quantile of empty input")
    if not (0.0 <= q <= 1.0):
        raise ValueError(f"q must be in [0, 1], got {q}")
    if not np.isfinite(xs).all():
        return float("nan")
    return float(_interp_sorted(np.sort(xs), q))


def robust_stats(data: np.ndarray, scope: str) -> RobustStats:
    """Median and IQR of a C x S matrix, pooled or per channel.

    If any value is non-finite the statistics are NaN, mirroring the behavior
    of order statistics over an ill-defined multiset.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.size == 0:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {data.shape}")
    if scope == "pooled":
        flat = data.ravel()
        if not np.isfinite(flat).all():
            nan = np.float64(np.nan)
            return RobustStats("pooled", nan, nan)
        s = np.sort(flat)
        med = _interp_sorted(s, 0.5)
        iqr = _interp_sorted(s, 0.75) - _interp_sorted(s, 0.25)
        return RobustStats("pooled", np.float64(med), np.float64(iqr))
    if scope == "per_channel":
        med = np.empty(data.shape[0])
        iqr = np.empty(data.shape[0])
        finite_rows = np.isfinite(data).all(axis=1)
        if finite_rows.all():
            s = np.sort(data, axis=1)
            med[:] = _interp_sorted(s, 0.5)
            iqr[:] = _interp_sorted(s, 0.75) - _interp_sorted(s, 0.25)
        else:
            med[:] = np.nan
            iqr[:] = np.nan
            if finite_rows.any():
                s = np.sort(data[finite_rows], axis=1)
                med[finite_rows] = _interp_sorted(s, 0.5)
                iqr[finite_rows] = _interp_sorted(s, 0.75) - _interp_sorted(s, 0.25)
        return RobustStats("per_channel", med, iqr)
    raise ValueError(f"unknown scope {scope!r}")


def degeneracy_eps(median: np.ndarray) -> np.ndarray:
    """Relative IQR threshold: 1e-12 * max(1, |median|)."""
    return 1e-12 * np.maximum(1.0, np.abs(median))


def apply_scale(
    data: np.ndarray,
    stats: RobustStats,
    policy: DegeneracyPolicy = DegeneracyPolicy.FLAG_IDENTITY,
) -> tuple[np.ndarray, frozenset[int]]:
    """Scale `data` to (x - median) / IQR with scope-appropriate broadcasting.

    Returns the scaled matrix and the set of degenerate channel indices (all
    channels, if a pooled statistic is degenerate).
    """
    data = np.asarray(data, dtype=np.float64)
    n_channels = data.shape[0]
    if stats.scope == "per_channel":
        if stats.median.shape != (n_channels,):
            raise ValueError(
                f"per-channel stats for {stats.median.shape} channels "
                f"applied to {n_channels}-channel data"
            )
        degenerate = stats.iqr < degeneracy_eps(stats.median)
        flags = frozenset(int(i) for i in np.nonzero(degenerate)[0])
        if flags and policy is DegeneracyPolicy.ERROR:
            raise DegenerateScaleError(f"degenerate IQR on channel(s) {sorted(flags)}")
        iqr = stats.iqr
        if flags and policy is DegeneracyPolicy.FLAG_IDENTITY:
            iqr = np.where(degenerate, 1.0, iqr)
        med_b = stats.median[:, None]
        denom_b = iqr[:, None]
    else:
        degenerate = bool(stats.iqr < degeneracy_eps(stats.median))
        flags = frozenset(range(n_channels)) if degenerate else frozenset()
        if flags and policy is DegeneracyPolicy.ERROR:
            raise DegenerateScaleError("degenerate pooled IQR")
        med_b = stats.median
        denom_b = stats.iqr
        if degenerate and policy is DegeneracyPolicy.FLAG_IDENTITY:
            denom_b = np.float64(1.0)

    with np.errstate(divide="ignore", invalid="ignore"):
        out = (data - med_b) / denom_b
    return out, flags


def normalize(
    data: np.ndarray,
    scheme: Scheme,
    policy: DegeneracyPolicy = DegeneracyPolicy.FLAG_IDENTITY,
) -> tuple[np.ndarray, frozenset[int]]:
    """Apply one scheme to a C x S matrix; NONE is the identity."""
    data = np.asarray(data, dtype=np.float64)
    if scheme is Scheme.NONE:
        return data.copy(), frozenset()
    if policy is not DegeneracyPolicy.PROPAGATE and not np.isfinite(data).all():
        raise ValueError("non-finite input data (use PROPAGATE to pass it through)")
    scope = "pooled" if scheme is Scheme.ALL else "per_channel"
    return apply_scale(data, robust_stats(data, scope), policy)


def segment_windows(rec: Recording, window_len_s: float) -> list[WindowTensor]:
    """Cut a recording into non-overlapping windows; the remainder is dropped.

    A window longer than the recording yields an empty list, not an error.
    """
    span = window_len_s * rec.fs
    n_per = round(span)
    if n_per <= 0 or abs(span - n_per) > 1e-9:
        raise ValueError(
            f"window of {window_len_s} s at fs={rec.fs} is not a positive "
            f"integer number of samples ({span})"
        )
    count = rec.n_samples // n_per
    return [
        WindowTensor(
            data=rec.data[:, i * n_per : (i + 1) * n_per].copy(),
            recording_id=rec.id,
            offset_samples=i * n_per,
        )
        for i in range(count)
    ]


def apply_plan(
    rec: Recording,
    plan: NormalizationPlan,
    window_len_s: float,
    policy: DegeneracyPolicy = DegeneracyPolicy.FLAG_IDENTITY,
) -> list[WindowTensor]:
    """Recording-level normalize, then window, then window-level normalize.

    Degeneracy flags from both stages are accumulated on each window.
    """
    rec_data, rec_flags = normalize(rec.data, plan.recording, policy)
    scaled = Recording(rec.id, rec.channels, rec.fs, rec_data, rec.meta)
    windows = []
    for win in segment_windows(scaled, window_len_s):
        out, win_flags = normalize(win.data, plan.window, policy)
        windows.append(
            WindowTensor(
                data=out,
                recording_id=win.recording_id,
                offset_samples=win.offset_samples,
                flags=rec_flags | win_flags,
            )
        )
    return windows


@dataclass
class ProbeReport:
    """Degeneracy/non-finite census over a window set.

    `nonfinite` holds (recording_id, offset_samples, bad value count) per
    affected window; `degenerate` holds (recording_id, offset_samples,
    channel index) for every channel whose window-scope IQR is below the
    degeneracy threshold.
    """

    n_windows: int = 0
    nonfinite: list[tuple[str, int, int]] = field(default_factory=list)
    degenerate: list[tuple[str, int, int]] = field(default_factory=list)

    @property
    def n_nonfinite_windows(self) -> int:
        return len(self.nonfinite)

    @property
    def n_degenerate_hits(self) -> int:
        return len(self.degenerate)

    @property
    def affected_fraction(self) -> float:
        if self.n_windows == 0:
            return 0.0
        affected = {(r, o) for r, o, _ in self.nonfinite}
        affected |= {(r, o) for r, o, _ in self.degenerate}
        return len(affected) / self.n_windows

    @property
    def empty(self) -> bool:
        return not (self.nonfinite or self.degenerate)

    def summary(self) -> str:
        return (
            f"windows={self.n_windows} nonfinite={self.n_nonfinite_windows} "
            f"degenerate_hits={self.n_degenerate_hits} "
            f"affected={self.affected_fraction:.3f}"
        )


def degeneracy_probe(windows: list[WindowTensor]) -> ProbeReport:
    """Recompute window-scope diagnostics, independent of how windows were made."""
    report = ProbeReport(n_windows=len(windows))
    for win in windows:
        bad = ~np.isfinite(win.data)
        if bad.any():
            report.nonfinite.append(
                (win.recording_id, win.offset_samples, int(bad.sum()))
            )
            continue
        stats = robust_stats(win.data, "per_channel")
        for ch in np.nonzero(stats.iqr < degeneracy_eps(stats.median))[0]:
            report.degenerate.append((win.recording_id, win.offset_samples, int(ch)))
    return report
