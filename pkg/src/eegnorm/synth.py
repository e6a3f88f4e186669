"""Deterministic synthetic multichannel signal generator.

Each recording is built per channel as

    gain_c * (oscillation + pink noise + 60 Hz line + sparse bursts)

with a per-channel multiplicative gain ``exp(gain_spread * z_c)`` and one
exactly-zero reference channel named "Cz" appended at the end.  The planted
structure carries the labels:

* age shifts the oscillation frequency linearly (``base_freq + slope * age``);
* gender adds a frequency offset on a designated leading channel subset.

Encoding the labels in frequency rather than amplitude means within-channel
scaling (which erases per-channel amplitude) keeps the signal while removing
the gain confound.  Bursts have log-normal amplitudes, the heavy-tailed
contamination that motivates median/IQR over mean/std scaling.

Generation is a pure function of the generator parameters and master seed:
every subject's stream is seeded by hash(master_seed, subject_id), so output
is independent of generation order and worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import LabeledDataset, Provenance, Recording, SubjectMeta
from .util import rng_for, sha256_hex

PASSBAND = (0.1, 59.0)
REFERENCE_CHANNEL = "Cz"


@dataclass(frozen=True)
class SynthSpec:
    """Generator knobs; `n_channels` excludes the flat reference channel."""

    n_channels: int = 16
    duration_s: float = 60.0
    fs: float = 500.0
    age_range: tuple[float, float] = (5.0, 21.0)
    osc_amp: float = 10.0
    pink_alpha: float = 1.0
    pink_amp: float = 4.0
    line_amp: float = 20.0
    gain_spread: float = 0.0
    burst_rate: float = 2.0
    burst_amp: float = 60.0
    master_seed: int = 0

    def __post_init__(self):
        if self.n_channels < 1:
            raise ValueError("need at least one channel")
        if self.line_amp > 0 and self.fs <= 120.0:
            raise ValueError(f"fs={self.fs} cannot carry a 60 Hz line component")
        n = self.duration_s * self.fs
        if abs(n - round(n)) > 1e-9 or n < 1:
            raise ValueError(
                f"duration_s * fs must be a positive integer, got {n}"
            )
        if self.gain_spread < 0:
            raise ValueError("gain_spread must be >= 0")
        if not (self.age_range[0] <= self.age_range[1]):
            raise ValueError(f"bad age_range {self.age_range}")

    @property
    def n_samples(self) -> int:
        return round(self.duration_s * self.fs)


@dataclass(frozen=True)
class PlantedRule:
    """Label-to-frequency mapping for the planted oscillation.

    Subjects oscillate at ``base_freq + age_slope * age``; gender 1 adds
    ``gender_delta`` Hz on the first ``ceil(gender_channel_frac * C)``
    channels.  All resulting frequencies must lie strictly inside the
    0.1-59 Hz passband.
    """

    base_freq: float = 9.0
    age_slope: float = 0.05
    gender_delta: float = 4.0
    gender_channel_frac: float = 0.5

    def freq(self, age: float, gender: int, in_subset: bool) -> float:
        f = self.base_freq + self.age_slope * age
        if gender == 1 and in_subset:
            f += self.gender_delta
        return f

    def subset_size(self, n_channels: int) -> int:
        return int(np.ceil(self.gender_channel_frac * n_channels))


def gen_pink_noise(n: int, alpha: float, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean unit-RMS noise with a 1/f^alpha power spectrum.

    White Gaussian noise is shaped in the frequency domain by k^(-alpha/2);
    the DC bin is zeroed, which also removes the mean.  alpha=0 reduces to
    white noise.
    """
    if n < 2:
        raise ValueError("need at least 2 samples")
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    k = np.arange(spectrum.shape[0], dtype=np.float64)
    shape = np.zeros_like(k)
    shape[1:] = k[1:] ** (-alpha / 2.0)
    x = np.fft.irfft(spectrum * shape, n)
    rms = np.sqrt(np.mean(x**2))
    return x / rms if rms > 0 else x


def _bursts(n: int, fs: float, rate_per_min: float, amp: float, rng: np.random.Generator) -> np.ndarray:
    out = np.zeros(n)
    expected = rate_per_min * (n / fs) / 60.0
    count = rng.poisson(expected) if expected > 0 else 0
    t = np.arange(n) / fs
    for _ in range(count):
        center = rng.uniform(0.0, n / fs)
        width = 0.05  # seconds
        sign = 1.0 if rng.random() < 0.5 else -1.0
        magnitude = amp * np.exp(rng.standard_normal())
        out += sign * magnitude * np.exp(-0.5 * ((t - center) / width) ** 2)
    return out


def gen_recording(
    spec: SynthSpec,
    subject: SubjectMeta,
    rule: PlantedRule,
    rng: np.random.Generator,
) -> Recording:
    """One synthetic recording for a subject, plus the flat reference row."""
    n = spec.n_samples
    c = spec.n_channels
    subset = rule.subset_size(c)

    f_base = rule.freq(subject.age, 0, False)
    f_offset = f_base + rule.gender_delta
    for f in (f_base, f_offset):
        if not (PASSBAND[0] < f < PASSBAND[1]):
            raise ValueError(
                f"planted frequency {f:.3f} Hz outside passband {PASSBAND}"
            )

    t = np.arange(n) / spec.fs
    gains = np.exp(spec.gain_spread * rng.standard_normal(c))
    line_phase = rng.uniform(0.0, 2.0 * np.pi)
    line = (
        spec.line_amp * np.sin(2.0 * np.pi * 60.0 * t + line_phase)
        if spec.line_amp > 0
        else 0.0
    )

    data = np.zeros((c + 1, n))
    for ch in range(c):
        f = rule.freq(subject.age, subject.gender, ch < subset)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        sig = spec.osc_amp * np.sin(2.0 * np.pi * f * t + phase)
        if spec.pink_amp > 0:
            sig = sig + spec.pink_amp * gen_pink_noise(n, spec.pink_alpha, rng)
        sig = sig + line
        if spec.burst_rate > 0:
            sig = sig + _bursts(n, spec.fs, spec.burst_rate, spec.burst_amp, rng)
        data[ch] = gains[ch] * sig
    # data[c] stays exactly zero: the reference channel

    channels = tuple(f"e{i + 1:03d}" for i in range(c)) + (REFERENCE_CHANNEL,)
    return Recording(
        id=f"{subject.subject_id}-rest",
        channels=channels,
        fs=spec.fs,
        data=data,
        meta=subject,
    )


def spec_hash(spec: SynthSpec, rule: PlantedRule) -> str:
    return sha256_hex(f"{spec!r}|{rule!r}".encode())[:16]


def gen_dataset(
    spec: SynthSpec,
    n_subjects: int,
    n_groups: int,
    master_seed: int | None = None,
    rule: PlantedRule = PlantedRule(),
) -> LabeledDataset:
    """Generate `n_subjects` recordings assigned round-robin to `n_groups`.

    Ages are uniform over the spec range, genders Bernoulli(0.5).  Each
    subject's generator is seeded independently from the master seed, so the
    dataset is identical however generation is scheduled.
    """
    if n_subjects < n_groups:
        raise ValueError("need at least one subject per group")
    master = spec.master_seed if master_seed is None else master_seed
    recordings = []
    for i in range(n_subjects):
        sid = f"s{i:03d}"
        srng = rng_for(master, sid)
        meta = SubjectMeta(
            subject_id=sid,
            age=float(srng.uniform(*spec.age_range)),
            gender=int(srng.integers(0, 2)),
            group=f"g{i % n_groups + 1}",
        )
        rec = gen_recording(spec, meta, rule, rng_for(master, sid, "signal"))
        recordings.append(rec)
    prov = Provenance(master_seed=master, config_hash=spec_hash(spec, rule))
    return LabeledDataset(tuple(recordings), prov)


def desk_spec(**overrides) -> SynthSpec:
    """Default desk-scale generator: 16 channels + reference, 60 s at 500 Hz."""
    return replace(SynthSpec(), **overrides) if overrides else SynthSpec()


def dense_cap_spec(**overrides) -> SynthSpec:
    """Shape-test preset matching a 128-channel + reference high-density cap."""
    base = SynthSpec(n_channels=128, duration_s=4.0, master_seed=7)
    return replace(base, **overrides) if overrides else base
