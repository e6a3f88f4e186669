"""Preprocessing filters: 60/120 Hz notches, 0.1-59 Hz bandpass, 2x decimation.

Filters are IIR biquads applied forward-backward (zero net phase).  The notch
comes from the standard audio-cookbook prescription; the bandpass is a
Butterworth design realized as second-order sections.  Stability (all poles
strictly inside the unit circle) is asserted at design time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as _signal

from .data import Recording


class FilterDesignError(ValueError):
    pass


@dataclass(frozen=True)
class BiquadSection:
    """One second-order section; a0 is normalized to 1."""

    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    def __post_init__(self):
        poles = np.roots([1.0, self.a1, self.a2])
        if poles.size and np.abs(poles).max() >= 1.0:
            raise FilterDesignError(
                f"unstable section, pole radius {np.abs(poles).max():.6f}"
            )

    def coeffs(self) -> tuple[float, float, float, float, float, float]:
        return (self.b0, self.b1, self.b2, 1.0, self.a1, self.a2)


@dataclass(frozen=True)
class SosChain:
    sections: tuple[BiquadSection, ...]

    def __post_init__(self):
        if not self.sections:
            raise FilterDesignError("empty section chain")

    @property
    def order(self) -> int:
        return 2 * len(self.sections)

    def as_sos(self) -> np.ndarray:
        return np.array([s.coeffs() for s in self.sections], dtype=np.float64)

    def __add__(self, other: "SosChain") -> "SosChain":
        return SosChain(self.sections + other.sections)


IDENTITY_SECTION = BiquadSection(1.0, 0.0, 0.0, 0.0, 0.0)


def design_notch(f0: float, fs: float, q: float = 30.0) -> BiquadSection:
    """Unit-gain notch at f0.

    The transfer function is exactly zero at f0 and has unit gain at DC and
    Nyquist; q sets the -3 dB bandwidth to f0/q.
    """
    if not (0.0 < f0 < fs / 2.0):
        raise FilterDesignError(f"notch frequency {f0} outside (0, fs/2) for fs={fs}")
    if q <= 0:
        raise FilterDesignError(f"q must be positive, got {q}")
    w0 = 2.0 * math.pi * f0 / fs
    cos_w0 = math.cos(w0)
    alpha = math.sin(w0) / (2.0 * q)
    a0 = 1.0 + alpha
    return BiquadSection(
        b0=1.0 / a0,
        b1=-2.0 * cos_w0 / a0,
        b2=1.0 / a0,
        a1=-2.0 * cos_w0 / a0,
        a2=(1.0 - alpha) / a0,
    )


def design_bandpass(low: float, high: float, fs: float, order: int = 4) -> SosChain:
    """Butterworth bandpass as cascaded second-order sections.

    `order` is the total pole count of the bandpass and must be even; the
    underlying lowpass prototype has order/2 poles.
    """
    if not (0.0 < low < high < fs / 2.0):
        raise FilterDesignError(
            f"band edges must satisfy 0 < low < high < fs/2, got ({low}, {high}) at fs={fs}"
        )
    if order < 2 or order % 2 != 0:
        raise FilterDesignError(f"order must be an even count >= 2, got {order}")
    sos = _signal.butter(order // 2, [low, high], btype="bandpass", fs=fs, output="sos")
    sections = []
    for b0, b1, b2, a0, a1, a2 in sos:
        sections.append(BiquadSection(b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0))
    return SosChain(tuple(sections))


def chain_gain(chain: SosChain | BiquadSection, f: float, fs: float) -> float:
    """|H| of a section or chain at frequency f, from the coefficients."""
    sections = chain.sections if isinstance(chain, SosChain) else (chain,)
    z = np.exp(2j * math.pi * f / fs)
    h = 1.0 + 0.0j
    for s in sections:
        num = s.b0 + s.b1 / z + s.b2 / z**2
        den = 1.0 + s.a1 / z + s.a2 / z**2
        h *= num / den
    return float(abs(h))


def filt_fb(chain: SosChain, x: np.ndarray) -> np.ndarray:
    """Zero-phase filtering: forward pass, then a time-reversed pass.

    The input is reflect-padded by 3x the chain order on both ends before
    filtering and trimmed afterwards, so startup transients land in the
    padding rather than the signal.
    """
    x = np.asarray(x, dtype=np.float64)
    pad = 3 * chain.order
    if x.shape[-1] <= pad:
        raise ValueError(
            f"input too short: need more than {pad} samples for a chain of order "
            f"{chain.order}, got {x.shape[-1]}"
        )
    left = x[..., pad:0:-1]
    right = x[..., -2 : -2 - pad : -1]
    ext = np.concatenate([left, x, right], axis=-1)
    sos = chain.as_sos()
    y = _signal.sosfilt(sos, ext, axis=-1)
    y = _signal.sosfilt(sos, y[..., ::-1], axis=-1)[..., ::-1]
    return np.ascontiguousarray(y[..., pad : pad + x.shape[-1]])


def decimate2(x: np.ndarray) -> np.ndarray:
    """Keep every second sample: out[i] = x[2i], length floor(len/2).

    Assumes the input is already band-limited below fs/4 (the 59 Hz bandpass
    guarantees this at fs=500).
    """
    x = np.asarray(x)
    n_out = x.shape[-1] // 2
    return x[..., : 2 * n_out : 2].copy()


def preprocess_chain(fs: float, notch_hz=(60.0, 120.0), band=(0.1, 59.0), order: int = 4) -> SosChain:
    sections: tuple[BiquadSection, ...] = tuple(design_notch(f, fs) for f in notch_hz)
    return SosChain(sections) + design_bandpass(band[0], band[1], fs, order)


def preprocess(rec: Recording) -> Recording:
    """Notch 60 and 120 Hz, bandpass 0.1-59 Hz, then decimate 500 -> 250 Hz.

    Only fs=500 input is supported; the fixed factor-2 decimation yields
    fs=250 with floor(N/2) samples and an unchanged channel count.
    """
    if rec.fs != 500.0:
        raise ValueError(f"unsupported input rate {rec.fs}; preprocess expects 500 Hz")
    chain = preprocess_chain(rec.fs)
    filtered = filt_fb(chain, rec.data)
    out = decimate2(filtered)
    return Recording(
        id=rec.id, channels=rec.channels, fs=rec.fs / 2.0, data=out, meta=rec.meta
    )
