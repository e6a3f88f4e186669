"""Robust-scaling normalization benchmarks for multichannel EEG-style signals.

The library covers the full desk-scale pipeline: synthetic signal generation,
IIR preprocessing, median/IQR normalization at recording/window level and
cross/within-channel scope, small supervised and contrastive training tasks,
and a deterministic grid harness that renders mean +/- std tables.
"""

__version__ = "0.1.0"
