"""Sampled-signal type and the vector/convolution primitives.

Every function accepts either a :class:`Waveform` or a plain 1-D array-like.
Functions that produce a signal return a ``Waveform`` when their first
argument is one, and a float64 ``ndarray`` otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import (
    DegenerateSignalError,
    DimensionError,
    PlacementError,
    SampleRateError,
)

DEFAULT_SAMPLE_RATE = 16000
# Filters at least this long are convolved through the FFT.
DIRECT_CONV_MAX_TAPS = 512


@dataclass(frozen=True, eq=False)
class Waveform:
    """Immutable mono signal in double precision."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64).reshape(-1)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise SampleRateError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.samples if dtype is None else self.samples.astype(dtype)

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples) -> "Waveform":
        return Waveform(samples, self.sample_rate)


def as_array(x) -> np.ndarray:
    """Return the samples of ``x`` as a 1-D float64 array (no copy if possible)."""
    if isinstance(x, Waveform):
        return x.samples
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"expected a 1-D signal, got shape {arr.shape}")
    return arr


def _check_rates(*signals):
    rates = {s.sample_rate for s in signals if isinstance(s, Waveform)}
    if len(rates) > 1:
        raise SampleRateError(f"sample rates differ: {sorted(rates)}")


def _wrap(like, samples):
    if isinstance(like, Waveform):
        return Waveform(samples, like.sample_rate)
    return samples


def _same_length(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")


def dot(a, b) -> float:
    _check_rates(a, b)
    a, b = as_array(a), as_array(b)
    _same_length(a, b)
    return float(np.dot(a, b))


def energy(a) -> float:
    a = as_array(a)
    return float(np.dot(a, a))


def convolve_full(signal, filt):
    """Linear (full) convolution, length ``len(signal) + len(filt) - 1``.

    Short filters use direct summation; longer ones go through the FFT.
    """
    _check_rates(signal, filt)
    s, h = as_array(signal), as_array(filt)
    if s.size == 0 or h.size == 0:
        raise DimensionError("convolution operands must be non-empty")
    if min(s.size, h.size) < DIRECT_CONV_MAX_TAPS:
        out = np.convolve(s, h)
    else:
        out = fftconvolve(s, h)
    return _wrap(signal, out)


def shift(a, offset: int, total_len: int):
    """Place ``a`` at ``offset`` inside a zero buffer of ``total_len`` samples."""
    x = as_array(a)
    offset, total_len = int(offset), int(total_len)
    if offset < 0 or offset + x.size > total_len:
        raise PlacementError(
            f"cannot place {x.size} samples at offset {offset} in a buffer of {total_len}"
        )
    out = np.zeros(total_len)
    out[offset:offset + x.size] = x
    return _wrap(a, out)


def relative_snr_db(target, reference) -> float:
    """``10 log10(energy(reference) / energy(target))``."""
    et, er = energy(target), energy(reference)
    if et <= 0 or er <= 0:
        raise DegenerateSignalError("relative SNR needs two signals with positive energy")
    return 10.0 * np.log10(er / et)


def rescale_to_relative_snr(target, reference, snr_db: float):
    """Scale ``target`` so that reference-to-target energy ratio is ``snr_db``."""
    _check_rates(target, reference)
    et, er = energy(target), energy(reference)
    if et <= 0 or er <= 0:
        raise DegenerateSignalError("cannot rescale against a zero-energy signal")
    gain = np.sqrt(er / (et * 10.0 ** (snr_db / 10.0)))
    return _wrap(target, gain * as_array(target))
