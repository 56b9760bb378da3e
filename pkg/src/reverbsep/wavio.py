"""WAV reading and writing (16-bit PCM and 32-bit float)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import ReverbSepError
from .signal import Waveform, as_array

PCM16_SCALE = 32768.0


def read_wav(path, channel: int | None = 0):
    """Read a WAV file into double precision.

    Args:
        path: file to read.
        channel: channel index to return as a :class:`Waveform`. ``None``
            returns ``(samples, sample_rate)`` with all channels, shaped
            ``(n_samples, n_channels)``.
    """
    rate, data = wavfile.read(str(path))
    if data.dtype == np.int16:
        data = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.int32:
        data = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        data = (data.astype(np.float64) - 128.0) / 128.0
    else:
        data = data.astype(np.float64)
    if data.ndim == 1:
        data = data[:, None]
    if channel is None:
        return data, int(rate)
    if not 0 <= channel < data.shape[1]:
        raise ReverbSepError(f"{path}: channel {channel} out of range ({data.shape[1]} channels)")
    return Waveform(data[:, channel], int(rate))


def write_wav(path, signal, sample_rate: int | None = None, subtype: str = "float32"):
    """Write a mono :class:`Waveform` / array, or a ``(n, channels)`` array.

    ``subtype`` is ``"float32"`` or ``"pcm16"``. PCM values are clipped to
    the representable range.
    """
    if isinstance(signal, Waveform):
        data = signal.samples
        sample_rate = signal.sample_rate if sample_rate is None else sample_rate
    else:
        data = np.asarray(signal, dtype=np.float64)
        if data.ndim == 1:
            data = as_array(data)
    if sample_rate is None:
        raise ReverbSepError("sample_rate is required when writing a bare array")
    if subtype == "float32":
        out = data.astype(np.float32)
    elif subtype == "pcm16":
        out = np.clip(np.round(data * PCM16_SCALE), -32768, 32767).astype(np.int16)
    else:
        raise ReverbSepError(f"unknown WAV subtype {subtype!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(str(path), int(sample_rate), out)
    return path
