"""Signal-quality measures: SNR, SI-SDR, their alpha-balanced forms, TSNR/TSI-SDR.

All values are in dB. Infinite values are returned as ``math.inf`` /
``-math.inf`` (wrapped in :class:`MetricValue`) and only become the finite
``+-300`` dB sentinels when serialized, see :func:`clamp_db`.

Two different scalars are easy to confuse here. ``alpha_scale`` is the
optimal projection gain inside SI-SDR and is never exposed; ``alpha`` is the
public balancing parameter of the alpha-SNR / alpha-SI-SDR objectives.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateSignalError, ReverbSepError
from .signal import _check_rates, _same_length, as_array

SENTINEL_DB = 300.0

KINDS = ("SNR", "SI-SDR", "alpha-SNR", "alpha-SI-SDR", "TSNR", "TSI-SDR")


class MetricValue(float):
    """A float in dB that also remembers which metric produced it."""

    kind: str

    def __new__(cls, value_db, kind):
        if kind not in KINDS:
            raise ReverbSepError(f"unknown metric kind {kind!r}")
        obj = super().__new__(cls, value_db)
        obj.kind = kind
        return obj

    @property
    def value_db(self) -> float:
        return float(self)

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self)

    def __repr__(self):
        return f"MetricValue({float(self)!r}, {self.kind!r})"


def clamp_db(value: float, limit: float = SENTINEL_DB) -> float:
    """Map a dB value (possibly infinite) onto ``[-limit, limit]``."""
    return float(min(max(float(value), -limit), limit))


def _pair(estimate, target):
    _check_rates(estimate, target)
    est, tgt = as_array(estimate), as_array(target)
    _same_length(est, tgt)
    if tgt.size == 0:
        raise DegenerateSignalError("empty signals")
    return est, tgt


def _ratio_db(num: float, den: float) -> float:
    if den == 0.0:
        return math.inf if num > 0 else math.nan
    if num == 0.0:
        return -math.inf
    return 10.0 * math.log10(num / den)


def _target_energy(tgt):
    et = float(np.dot(tgt, tgt))
    if et <= 0.0:
        raise DegenerateSignalError("target has zero energy")
    return et


def snr(estimate, target) -> MetricValue:
    est, tgt = _pair(estimate, target)
    et = _target_energy(tgt)
    err = tgt - est
    return MetricValue(_ratio_db(et, float(np.dot(err, err))), "SNR")


def alpha_snr(estimate, target, alpha: float) -> MetricValue:
    """SNR with the error energy floored at ``alpha * energy(target)``."""
    if alpha < 0:
        raise ReverbSepError(f"alpha must be >= 0, got {alpha}")
    est, tgt = _pair(estimate, target)
    et = _target_energy(tgt)
    err = tgt - est
    den = float(np.dot(err, err))
    if alpha:
        den = den + alpha * et
    kind = "alpha-SNR"
    return MetricValue(_ratio_db(et, den), kind)


def _energies(est, tgt):
    et = _target_energy(tgt)
    ee = float(np.dot(est, est))
    if ee <= 0.0:
        raise DegenerateSignalError("estimate has zero energy")
    return et, ee


def si_sdr(estimate, target) -> MetricValue:
    """SI-SDR through the projection of the estimate onto the target."""
    est, tgt = _pair(estimate, target)
    et, _ = _energies(est, tgt)
    alpha_scale = float(np.dot(est, tgt)) / et
    projection = alpha_scale * tgt
    residual = est - projection
    return MetricValue(
        _ratio_db(float(np.dot(projection, projection)), float(np.dot(residual, residual))),
        "SI-SDR",
    )


def cosine_similarity(estimate, target) -> float:
    est, tgt = _pair(estimate, target)
    et, ee = _energies(est, tgt)
    c = float(np.dot(est, tgt)) / math.sqrt(et * ee)
    return min(max(c, -1.0), 1.0)


def _cosine_db(c2: float, alpha: float) -> float:
    den = 1.0 + alpha - c2
    if den <= 0.0:
        return math.inf
    return _ratio_db(c2, den)


def si_sdr_cosine_form(estimate, target) -> MetricValue:
    """SI-SDR written as ``10 log10(c^2 / (1 - c^2))`` of the cosine similarity."""
    c = cosine_similarity(estimate, target)
    return MetricValue(_cosine_db(c * c, 0.0), "SI-SDR")


def alpha_si_sdr(estimate, target, alpha: float) -> MetricValue:
    if alpha < 0:
        raise ReverbSepError(f"alpha must be >= 0, got {alpha}")
    c = cosine_similarity(estimate, target)
    return MetricValue(_cosine_db(c * c, alpha), "alpha-SI-SDR")


def _is_silent(x) -> bool:
    return not np.any(as_array(x))


def tsnr(mapping_output_on_direct, direct) -> MetricValue:
    """SNR of the mapped direct-path signal against the direct-path signal.

    A mapping that silences the direct path entirely counts as total
    distortion and yields ``-inf``.
    """
    if _is_silent(mapping_output_on_direct):
        _pair(mapping_output_on_direct, direct)
        return MetricValue(-math.inf, "TSNR")
    return MetricValue(snr(mapping_output_on_direct, direct), "TSNR")


def tsi_sdr(mapping_output_on_direct, direct) -> MetricValue:
    if _is_silent(mapping_output_on_direct):
        _pair(mapping_output_on_direct, direct)
        return MetricValue(-math.inf, "TSI-SDR")
    return MetricValue(si_sdr(mapping_output_on_direct, direct), "TSI-SDR")
