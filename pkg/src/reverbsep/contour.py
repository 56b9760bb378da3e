"""Equal-valued contour exemplars for SNR (hyperballs) and SI-SDR (cones).

Given a reverberant target ``x = x_d + x_r``, these constructors return
estimates that score identically against ``x`` while preserving ``x_d`` to
very different degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSignalError, DimensionError
from .metrics import MetricValue, si_sdr, snr, tsi_sdr, tsnr
from .signal import _check_rates, _wrap, as_array

LABELS = ("direct_path", "rescaled_target", "reflected_reverb", "custom")


@dataclass(frozen=True, eq=False)
class ContourPoint:
    estimate: object
    label: str
    metric_value: MetricValue
    direct_quality: MetricValue


@dataclass(frozen=True, eq=False)
class ContourSet:
    kind: str
    target: np.ndarray
    direct: np.ndarray
    points: list = field(default_factory=list)
    # set when <direct, late> < 0, where the TSNR preference order may invert
    flagged: bool = False

    @property
    def values(self):
        return [float(p.metric_value) for p in self.points]

    def spread_db(self) -> float:
        v = self.values
        return max(v) - min(v)


def _inputs(direct, late):
    _check_rates(direct, late)
    d, r = as_array(direct), as_array(late)
    if d.shape != r.shape:
        raise DimensionError(f"direct and late lengths differ: {d.size} vs {r.size}")
    return d, r


def snr_contour_points(direct, late) -> ContourSet:
    """Three estimates on one SNR hyperball around ``x = direct + late``.

    The ball's radius is ``||late||``. Points: the direct path itself,
    ``s * x`` with ``s = 1 - ||late|| / ||x||``, and ``direct + 2 * late``.
    """
    d, r = _inputs(direct, late)
    er = float(np.dot(r, r))
    if er <= 0.0:
        raise DegenerateSignalError("late reverberation has zero energy: contour radius is 0")
    x = d + r
    s = 1.0 - math.sqrt(er) / math.sqrt(float(np.dot(x, x)))
    candidates = [
        (d, "direct_path"),
        (s * x, "rescaled_target"),
        (d + 2.0 * r, "reflected_reverb"),
    ]
    points = [
        ContourPoint(_wrap(direct, est), label, snr(est, x), tsnr(est, d))
        for est, label in candidates
    ]
    return ContourSet("SNR", x, d, points, flagged=bool(np.dot(d, r) < 0))


def _orthonormal_to(vectors, n, start=0):
    """First unit vector in the canonical basis, orthogonal to ``vectors``."""
    for k in range(start, n):
        e = np.zeros(n)
        e[k] = 1.0
        for v in vectors:
            e -= np.dot(e, v) * v
        norm = np.linalg.norm(e)
        if norm > 1e-6:
            return e / norm, k
    return None, n


def si_sdr_contour_points(direct, late, count: int = 2) -> ContourSet:
    """``count`` unit-norm estimates on the SI-SDR cone around ``x = direct + late``.

    The cone's half-angle is the angle between ``x`` and ``direct``. The first
    point is the direction of ``direct``, the second its mirror image about
    ``x`` within ``span{x, direct}``. Further points rotate out of that
    plane; in two dimensions they fall back to negated copies, which share
    the same squared cosine.
    """
    if count < 2:
        raise ValueError("count must be at least 2")
    d, r = _inputs(direct, late)
    if float(np.dot(r, r)) <= 0.0:
        raise DegenerateSignalError("late reverberation has zero energy")
    x = d + r
    u = x / np.linalg.norm(x)
    d_norm = np.linalg.norm(d)
    if d_norm == 0.0:
        raise DegenerateSignalError("direct path has zero energy")
    d_unit = d / d_norm
    cos_t = float(np.dot(d_unit, u))
    v = d_unit - cos_t * u
    v_norm = np.linalg.norm(v)
    if v_norm <= 1e-12:
        raise DegenerateSignalError("direct path is parallel to the target: cone angle is 0")
    v /= v_norm
    # more accurate than sqrt(1 - cos^2) when x_d is nearly parallel to x
    sin_t = float(v_norm)

    estimates = [(d_unit, "direct_path"), (cos_t * u - sin_t * v, "reflected_reverb")]
    w, _ = _orthonormal_to([u, v], x.size)
    extra = count - 2
    for k in range(extra):
        if w is None:
            base = estimates[k % 2][0]
            estimates.append((-base, "custom"))
            continue
        phi = math.pi * (k + 1) / (extra + 1)
        p = cos_t * u + sin_t * (math.cos(phi) * v + math.sin(phi) * w)
        estimates.append((p, "custom"))

    points = [
        ContourPoint(_wrap(direct, est), label, si_sdr(est, x), tsi_sdr(est, d))
        for est, label in estimates
    ]
    return ContourSet("SI-SDR", x, d, points, flagged=bool(np.dot(d, r) < 0))
