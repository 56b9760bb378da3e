"""Separation objectives, the auxiliary-autoencoding (A2T) composite, and gradients.

Losses follow the minimisation convention: each pair contributes the
negated metric in dB, clamped to ``[-300, 300]``. Per-source terms are
summed.

For A2T the caller supplies the linear mapping applied to every direct-path
target as a ``C x C`` grid, ``mapped_directs[i][j] = T_i(x_d^(j))``, the
output of the i-th separator branch fed with the j-th direct-path signal.
The permutation found on the separation term selects which cells enter the
preservation term.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ArityError,
    ComplexityError,
    DegenerateSignalError,
    DimensionError,
    GradientUndefinedError,
    ReverbSepError,
)
from .metrics import SENTINEL_DB
from .signal import as_array

LN10 = math.log(10.0)
DB = 10.0 / LN10
MAX_SOURCES = 8
BASE_METRICS = ("SNR", "SI-SDR")


@dataclass(frozen=True)
class LossConfig:
    base_metric: str = "SNR"
    use_a2t: bool = False
    alpha: float = 0.0
    pit: bool = True

    def __post_init__(self):
        metric = {"snr": "SNR", "sisdr": "SI-SDR", "si-sdr": "SI-SDR"}.get(
            str(self.base_metric).lower(), self.base_metric
        )
        if metric not in BASE_METRICS:
            raise ReverbSepError(f"base_metric must be one of {BASE_METRICS}, got {self.base_metric!r}")
        object.__setattr__(self, "base_metric", metric)
        if self.alpha < 0:
            raise ReverbSepError(f"alpha must be >= 0, got {self.alpha}")

    @property
    def preservation_alpha(self) -> float:
        return float(self.alpha) if self.use_a2t else 0.0


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    separation_term: float
    preservation_term: float
    chosen_permutation: tuple


# ---------------------------------------------------------------------------
# scalar kernels shared by the waveform path and the Gram-statistics path


def pair_loss_from_stats(metric, alpha, target_energy, cross, est_energy, err_energy):
    """Clamped negated metric and its partials from four sufficient statistics.

    Args:
        metric: ``"SNR"`` or ``"SI-SDR"`` (the alpha-balanced form is used
            whenever ``alpha > 0``).
        target_energy: ``<x, x>``.
        cross: ``<x_hat, x>``.
        est_energy: ``<x_hat, x_hat>``.
        err_energy: ``<x - x_hat, x - x_hat>``.

    Returns:
        ``(loss, d_cross, d_est_energy, d_err_energy, raw_metric_db)``. Partials
        are zero where the clamp is active.
    """
    if not all(map(math.isfinite, (target_energy, cross, est_energy, err_energy))):
        # overflowed statistics, e.g. from a diverging optimiser
        return math.nan, 0.0, 0.0, 0.0, math.nan
    if metric == "SNR":
        den = err_energy + alpha * target_energy
        if den <= 0.0:
            return -SENTINEL_DB, 0.0, 0.0, 0.0, math.inf
        value = 10.0 * math.log10(target_energy / den)
        d = (0.0, 0.0, DB / den)
    else:
        if est_energy <= 0.0 or cross == 0.0:
            return SENTINEL_DB, 0.0, 0.0, 0.0, -math.inf
        c2 = cross * cross / (target_energy * est_energy)
        den = 1.0 + alpha - c2
        if den <= 0.0:
            return -SENTINEL_DB, 0.0, 0.0, 0.0, math.inf
        value = 10.0 * math.log10(c2 / den)
        dloss_dc2 = -DB * (1.0 / c2 + 1.0 / den)
        d = (
            dloss_dc2 * 2.0 * cross / (target_energy * est_energy),
            -dloss_dc2 * c2 / est_energy,
            0.0,
        )
    if value >= SENTINEL_DB:
        return -SENTINEL_DB, 0.0, 0.0, 0.0, value
    if value <= -SENTINEL_DB:
        return SENTINEL_DB, 0.0, 0.0, 0.0, value
    return -value, d[0], d[1], d[2], value


def _stats(metric, estimate, target):
    x_hat, x = as_array(estimate), as_array(target)
    if x_hat.shape != x.shape:
        raise DimensionError(f"length mismatch: {x_hat.shape[0]} vs {x.shape[0]}")
    target_energy = float(np.dot(x, x))
    if target_energy <= 0.0:
        raise DegenerateSignalError("target has zero energy")
    if metric == "SNR":
        err = x - x_hat
        return x_hat, x, err, (target_energy, 0.0, 0.0, float(np.dot(err, err)))
    return x_hat, x, None, (target_energy, float(np.dot(x_hat, x)), float(np.dot(x_hat, x_hat)), 0.0)


def _pair_value(metric, alpha, estimate, target):
    """Clamped negated metric of one pair. A silent estimate scores SI-SDR ``-inf``."""
    return pair_loss_from_stats(metric, alpha, *_stats(metric, estimate, target)[3])[0]


def _pair_grad(metric, alpha, estimate, target):
    """Loss of one pair and its gradient with respect to ``estimate``."""
    x_hat, x, err, stats = _stats(metric, estimate, target)
    loss, d_cross, d_est, d_err, raw = pair_loss_from_stats(metric, alpha, *stats)
    if math.isinf(raw):
        raise GradientUndefinedError(f"{metric} is infinite for this pair; gradient undefined")
    if metric == "SNR":
        return loss, -2.0 * d_err * err
    return loss, d_cross * x + 2.0 * d_est * x_hat


# ---------------------------------------------------------------------------
# PIT


def best_permutation(cost: np.ndarray):
    """Exhaustive assignment minimising ``sum_i cost[i, perm[i]]``.

    Permutations are scanned in lexicographic order and only a strictly
    smaller total replaces the incumbent, so ties go to the lexicographically
    lowest permutation.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n = cost.shape[0]
    if cost.shape != (n, n):
        raise ArityError(f"cost matrix must be square, got {cost.shape}")
    if n > MAX_SOURCES:
        raise ComplexityError(f"exhaustive PIT supports at most {MAX_SOURCES} sources, got {n}")
    rows = cost.tolist()
    best, best_total = None, math.inf
    for perm in itertools.permutations(range(n)):
        total = math.fsum(rows[i][p] for i, p in enumerate(perm))
        if total < best_total:
            best, best_total = perm, total
    if best is None:
        # every total is NaN; report it instead of inventing an optimum
        return tuple(range(n)), math.nan
    return tuple(int(p) for p in best), best_total


def _check_lists(estimates, targets):
    if len(estimates) != len(targets):
        raise ArityError(f"{len(estimates)} estimates vs {len(targets)} targets")
    if len(estimates) == 0:
        raise ArityError("need at least one source")
    if len(estimates) > MAX_SOURCES:
        raise ComplexityError(f"at most {MAX_SOURCES} sources are supported, got {len(estimates)}")
    n = {len(as_array(s)) for s in [*estimates, *targets]}
    if len(n) != 1:
        raise DimensionError(f"all signals must share one length, got {sorted(n)}")


def _check_grid(mapped_directs, directs, n_src):
    if len(directs) != n_src:
        raise ArityError(f"{len(directs)} direct-path targets for {n_src} sources")
    if len(mapped_directs) != n_src or any(len(row) != n_src for row in mapped_directs):
        raise ArityError(f"mapped_directs must be a {n_src}x{n_src} grid")


def _separation_matrix(estimates, targets, metric):
    n = len(estimates)
    return np.array([[_pair_value(metric, 0.0, estimates[i], targets[j]) for j in range(n)] for i in range(n)])


def _choose(cost, pit):
    if pit:
        return best_permutation(cost)
    perm = tuple(range(cost.shape[0]))
    return perm, math.fsum(cost[i, i] for i in perm)


def separation_loss(estimates, targets, cfg: LossConfig) -> LossBreakdown:
    """Summed negated base metric under the identity or PIT-optimal pairing.

    ``chosen_permutation[i]`` is the target index assigned to estimate ``i``.
    """
    _check_lists(estimates, targets)
    cost = _separation_matrix(estimates, targets, cfg.base_metric)
    perm, total = _choose(cost, cfg.pit)
    return LossBreakdown(total, total, 0.0, perm)


def a2t_loss(mixture_estimates, targets, mapped_directs, directs, cfg: LossConfig) -> LossBreakdown:
    """Separation term plus the alpha-balanced direct-path preservation term.

    The preservation pairing reuses the permutation chosen on the
    separation term; it is never optimised on its own.
    """
    _check_lists(mixture_estimates, targets)
    if not cfg.use_a2t:
        return separation_loss(mixture_estimates, targets, cfg)
    n = len(targets)
    _check_grid(mapped_directs, directs, n)
    cost = _separation_matrix(mixture_estimates, targets, cfg.base_metric)
    perm, total = _choose(cost, cfg.pit)
    sep = LossBreakdown(total, total, 0.0, perm)
    alpha = cfg.preservation_alpha
    pres = 0.0
    for i, j in enumerate(sep.chosen_permutation):
        pres += _pair_value(cfg.base_metric, alpha, mapped_directs[i][j], directs[j])
    return LossBreakdown(sep.separation_term + pres, sep.separation_term, pres, sep.chosen_permutation)


@dataclass(frozen=True)
class LossGradient:
    breakdown: LossBreakdown
    estimates: list
    mapped_directs: list | None = None


def loss_gradient(estimates, targets, cfg: LossConfig, mapped_directs=None, directs=None) -> LossGradient:
    """Analytic gradient of the configured loss w.r.t. every input estimate.

    The PIT permutation is held fixed at its current optimum. With A2T on,
    gradients are also returned for each cell of ``mapped_directs``; cells not
    selected by the permutation get zeros.

    Raises:
        GradientUndefinedError: some pair's metric is infinite.
    """
    use_a2t = cfg.use_a2t and mapped_directs is not None
    if use_a2t:
        breakdown = a2t_loss(estimates, targets, mapped_directs, directs, cfg)
    else:
        breakdown = separation_loss(estimates, targets, cfg)
    perm = breakdown.chosen_permutation
    metric = cfg.base_metric
    est_grads = []
    for i, j in enumerate(perm):
        _, g = _pair_grad(metric, 0.0, estimates[i], targets[j])
        est_grads.append(g)
    map_grads = None
    if use_a2t:
        n = len(targets)
        length = as_array(directs[0]).shape[0]
        map_grads = [[np.zeros(length) for _ in range(n)] for _ in range(n)]
        for i, j in enumerate(perm):
            _, g = _pair_grad(metric, cfg.preservation_alpha, mapped_directs[i][j], directs[j])
            map_grads[i][j] = g
    return LossGradient(breakdown, est_grads, map_grads)
