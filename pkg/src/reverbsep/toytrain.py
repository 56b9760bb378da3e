"""Desk-scale gradient-descent training of a linear FIR separator.

The separator holds one FIR filter per output and applies it to the
mixture with centred "same" convolution, so it is exactly linear in its
input. That makes the auxiliary autoencoding term ``T(x_d)`` exact: it is
the same filter applied to the direct-path target.

Because every loss here is a function of inner products between filter
outputs and targets, each utterance is summarised once by Gram statistics
(``Y^T Y``, ``Y^T x`` and friends, with ``Y`` the convolution matrix of the
input). A training step then costs ``O(C^2 L^2)`` per utterance and gives
the same loss and gradient as running the convolutions in the time domain;
see :func:`time_domain_loss_and_grad` for that reference path.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, ReverbSepError, TrainingDivergenceError
from .losses import LossConfig, a2t_loss, best_permutation, loss_gradient, pair_loss_from_stats
from .metrics import SENTINEL_DB, clamp_db, si_sdr, snr, tsi_sdr, tsnr
from .mixsim import OVERLAP_BUCKETS
from .signal import _wrap, as_array

METRIC_COLUMNS = ("SNR", "TSNR", "SI-SDR", "TSI-SDR")
INITS = ("small_random", "identity_plus_noise")


@dataclass
class LinearSeparator:
    filters: np.ndarray

    def __post_init__(self):
        self.filters = np.array(self.filters, dtype=np.float64)
        if self.filters.ndim != 2 or self.filters.shape[1] == 0:
            raise DimensionError("filters must be shaped (n_sources, filter_length)")

    @property
    def n_sources(self) -> int:
        return self.filters.shape[0]

    @property
    def filter_length(self) -> int:
        return self.filters.shape[1]

    @property
    def center(self) -> int:
        return (self.filter_length - 1) // 2

    @classmethod
    def init(cls, n_sources=2, filter_length=64, kind="small_random", seed=0):
        rng = np.random.default_rng(seed)
        if kind == "small_random":
            filters = rng.uniform(-0.01, 0.01, size=(n_sources, filter_length))
        elif kind == "identity_plus_noise":
            filters = rng.uniform(-0.01, 0.01, size=(n_sources, filter_length))
            filters[:, (filter_length - 1) // 2] += 1.0
        else:
            raise ReverbSepError(f"unknown init {kind!r}; expected one of {INITS}")
        return cls(filters)

    @classmethod
    def identity(cls, n_sources=2, filter_length=64):
        filters = np.zeros((n_sources, filter_length))
        filters[:, (filter_length - 1) // 2] = 1.0
        return cls(filters)

    def copy(self):
        return LinearSeparator(self.filters.copy())

    def to_json(self):
        return [row.tolist() for row in self.filters]

    @classmethod
    def from_json(cls, rows):
        return cls(np.asarray(rows, dtype=np.float64))


def _apply(h, x, center):
    return np.convolve(x, h)[center:center + x.size]


def forward(model: LinearSeparator, signal):
    """One output per filter, each the same length as ``signal``."""
    x = as_array(signal)
    if x.size < model.filter_length:
        raise DimensionError(f"input of {x.size} samples is shorter than the {model.filter_length}-tap filters")
    return [_wrap(signal, _apply(h, x, model.center)) for h in model.filters]


def filter_gradient(signal, output_grad, filter_length):
    """Back-propagate an output gradient to the taps: ``g_h[m] = sum_n g[n] x[n + c - m]``."""
    return conv_matrix(as_array(signal), filter_length).T @ as_array(output_grad)


def conv_matrix(x: np.ndarray, filter_length: int) -> np.ndarray:
    """``(len(x), L)`` read-only view ``Y`` with ``forward == Y @ h``."""
    center = (filter_length - 1) // 2
    padded = np.concatenate([np.zeros(filter_length - 1 - center), x, np.zeros(center)])
    return sliding_window_view(padded, filter_length)[:, ::-1]


def check_linearity(model: LinearSeparator, length=None, seed=0, rtol=1e-12):
    rng = np.random.default_rng(seed)
    n = length or 4 * model.filter_length
    a, b = rng.standard_normal(n), rng.standard_normal(n)
    for sa, sb, sab in zip(forward(model, a), forward(model, b), forward(model, a + b)):
        scale = max(np.max(np.abs(sab)), 1e-300)
        if np.max(np.abs(sa + sb - sab)) > rtol * scale:
            raise ReverbSepError("separator is not linear")
    return True


# ---------------------------------------------------------------------------
# Gram statistics


@dataclass
class GramStats:
    """Per-utterance sufficient statistics for filter length ``L``."""

    mix_gram: np.ndarray        # (L, L)   Y^T Y
    mix_cross: np.ndarray       # (C, L)   Y^T x_j
    target_energy: np.ndarray   # (C,)
    direct_gram: np.ndarray     # (C, L, L) D_j^T D_j
    direct_cross: np.ndarray    # (C, L)   D_j^T x_d^(j)
    direct_energy: np.ndarray   # (C,)
    bucket: str = ""

    @classmethod
    def from_instance(cls, inst, filter_length):
        y = as_array(inst.mixture)
        Y = np.ascontiguousarray(conv_matrix(y, filter_length))
        targets = [as_array(t) for t in inst.reverberant_targets]
        directs = [as_array(d) for d in inst.direct_targets]
        d_mats = [np.ascontiguousarray(conv_matrix(d, filter_length)) for d in directs]
        return cls(
            mix_gram=Y.T @ Y,
            mix_cross=np.stack([Y.T @ t for t in targets]),
            target_energy=np.array([t @ t for t in targets]),
            direct_gram=np.stack([D.T @ D for D in d_mats]),
            direct_cross=np.stack([D.T @ d for D, d in zip(d_mats, directs)]),
            direct_energy=np.array([d @ d for d in directs]),
            bucket=inst.overlap_bucket,
        )


def _stat_pair(metric, alpha, h, gram, cross_vec, e_t):
    gh = gram @ h
    cross = float(h @ cross_vec)
    e_est = float(h @ gh)
    e_err = e_t - 2.0 * cross + e_est
    loss, d_cross, d_est, d_err, raw = pair_loss_from_stats(metric, alpha, e_t, cross, e_est, e_err)
    grad = d_cross * cross_vec + 2.0 * d_est * gh + 2.0 * d_err * (gh - cross_vec)
    return loss, grad, raw


def gram_loss_and_grad(model: LinearSeparator, stats: GramStats, cfg: LossConfig):
    """Loss breakdown and tap gradient for one utterance from its statistics.

    Returns:
        ``(total, separation, preservation, permutation, grad, preservation_pairs)``.
    """
    h = model.filters
    n = model.n_sources
    metric = cfg.base_metric
    pair = {}
    cost = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            pair[i, j] = _stat_pair(metric, 0.0, h[i], stats.mix_gram, stats.mix_cross[j], stats.target_energy[j])
            cost[i, j] = pair[i, j][0]
    if cfg.pit:
        perm, sep = best_permutation(cost)
    else:
        perm = tuple(range(n))
        sep = float(cost[np.arange(n), perm].sum())
    grad = np.zeros_like(h)
    for i, j in enumerate(perm):
        grad[i] += pair[i, j][1]
    pres = 0.0
    pres_pairs = []
    if cfg.use_a2t:
        alpha = cfg.preservation_alpha
        for i, j in enumerate(perm):
            loss, g, _ = _stat_pair(
                metric, alpha, h[i], stats.direct_gram[j], stats.direct_cross[j], stats.direct_energy[j]
            )
            pres += loss
            pres_pairs.append(loss)
            grad[i] += g
    return sep + pres, sep, pres, perm, grad, pres_pairs


def time_domain_loss_and_grad(model: LinearSeparator, inst, cfg: LossConfig):
    """Reference path: run the filters, evaluate the loss, back-propagate by correlation."""
    estimates = forward(model, inst.mixture)
    targets = list(inst.reverberant_targets)
    mapped = directs = None
    if cfg.use_a2t:
        directs = list(inst.direct_targets)
        per_filter = [forward(model, d) for d in directs]  # per_filter[j][i] = T_i(x_d^(j))
        mapped = [[per_filter[j][i] for j in range(len(directs))] for i in range(model.n_sources)]
    lg = loss_gradient(estimates, targets, cfg, mapped, directs)
    L = model.filter_length
    grad = np.zeros_like(model.filters)
    for i in range(model.n_sources):
        grad[i] += filter_gradient(inst.mixture, lg.estimates[i], L)
        if mapped is not None:
            for j in range(len(directs)):
                if np.any(lg.mapped_directs[i][j]):
                    grad[i] += filter_gradient(directs[j], lg.mapped_directs[i][j], L)
    return lg.breakdown, grad


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    loss: LossConfig = field(default_factory=LossConfig)
    learning_rate: float = 1e-3
    epochs: int = 200
    grad_clip_l2: float = 5.0
    batch_size: int = 8
    init: str = "small_random"
    filter_length: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.grad_clip_l2 <= 0:
            raise ReverbSepError("grad_clip_l2 must be positive")
        if self.batch_size < 1 or self.epochs < 0:
            raise ReverbSepError("batch_size must be >= 1 and epochs >= 0")
        if self.init not in INITS:
            raise ReverbSepError(f"unknown init {self.init!r}")


@dataclass
class TrainReport:
    trace: list
    table: dict
    model: LinearSeparator | None = None
    rows: list = field(default_factory=list)


def clip_global_norm(grad: np.ndarray, max_norm: float):
    """Scale ``grad`` so its L2 norm is at most ``max_norm``; returns ``(grad, pre_clip_norm)``."""
    norm = float(np.sqrt(np.sum(grad * grad)))
    if norm > max_norm:
        grad = grad * (max_norm / norm)
    return grad, norm


def train(model: LinearSeparator, dataset, cfg: TrainConfig, stats=None, evaluate_after=True) -> TrainReport:
    """Plain mini-batch gradient descent on ``model`` (updated in place).

    The batch loss is the mean over utterances of the per-utterance loss,
    which itself sums over sources. Gradients are clipped to a global L2 norm
    of ``cfg.grad_clip_l2`` before each step.

    Raises:
        TrainingDivergenceError: the loss or gradient became non-finite.
    """
    if len(dataset) == 0:
        raise ReverbSepError("cannot train on an empty dataset")
    if stats is None:
        stats = [GramStats.from_instance(inst, model.filter_length) for inst in dataset]
    check_linearity(model)
    rng = np.random.default_rng(cfg.seed)
    n = len(stats)
    trace = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        sums = np.zeros(3)
        pres_min = math.inf
        max_clipped = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            grad = np.zeros_like(model.filters)
            for k in batch:
                total, sep, pres, _, g, pres_pairs = gram_loss_and_grad(model, stats[k], cfg.loss)
                grad += g
                sums += (total, sep, pres)
                if pres_pairs:
                    pres_min = min(pres_min, min(pres_pairs))
            grad /= len(batch)
            if not (np.all(np.isfinite(grad)) and np.isfinite(sums[0])):
                raise TrainingDivergenceError(f"non-finite loss or gradient at epoch {epoch}", epoch=epoch)
            grad, _ = clip_global_norm(grad, cfg.grad_clip_l2)
            max_clipped = max(max_clipped, float(np.linalg.norm(grad)))
            model.filters -= cfg.learning_rate * grad
        trace.append({
            "epoch": epoch,
            "loss": sums[0] / n,
            "separation": sums[1] / n,
            "preservation": sums[2] / n,
            "min_preservation_pair": None if math.isinf(pres_min) else pres_min,
            "max_step_grad_norm": max_clipped,
        })
    check_linearity(model)
    if evaluate_after:
        table, rows = evaluate(model, dataset, return_rows=True)
    else:
        table, rows = {}, []
    return TrainReport(trace, table, model, rows)


# ---------------------------------------------------------------------------
# evaluation


def _metric_or_sentinel(fn, est, ref):
    """Clamped metric; a silent estimate counts as total distortion."""
    if not np.any(as_array(est)):
        return -SENTINEL_DB
    return clamp_db(fn(est, ref))


def _aligned(fn, estimates, refs):
    n = len(refs)
    cost = np.array([[-_metric_or_sentinel(fn, estimates[i], refs[j]) for j in range(n)] for i in range(n)])
    return best_permutation(cost)[0]


def evaluate_instance(model: LinearSeparator, inst) -> dict:
    """Source-averaged SNR/TSNR/SI-SDR/TSI-SDR for one utterance, clamped to +-300 dB."""
    est = forward(model, inst.mixture)
    targets = inst.reverberant_targets
    directs = inst.direct_targets
    mapped = [forward(model, d) for d in directs]  # mapped[j][i] = T_i(x_d^(j))
    n = len(targets)
    row = {}
    for fam, (sep_fn, pres_fn, sep_col, pres_col) in {
        "snr": (snr, tsnr, "SNR", "TSNR"),
        "sisdr": (si_sdr, tsi_sdr, "SI-SDR", "TSI-SDR"),
    }.items():
        perm = _aligned(sep_fn, est, targets)
        row[sep_col] = float(np.mean([_metric_or_sentinel(sep_fn, est[i], targets[j]) for i, j in enumerate(perm)]))
        row[pres_col] = float(np.mean([_metric_or_sentinel(pres_fn, mapped[j][i], directs[j]) for i, j in enumerate(perm)]))
    return row


def aggregate(rows) -> dict:
    """Mean of each metric column per overlap bucket and overall."""
    groups = defaultdict(list)
    for r in rows:
        groups[r["overlap_bucket"]].append(r)
        groups["overall"].append(r)
    table = {}
    for key in (*OVERLAP_BUCKETS, "overall"):
        members = groups.get(key, [])
        entry = {"count": len(members)}
        for col in METRIC_COLUMNS:
            entry[col] = float(np.mean([m[col] for m in members])) if members else math.nan
        table[key] = entry
    return table


def evaluate(model: LinearSeparator, dataset, return_rows=False):
    rows = []
    for k, inst in enumerate(dataset):
        row = {"utterance_id": f"utt{k:04d}", "overlap_bucket": inst.overlap_bucket}
        row.update(evaluate_instance(model, inst))
        rows.append(row)
    table = aggregate(rows)
    return (table, rows) if return_rows else table
