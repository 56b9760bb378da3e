import itertools
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reverbsep.errors import DimensionError, ReverbSepError, TrainingDivergenceError
from reverbsep.losses import LossConfig
from reverbsep.metrics import snr
from reverbsep.mixsim import OVERLAP_BUCKETS, MixtureInstance, render_scene, sample_scene
from reverbsep.signal import Waveform
from reverbsep.toytrain import (
    GramStats,
    LinearSeparator,
    TrainConfig,
    check_linearity,
    clip_global_norm,
    evaluate,
    evaluate_instance,
    forward,
    gram_loss_and_grad,
    time_domain_loss_and_grad,
    train,
)

from oracles import central_difference


def two_tone_instance(n=2048, fs=16000):
    """Anechoic, noiseless pair of tones: separable by a short FIR."""
    t = np.arange(n) / fs
    a = np.sin(2 * np.pi * 300 * t)
    b = 0.7 * np.sin(2 * np.pi * 2500 * t + 0.3)
    W = Waveform
    silent = W(np.zeros(n))
    return MixtureInstance(W(a + b), (W(a), W(b)), (W(a), W(b)), (silent, silent), silent, None, "[75,100]")


def random_instance(rng, n=256):
    x = rng.standard_normal((2, n))
    d = 0.8 * x + 0.2 * rng.standard_normal((2, n))
    mix = x.sum(0) + 0.1 * rng.standard_normal(n)
    return SimpleNamespace(
        mixture=mix,
        reverberant_targets=tuple(x),
        direct_targets=tuple(d),
        overlap_bucket="[0,25)",
    )


def test_identity_and_zero_filters(rng):
    x = rng.standard_normal(300)
    for L in (1, 4, 63, 64):
        for out in forward(LinearSeparator.identity(2, L), x):
            np.testing.assert_array_equal(out, x)
    zeros = LinearSeparator(np.zeros((2, 64)))
    assert all(not np.any(o) for o in forward(zeros, x))


def test_forward_is_centred_same_convolution(rng):
    model = LinearSeparator.init(3, 9, seed=1)
    x = rng.standard_normal(50)
    for h, out in zip(model.filters, forward(model, x)):
        full = np.convolve(x, h)
        np.testing.assert_allclose(out, full[4:54], rtol=1e-13)
        assert len(out) == len(x)


def test_forward_keeps_waveform_and_rejects_short_input():
    model = LinearSeparator.identity(2, 8)
    out = forward(model, Waveform(np.ones(20), 8000))
    assert out[0].sample_rate == 8000
    with pytest.raises(DimensionError):
        forward(model, np.ones(7))


def test_linearity(rng):
    model = LinearSeparator.init(2, 64, seed=4)
    assert check_linearity(model)
    a, b = rng.standard_normal((2, 500))
    for sa, sb, sab in zip(forward(model, a), forward(model, b), forward(model, a + b)):
        assert np.max(np.abs(sa + sb - sab)) <= 1e-12 * np.max(np.abs(sab))


def test_init_kinds():
    small = LinearSeparator.init(2, 64, "small_random", seed=0)
    assert np.all(np.abs(small.filters) <= 0.01)
    ident = LinearSeparator.init(2, 64, "identity_plus_noise", seed=0)
    assert np.allclose(ident.filters[:, 31], 1.0, atol=0.01)
    with pytest.raises(ReverbSepError):
        LinearSeparator.init(kind="zeros")
    assert LinearSeparator.from_json(small.to_json()).filters.tolist() == small.filters.tolist()


@pytest.mark.parametrize("metric,a2t,alpha", [("SNR", False, 0.0), ("SNR", True, 1.0), ("SI-SDR", True, 0.3)])
def test_filter_gradient_matches_finite_differences(metric, a2t, alpha):
    inst = random_instance(np.random.default_rng(8))
    model = LinearSeparator.init(2, 64, seed=2)
    cfg = LossConfig(metric, a2t, alpha)
    _, grad = time_domain_loss_and_grad(model, inst, cfg)

    def f(h):
        return time_domain_loss_and_grad(LinearSeparator(h), inst, cfg)[0].total

    fd = central_difference(f, model.filters)
    assert np.linalg.norm(grad - fd) / np.linalg.norm(fd) < 1e-5


@pytest.mark.parametrize("metric,a2t,alpha", [("SNR", False, 0.0), ("SNR", True, 0.3), ("SI-SDR", False, 0.0), ("SI-SDR", True, 3.0)])
def test_gram_path_equals_time_domain_path(metric, a2t, alpha, short_scenes):
    cfg = LossConfig(metric, a2t, alpha)
    model = LinearSeparator.init(2, 32, "identity_plus_noise", seed=5)
    for inst in short_scenes:
        br, g_time = time_domain_loss_and_grad(model, inst, cfg)
        total, sep, pres, perm, g_gram, _ = gram_loss_and_grad(model, GramStats.from_instance(inst, 32), cfg)
        assert total == pytest.approx(br.total, abs=1e-8)
        assert sep == pytest.approx(br.separation_term, abs=1e-8)
        assert pres == pytest.approx(br.preservation_term, abs=1e-8)
        assert perm == br.chosen_permutation
        assert np.linalg.norm(g_gram - g_time) <= 1e-8 * np.linalg.norm(g_time)


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    scale=st.floats(1e-6, 1e6),
    max_norm=st.floats(1e-3, 100.0),
)
def test_clip_contract(seed, scale, max_norm):
    g = scale * np.random.default_rng(seed).standard_normal((2, 16))
    clipped, pre = clip_global_norm(g, max_norm)
    assert pre == pytest.approx(np.linalg.norm(g))
    assert np.linalg.norm(clipped) <= max_norm + 1e-9
    if pre <= max_norm:
        assert np.array_equal(clipped, g)


def test_train_config_validation():
    with pytest.raises(ReverbSepError):
        TrainConfig(grad_clip_l2=0.0)
    with pytest.raises(ReverbSepError):
        TrainConfig(init="zeros")
    with pytest.raises(ReverbSepError):
        train(LinearSeparator.init(), [], TrainConfig())


def test_training_is_deterministic(short_scenes):
    cfg = TrainConfig(LossConfig("SNR", True, 1.0), epochs=5, batch_size=2, filter_length=16)
    a = train(LinearSeparator.init(2, 16, seed=3), short_scenes, cfg, evaluate_after=False)
    b = train(LinearSeparator.init(2, 16, seed=3), short_scenes, cfg, evaluate_after=False)
    assert np.array_equal(a.model.filters, b.model.filters)
    assert a.trace == b.trace


def test_training_trace_and_bounds(short_scenes):
    alpha = 0.3
    cfg = TrainConfig(LossConfig("SNR", True, alpha), epochs=20, batch_size=2, filter_length=16)
    rep = train(LinearSeparator.init(2, 16, "identity_plus_noise", seed=0), short_scenes, cfg)
    assert len(rep.trace) == 20
    bound = -10 * math.log10(1 / alpha)
    for row in rep.trace:
        assert row["max_step_grad_norm"] <= cfg.grad_clip_l2 + 1e-9
        assert row["min_preservation_pair"] >= bound - 1e-9
        assert row["loss"] == pytest.approx(row["separation"] + row["preservation"])
    assert check_linearity(rep.model)
    assert set(rep.table) == {*OVERLAP_BUCKETS, "overall"}


@pytest.mark.slow
def test_single_utterance_overfit():
    inst = two_tone_instance()
    model = LinearSeparator.init(2, 64, "small_random", seed=0)
    rep = train(model, [inst], TrainConfig(LossConfig("SNR"), epochs=2000, batch_size=1))
    assert rep.table["overall"]["SNR"] > 20.0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported(short_scenes):
    cfg = TrainConfig(LossConfig("SNR"), learning_rate=math.inf, epochs=3, filter_length=16)
    with pytest.raises(TrainingDivergenceError) as info:
        train(LinearSeparator.init(2, 16, seed=0), short_scenes, cfg, evaluate_after=False)
    assert info.value.epoch == 1


def test_identity_model_on_anechoic_scene():
    inst = render_scene(sample_scene(6, duration_s=0.25, max_reflection_order=0))
    assert not any(np.any(l.samples) for l in inst.late_targets)
    row = evaluate_instance(LinearSeparator.identity(2, 64), inst)
    assert row["TSNR"] == 300.0 and row["TSI-SDR"] == 300.0
    expected = np.mean([snr(inst.mixture, t) for t in inst.reverberant_targets])
    assert row["SNR"] == pytest.approx(expected, abs=1e-12)


def test_zero_model_gives_sentinels(short_scenes):
    table = evaluate(LinearSeparator(np.zeros((2, 16))), short_scenes)
    for col in ("SNR", "TSNR", "SI-SDR", "TSI-SDR"):
        assert table["overall"][col] == -300.0


def test_bucket_means_match_groupby_oracle(short_scenes):
    model = LinearSeparator.init(2, 16, "identity_plus_noise", seed=1)
    scenes = list(short_scenes) + [render_scene(sample_scene(s, duration_s=0.25)) for s in (90, 91, 92)]
    table, rows = evaluate(model, scenes, return_rows=True)
    key = lambda r: r["overlap_bucket"]
    for bucket, members in itertools.groupby(sorted(rows, key=key), key=key):
        members = list(members)
        assert table[bucket]["count"] == len(members)
        for col in ("SNR", "TSNR", "SI-SDR", "TSI-SDR"):
            assert table[bucket][col] == float(np.mean([m[col] for m in members]))
    assert table["overall"]["count"] == len(scenes)
    empty = [b for b in OVERLAP_BUCKETS if table[b]["count"] == 0]
    assert all(math.isnan(table[b]["SNR"]) for b in empty)
