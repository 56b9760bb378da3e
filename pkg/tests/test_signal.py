import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from reverbsep.errors import DegenerateSignalError, DimensionError, PlacementError, SampleRateError
from reverbsep.signal import (
    Waveform,
    convolve_full,
    dot,
    energy,
    relative_snr_db,
    rescale_to_relative_snr,
    shift,
)

from oracles import naive_convolve

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_dot_examples():
    assert dot([1, 2], [3, 4]) == 11
    assert dot([1, 0], [0, 1]) == 0
    x = np.array([0.3, -2.0, 5.0])
    assert dot(x, x) == pytest.approx(np.sum(x**2), rel=1e-15)


def test_dot_length_mismatch():
    with pytest.raises(DimensionError):
        dot([1, 2], [1, 2, 3])


def test_dot_rate_mismatch():
    with pytest.raises(SampleRateError):
        dot(Waveform([1.0], 8000), Waveform([1.0], 16000))


def test_energy():
    assert energy([3, 4]) == 25
    assert energy(np.zeros(5)) == 0
    x = np.array([1.0, -2.0, 0.5])
    assert energy(3.0 * x) == pytest.approx(9.0 * energy(x), rel=1e-14)


def test_convolve_examples():
    assert np.array_equal(convolve_full([1, 0, 0], [1]), [1, 0, 0])
    assert np.array_equal(convolve_full([1, 2], [1, 1]), [1, 3, 2])
    h = np.array([0.5, -1.0, 2.0])
    delta = np.zeros(6)
    delta[2] = 1.0
    out = convolve_full(delta, h)
    assert np.array_equal(out[2:5], h) and not np.any(out[:2]) and not np.any(out[5:])


def test_convolve_keeps_waveform_type():
    out = convolve_full(Waveform([1.0, 2.0], 8000), Waveform([1.0], 8000))
    assert isinstance(out, Waveform) and out.sample_rate == 8000
    with pytest.raises(SampleRateError):
        convolve_full(Waveform([1.0], 8000), Waveform([1.0], 16000))


@pytest.mark.parametrize("n,k", [(1, 1), (17, 5), (256, 256), (200, 31)])
def test_convolve_matches_naive_exactly_small(n, k, rng):
    x, h = rng.standard_normal(n), rng.standard_normal(k)
    np.testing.assert_allclose(convolve_full(x, h), naive_convolve(x, h), rtol=0, atol=1e-12 * np.abs(x).sum() * np.abs(h).max())


@pytest.mark.parametrize("n,k", [(600, 512), (3000, 1024)])
def test_fft_convolution_matches_naive(n, k, rng):
    x, h = rng.standard_normal(n), rng.standard_normal(k)
    ref = naive_convolve(x, h)
    out = convolve_full(x, h)
    assert np.max(np.abs(out - ref)) <= 1e-10 * np.max(np.abs(ref))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 40, elements=finite), arrays(np.float64, 40, elements=finite),
       arrays(np.float64, 7, elements=finite))
def test_convolution_is_linear(a, b, h):
    lhs = convolve_full(a + b, h)
    rhs = convolve_full(a, h) + convolve_full(b, h)
    scale = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), 1e-300)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale + 1e-300


def test_shift_examples():
    assert np.array_equal(shift([1, 2], 1, 4), [0, 1, 2, 0])
    a = np.array([1.0, -3.0, 2.0])
    assert np.array_equal(shift(a, 0, 3), a)
    with pytest.raises(PlacementError):
        shift(a, 2, 4)
    with pytest.raises(PlacementError):
        shift(a, -1, 10)


@given(arrays(np.float64, st.integers(1, 20), elements=finite), st.integers(0, 30))
def test_shift_preserves_energy(a, extra):
    for k in range(extra + 1):
        assert energy(shift(a, k, a.size + extra)) == pytest.approx(energy(a), rel=1e-14, abs=1e-300)


def test_rescale_examples():
    x = np.array([1.0, 0.0])
    out = rescale_to_relative_snr(x, np.array([0.0, 1.0]), 0.0)
    assert np.array_equal(out, x)
    out = rescale_to_relative_snr(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 20.0)
    assert energy(out) == pytest.approx(0.01, rel=1e-14)


@given(st.floats(-40, 40))
def test_rescale_round_trip(snr_db):
    rng = np.random.default_rng(5)
    t, r = rng.standard_normal(50), rng.standard_normal(50)
    out = rescale_to_relative_snr(t, r, snr_db)
    assert abs(relative_snr_db(out, r) - snr_db) < 1e-9


def test_rescale_degenerate():
    with pytest.raises(DegenerateSignalError):
        rescale_to_relative_snr(np.zeros(3), np.ones(3), 0.0)


def test_waveform_validation():
    w = Waveform([1, 2, 3], 16000)
    assert w.samples.dtype == np.float64 and len(w) == 3 and w.duration == 3 / 16000
    with pytest.raises(ValueError):
        w.samples[0] = 5
    with pytest.raises(SampleRateError):
        Waveform([1.0], 0)
