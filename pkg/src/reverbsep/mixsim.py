"""Seeded simulation of noisy reverberant two-speaker scenes.

Speech corpora are replaced with synthetic voiced sources: harmonic tones
with a wandering pitch, a speaker-specific spectral envelope and a syllabic
on/off envelope with pauses. The noise source is broadband Gaussian noise.

Randomness comes from ``numpy.random.default_rng`` (PCG64), seeded with the
scene seed. Scene parameters and source material use separate child
streams, so changing a scene override does not reshuffle the waveforms.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import GeometryError, ReverbSepError
from .rir import RoomSpec, decompose, simulate_rir
from .signal import DEFAULT_SAMPLE_RATE, Waveform, convolve_full, energy, rescale_to_relative_snr, shift

WALL_CLEARANCE = 0.5
MIN_SOURCE_MIC_DISTANCE = 0.3
MAX_SAMPLING_ATTEMPTS = 1000

ROOM_LW_RANGE = (3.0, 10.0)
ROOM_H_RANGE = (2.5, 4.0)
SPEAKER_SNR_RANGE = (0.0, 5.0)
NOISE_SNR_RANGE = (10.0, 20.0)
# Own choice; the source dataset does not publish its wall absorption.
ABSORPTION_RANGE = (0.2, 0.5)

OVERLAP_BUCKETS = ("[0,25)", "[25,50)", "[50,75)", "[75,100]")

# Speaker timbres: (f0 range in Hz, spectral-envelope peak in Hz, envelope width in Hz).
VOICES = (
    ((90.0, 150.0), 600.0, 1200.0),
    ((170.0, 260.0), 1700.0, 1400.0),
)


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    room: RoomSpec
    speaker_positions: tuple
    noise_position: tuple
    mic_position: tuple
    overlap_ratio: float
    relative_speaker_snr_db: float
    speech_to_noise_snr_db: float
    duration_s: float = 4.0
    direct_window_ms: float = 6.0

    @property
    def sample_rate(self) -> int:
        return self.room.sample_rate

    def to_dict(self):
        d = asdict(self)
        d["room"] = self.room.to_dict()
        d["speaker_positions"] = [list(p) for p in self.speaker_positions]
        d["noise_position"] = list(self.noise_position)
        d["mic_position"] = list(self.mic_position)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["room"] = RoomSpec.from_dict(d["room"])
        d["speaker_positions"] = tuple(tuple(p) for p in d["speaker_positions"])
        d["noise_position"] = tuple(d["noise_position"])
        d["mic_position"] = tuple(d["mic_position"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class MixtureInstance:
    mixture: Waveform
    reverberant_targets: tuple
    direct_targets: tuple
    late_targets: tuple
    noise: Waveform
    spec: SceneSpec
    overlap_bucket: str
    clean_sources: tuple = field(default=())
    clean_noise: Waveform | None = None

    @property
    def n_sources(self) -> int:
        return len(self.reverberant_targets)


def overlap_bucket(ratio: float) -> str:
    """Bucket label; 0.25, 0.5 and 0.75 fall into the upper bucket."""
    if not 0.0 <= ratio <= 1.0:
        raise ReverbSepError(f"overlap ratio must lie in [0, 1], got {ratio}")
    if ratio < 0.25:
        return OVERLAP_BUCKETS[0]
    if ratio < 0.5:
        return OVERLAP_BUCKETS[1]
    if ratio < 0.75:
        return OVERLAP_BUCKETS[2]
    return OVERLAP_BUCKETS[3]


def _rngs(seed):
    root = np.random.SeedSequence(int(seed) % 2**64)
    scene, sources = root.spawn(2)
    return np.random.default_rng(scene), np.random.default_rng(sources)


def _point_with_clearance(rng, dims, clearance):
    lo = np.full(3, clearance)
    hi = np.asarray(dims) - clearance
    return rng.uniform(lo, hi)


def sample_scene(
    seed: int,
    duration_s: float = 4.0,
    direct_window_ms: float = 6.0,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    absorption_range=ABSORPTION_RANGE,
    max_reflection_order: int | None = None,
    **overrides,
) -> SceneSpec:
    """Draw a random scene; identical seeds give identical scenes.

    Any ``SceneSpec`` field may be pinned through ``overrides``.
    """
    rng, _ = _rngs(seed)
    length, width = rng.uniform(*ROOM_LW_RANGE, size=2)
    height = rng.uniform(*ROOM_H_RANGE)
    dims = (float(length), float(width), float(height))
    absorption = float(rng.uniform(*absorption_range))
    room_kwargs = {"dimensions": dims, "absorption": absorption, "sample_rate": sample_rate}
    if max_reflection_order is not None:
        room_kwargs["max_reflection_order"] = max_reflection_order
    room = RoomSpec(**room_kwargs)

    for _ in range(MAX_SAMPLING_ATTEMPTS):
        mic = _point_with_clearance(rng, dims, WALL_CLEARANCE)
        spk = [_point_with_clearance(rng, dims, WALL_CLEARANCE) for _ in range(2)]
        noise = rng.uniform(np.zeros(3), np.asarray(dims))
        pts = [*spk, noise]
        if np.all(noise > 0) and np.all(noise < dims) and all(
            np.linalg.norm(p - mic) >= MIN_SOURCE_MIC_DISTANCE for p in pts
        ):
            break
    else:
        raise GeometryError(f"scene {seed}: no valid geometry after {MAX_SAMPLING_ATTEMPTS} attempts")

    spec = SceneSpec(
        seed=int(seed),
        room=room,
        speaker_positions=tuple(tuple(float(v) for v in p) for p in spk),
        noise_position=tuple(float(v) for v in noise),
        mic_position=tuple(float(v) for v in mic),
        overlap_ratio=float(rng.uniform(0.0, 1.0)),
        relative_speaker_snr_db=float(rng.uniform(*SPEAKER_SNR_RANGE)),
        speech_to_noise_snr_db=float(rng.uniform(*NOISE_SNR_RANGE)),
        duration_s=float(duration_s),
        direct_window_ms=float(direct_window_ms),
    )
    return replace(spec, **overrides) if overrides else spec


def _syllable_envelope(rng, n, fs):
    """Raised-cosine syllables of 80-250 ms separated by short pauses."""
    env = np.zeros(n)
    # the leading pause never swallows more than a quarter of a short clip
    pos = min(int(rng.uniform(0.0, 0.1) * fs), n // 4)
    while pos < n:
        seg = int(rng.uniform(0.08, 0.25) * fs)
        stop = min(pos + seg, n)
        t = np.arange(stop - pos)
        env[pos:stop] = np.sin(np.pi * (t + 0.5) / seg) ** 2 * rng.uniform(0.5, 1.0)
        pos = stop + int(rng.uniform(0.02, 0.15) * fs)
    return env


def _voice(rng, n, fs, f0_range, peak_hz, width_hz):
    t = np.arange(n) / fs
    f0 = rng.uniform(*f0_range)
    # slow pitch wander of a few percent
    drift = 1.0 + 0.04 * np.sin(2 * np.pi * rng.uniform(0.5, 2.0) * t + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * np.cumsum(f0 * drift) / fs
    out = np.zeros(n)
    for k in range(1, int(0.5 * fs / (f0 * 1.05))):
        f = k * f0
        amp = math.exp(-0.5 * ((f - peak_hz) / width_hz) ** 2) + 0.05 / k
        out += amp * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    return out * _syllable_envelope(rng, n, fs)


def synthesize_sources(spec: SceneSpec):
    """Two synthetic voices and one broadband noise, each ``duration_s`` long."""
    _, rng = _rngs(spec.seed)
    fs = spec.sample_rate
    n = int(round(spec.duration_s * fs))
    voices = [Waveform(_voice(rng, n, fs, *v), fs) for v in VOICES]
    noise = Waveform(rng.standard_normal(n), fs)
    return voices[0], voices[1], noise


def _tile(x: np.ndarray, n: int) -> np.ndarray:
    reps = -(-n // x.size)
    return np.tile(x, reps)[:n]


def _pad(x: Waveform, n: int) -> Waveform:
    return x.with_samples(np.concatenate([x.samples, np.zeros(n - len(x))]))


def render_scene(spec: SceneSpec) -> MixtureInstance:
    """Render the mixture and all per-source references for ``spec``."""
    fs = spec.sample_rate
    rirs = [simulate_rir(spec.room, p, spec.mic_position) for p in spec.speaker_positions]
    noise_rir = simulate_rir(spec.room, spec.noise_position, spec.mic_position)

    s1, s2, noise = synthesize_sources(spec)
    s2 = rescale_to_relative_snr(s2, s1, spec.relative_speaker_snr_db)

    short = min(len(s1), len(s2))
    offset = int(round((1.0 - spec.overlap_ratio) * short))
    total = max(len(s1), offset + len(s2))
    clean = (shift(s1, 0, total), shift(s2, offset, total))
    speech_sum = clean[0].with_samples(clean[0].samples + clean[1].samples)
    noise = noise.with_samples(_tile(noise.samples, total))
    noise = rescale_to_relative_snr(noise, speech_sum, spec.speech_to_noise_snr_db)

    reverberant, direct, late = [], [], []
    for src, h in zip(clean, rirs):
        parts = decompose(h, spec.direct_window_ms)
        reverberant.append(convolve_full(src, h.taps))
        direct.append(convolve_full(src, parts.direct.taps))
        late.append(convolve_full(src, parts.late.taps))
    noise_rev = convolve_full(noise, noise_rir.taps)

    n_out = max(len(w) for w in [*reverberant, noise_rev])
    reverberant = tuple(_pad(w, n_out) for w in reverberant)
    direct = tuple(_pad(w, n_out) for w in direct)
    late = tuple(_pad(w, n_out) for w in late)
    noise_rev = _pad(noise_rev, n_out)
    mixture = Waveform(reverberant[0].samples + reverberant[1].samples + noise_rev.samples, fs)

    return MixtureInstance(
        mixture=mixture,
        reverberant_targets=reverberant,
        direct_targets=direct,
        late_targets=late,
        noise=noise_rev,
        spec=spec,
        overlap_bucket=overlap_bucket(spec.overlap_ratio),
        clean_sources=clean,
        clean_noise=noise,
    )


def measured_snrs(inst: MixtureInstance):
    """Re-measure ``(speaker-relative SNR, speech-to-noise SNR)`` in dB."""
    c1, c2 = inst.clean_sources
    speech = c1.samples + c2.samples
    rel = 10 * math.log10(energy(c1) / energy(c2))
    snr = 10 * math.log10(energy(speech) / energy(inst.clean_noise))
    return rel, snr


def generate_dataset(seed: int, n: int, **scene_overrides):
    """``n`` scenes with seeds ``seed, seed + 1, ...``."""
    return [render_scene(sample_scene(seed + i, **scene_overrides)) for i in range(n)]


def manifest_entry(utt_id: str, inst: MixtureInstance) -> dict:
    return {
        "utt_id": utt_id,
        "overlap_bucket": inst.overlap_bucket,
        "num_samples": len(inst.mixture),
        "sample_rate": inst.mixture.sample_rate,
        "scene": inst.spec.to_dict(),
    }


def dumps_manifest(entries) -> str:
    return json.dumps({"version": 1, "utterances": list(entries)}, indent=2)
