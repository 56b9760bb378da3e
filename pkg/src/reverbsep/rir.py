"""Image-method room impulse responses and their direct/late split.

The simulator follows the classic shoebox image construction: every image
source is a mirror of the true source through an integer lattice of wall
reflections. Each image contributes an impulse of amplitude
``(1 - absorption) ** n_reflections / (4 pi d)`` at the sample nearest to
``d / c * fs``. There is no fractional-delay interpolation.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, GeometryError, ReverbSepError
from .signal import DEFAULT_SAMPLE_RATE, Waveform, as_array, convolve_full
from .wavio import read_wav, write_wav

SPEED_OF_SOUND = 343.0
MAX_RIR_SECONDS = 0.5
# Extra tail after the latest image so a +-20 ms direct window always fits.
TAIL_PAD_MS = 20.0

# Own defaults; no reflection order or absorption is prescribed upstream.
DEFAULT_ABSORPTION = 0.35
DEFAULT_MAX_ORDER = 12


@dataclass(frozen=True)
class RoomSpec:
    dimensions: tuple
    absorption: float = DEFAULT_ABSORPTION
    speed_of_sound: float = SPEED_OF_SOUND
    max_reflection_order: int = DEFAULT_MAX_ORDER
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        dims = tuple(float(d) for d in self.dimensions)
        if len(dims) != 3 or min(dims) <= 0:
            raise GeometryError(f"room dimensions must be three positive lengths, got {self.dimensions}")
        object.__setattr__(self, "dimensions", dims)
        if not 0.0 < self.absorption <= 1.0:
            raise GeometryError(f"absorption must lie in (0, 1], got {self.absorption}")
        if self.speed_of_sound <= 0:
            raise GeometryError("speed_of_sound must be positive")
        if int(self.max_reflection_order) != self.max_reflection_order or self.max_reflection_order < 0:
            raise GeometryError("max_reflection_order must be a non-negative integer")
        object.__setattr__(self, "max_reflection_order", int(self.max_reflection_order))

    def to_dict(self):
        d = asdict(self)
        d["dimensions"] = list(self.dimensions)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**{**d, "dimensions": tuple(d["dimensions"])})


@dataclass(frozen=True, eq=False)
class RirFilter:
    taps: Waveform
    source_position: tuple = field(default=(math.nan,) * 3)
    mic_position: tuple = field(default=(math.nan,) * 3)

    def __post_init__(self):
        if not isinstance(self.taps, Waveform):
            object.__setattr__(self, "taps", Waveform(self.taps))
        if len(self.taps) == 0:
            raise DimensionError("RIR must have at least one tap")

    @property
    def peak_index(self) -> int:
        return peak_index(self.taps)

    def __len__(self):
        return len(self.taps)


@dataclass(frozen=True, eq=False)
class RirDecomposition:
    direct: RirFilter
    late: RirFilter
    window_ms: float
    peak: int
    window_samples: int

    @property
    def original(self) -> RirFilter:
        return RirFilter(
            self.direct.taps.with_samples(self.direct.taps.samples + self.late.taps.samples),
            self.direct.source_position,
            self.direct.mic_position,
        )


PEAK_FRACTION = 0.5


def peak_index(taps) -> int:
    """Index of the first peak of ``|taps|``.

    The first peak is the earliest tap whose magnitude reaches
    ``PEAK_FRACTION`` of the global maximum. With integer-sample delays several
    reflections can land on the same tap and sum above the direct arrival, so
    a plain argmax would occasionally lock onto a reflection instead.
    """
    a = np.abs(as_array(taps))
    if a.size == 0:
        raise DimensionError("empty filter has no peak")
    return int(np.flatnonzero(a >= PEAK_FRACTION * a.max())[0])


def _check_inside(room: RoomSpec, point, name):
    p = np.asarray(point, dtype=np.float64)
    if p.shape != (3,):
        raise GeometryError(f"{name} must be a 3-vector")
    dims = np.asarray(room.dimensions)
    if np.any(p <= 0) or np.any(p >= dims):
        raise GeometryError(f"{name} {tuple(p)} is not strictly inside room {room.dimensions}")
    return p


def image_sources(room: RoomSpec, src):
    """Enumerate image positions and reflection counts up to the room's order.

    Returns:
        ``(positions, n_reflections)`` with shapes ``(K, 3)`` and ``(K,)``.
    """
    order = room.max_reflection_order
    dims = np.asarray(room.dimensions)
    src = np.asarray(src, dtype=np.float64)
    n = np.arange(-order, order + 1)
    per_axis_pos, per_axis_refl = [], []
    for axis in range(3):
        # parity 0: image at s + 2nL with 2|n| reflections
        # parity 1: image at -s + 2nL with |n| + |n - 1| reflections
        pos = np.concatenate([src[axis] + 2 * n * dims[axis], -src[axis] + 2 * n * dims[axis]])
        refl = np.concatenate([2 * np.abs(n), np.abs(n) + np.abs(n - 1)])
        keep = refl <= order
        per_axis_pos.append(pos[keep])
        per_axis_refl.append(refl[keep])
    px, py, pz = np.meshgrid(*per_axis_pos, indexing="ij")
    rx, ry, rz = np.meshgrid(*per_axis_refl, indexing="ij")
    total = (rx + ry + rz).ravel()
    keep = total <= order
    positions = np.stack([px.ravel(), py.ravel(), pz.ravel()], axis=1)[keep]
    return positions, total[keep]


def simulate_rir(room: RoomSpec, src, mic) -> RirFilter:
    """Simulate the impulse response from ``src`` to ``mic`` inside ``room``."""
    src = _check_inside(room, src, "source")
    mic = _check_inside(room, mic, "microphone")
    if np.allclose(src, mic, rtol=0.0, atol=1e-9):
        raise GeometryError("source and microphone coincide")
    fs = room.sample_rate
    positions, refl = image_sources(room, src)
    dist = np.linalg.norm(positions - mic, axis=1)
    delays = np.rint(dist / room.speed_of_sound * fs).astype(np.int64)
    gains = (1.0 - room.absorption) ** refl / (4.0 * np.pi * dist)
    if room.absorption == 1.0:
        gains = np.where(refl == 0, gains, 0.0)
    # strongest-to-weakest cut-off: keep only images that still carry energy
    live = gains > 0
    pad = int(round(TAIL_PAD_MS * fs / 1000.0))
    length = min(int(delays[live].max()) + 1 + pad, int(round(MAX_RIR_SECONDS * fs)))
    inside = live & (delays < length)
    taps = np.zeros(length)
    np.add.at(taps, delays[inside], gains[inside])
    return RirFilter(Waveform(taps, fs), tuple(src), tuple(mic))


def window_samples(window_ms: float, sample_rate: int) -> int:
    return int(round(window_ms * sample_rate / 1000.0))


def decompose(h: RirFilter, window_ms: float = 6.0, sample_rate: int | None = None) -> RirDecomposition:
    """Split ``h`` into the taps within ``+-window_ms`` of its peak and the rest.

    The split partitions tap indices, so ``direct + late`` reproduces ``h``
    bit for bit.
    """
    if window_ms <= 0:
        raise ReverbSepError("window_ms must be positive")
    if not isinstance(h, RirFilter):
        h = RirFilter(h)
    taps = h.taps
    fs = taps.sample_rate if sample_rate is None else int(sample_rate)
    x = taps.samples
    p = peak_index(x)
    w = window_samples(window_ms, fs)
    lo, hi = max(p - w, 0), min(p + w + 1, x.size)
    direct = np.zeros_like(x)
    direct[lo:hi] = x[lo:hi]
    late = x.copy()
    late[lo:hi] = 0.0
    return RirDecomposition(
        direct=RirFilter(Waveform(direct, taps.sample_rate), h.source_position, h.mic_position),
        late=RirFilter(Waveform(late, taps.sample_rate), h.source_position, h.mic_position),
        window_ms=float(window_ms),
        peak=p,
        window_samples=w,
    )


def render(source, decomp: RirDecomposition):
    """Convolve ``source`` with the full, direct and late filters.

    Returns:
        ``(reverberant, direct_path, late)``, each of length
        ``len(source) + len(filter) - 1``.
    """
    direct = convolve_full(source, decomp.direct.taps)
    late = convolve_full(source, decomp.late.taps)
    reverberant = convolve_full(source, decomp.original.taps)
    return reverberant, direct, late


def save_rir(path, h: RirFilter, window_ms: float | None = None, room: RoomSpec | None = None):
    """Write taps as a float32 WAV plus a ``.json`` sidecar with geometry."""
    path = Path(path)
    write_wav(path, h.taps, subtype="float32")
    meta = {
        "sample_rate": h.taps.sample_rate,
        "length": len(h),
        "source_position": list(h.source_position),
        "mic_position": list(h.mic_position),
        "peak_index": h.peak_index,
        "window_ms": window_ms,
        "room": room.to_dict() if room is not None else None,
    }
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(meta, indent=2))
    return path, sidecar


def load_rir(path):
    """Read a RIR written by :func:`save_rir`; returns ``(RirFilter, metadata)``."""
    path = Path(path)
    taps = read_wav(path)
    sidecar = path.with_suffix(".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    h = RirFilter(
        taps,
        tuple(meta.get("source_position", (math.nan,) * 3)),
        tuple(meta.get("mic_position", (math.nan,) * 3)),
    )
    return h, meta
