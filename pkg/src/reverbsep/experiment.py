"""Experiment configuration, dataset persistence and the alpha sweep.

The configuration is a JSON document validated against :data:`CONFIG_SCHEMA`.
Every field is optional; missing fields take the defaults below.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError, ReverbSepError, TrainingDivergenceError
from .losses import LossConfig
from .metrics import SENTINEL_DB, clamp_db
from .mixsim import OVERLAP_BUCKETS, dumps_manifest, generate_dataset, manifest_entry
from .toytrain import METRIC_COLUMNS, GramStats, LinearSeparator, TrainConfig, evaluate, train
from .wavio import write_wav

DEFAULT_ALPHA_GRID = (0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0)
TEST_SEED_OFFSET = 1_000_003

DEFAULT_CONFIG = {
    "version": 1,
    "seed": 0,
    "dataset_size": 64,
    "test_size": 16,
    "direct_window_ms": 6.0,
    "scene": {"duration_s": 4.0, "sample_rate": 16000},
    "train": {
        "learning_rate": 1e-3,
        "epochs": 200,
        "grad_clip_l2": 5.0,
        "batch_size": 8,
        "init": "identity_plus_noise",
        "filter_length": 64,
    },
    "loss": {"base_metric": "SNR", "use_a2t": False, "alpha": 0.0, "pit": True},
    "alpha_grid": list(DEFAULT_ALPHA_GRID),
    "metrics": ["SNR"],
}

_num = {"type": "number"}
CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "version": {"const": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "dataset_size": {"type": "integer", "minimum": 1},
        "test_size": {"type": "integer", "minimum": 0},
        "direct_window_ms": {"enum": [6, 20, 6.0, 20.0]},
        "scene": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "duration_s": {"type": "number", "exclusiveMinimum": 0},
                "sample_rate": {"type": "integer", "minimum": 1},
                "absorption_range": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "max_reflection_order": {"type": "integer", "minimum": 0},
                "overlap_ratio": {"type": "number", "minimum": 0, "maximum": 1},
                "relative_speaker_snr_db": _num,
                "speech_to_noise_snr_db": _num,
            },
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "learning_rate": {"type": "number", "exclusiveMinimum": 0},
                "epochs": {"type": "integer", "minimum": 0},
                "grad_clip_l2": {"type": "number", "exclusiveMinimum": 0},
                "batch_size": {"type": "integer", "minimum": 1},
                "init": {"enum": ["small_random", "identity_plus_noise"]},
                "filter_length": {"type": "integer", "minimum": 1},
            },
        },
        "loss": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "base_metric": {"enum": ["SNR", "SI-SDR"]},
                "use_a2t": {"type": "boolean"},
                "alpha": {"type": "number", "minimum": 0},
                "pit": {"type": "boolean"},
            },
        },
        "alpha_grid": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "metrics": {"type": "array", "items": {"enum": ["SNR", "SI-SDR"]}, "minItems": 1},
    },
}

MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["version", "utterances"],
    "properties": {
        "version": {"const": 1},
        "utterances": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["utt_id", "overlap_bucket", "num_samples", "sample_rate", "scene", "files"],
                "properties": {
                    "utt_id": {"type": "string"},
                    "overlap_bucket": {"enum": list(OVERLAP_BUCKETS)},
                    "num_samples": {"type": "integer", "minimum": 1},
                    "sample_rate": {"type": "integer", "minimum": 1},
                    "scene": {
                        "type": "object",
                        "required": ["seed", "room", "overlap_ratio", "relative_speaker_snr_db",
                                     "speech_to_noise_snr_db", "direct_window_ms"],
                    },
                    "files": {"type": "object", "additionalProperties": {"type": "string"}},
                },
            },
        },
    },
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def validate_config(raw: dict) -> dict:
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {path}: {exc.message}") from None
    return raw


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_CONFIG))

    @classmethod
    def from_dict(cls, d: dict | None = None):
        d = d or {}
        validate_config(d)
        return cls(validate_config(_merge(DEFAULT_CONFIG, d)))

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(d)

    def override(self, **kw):
        """Return a copy with top-level or nested (``"train.epochs"``) keys replaced."""
        raw = copy.deepcopy(self.raw)
        for key, value in kw.items():
            if value is None:
                continue
            node = raw
            *parents, leaf = key.split(".")
            for p in parents:
                node = node.setdefault(p, {})
            node[leaf] = value
        return ExperimentConfig(validate_config(raw))

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def alpha_grid(self):
        return [float(a) for a in self.raw["alpha_grid"]]

    def scene_kwargs(self) -> dict:
        kw = dict(self.raw["scene"])
        kw["direct_window_ms"] = float(self.raw["direct_window_ms"])
        return kw

    def loss_config(self, **kw) -> LossConfig:
        return LossConfig(**{**self.raw["loss"], **kw})

    def train_config(self, loss: LossConfig | None = None) -> TrainConfig:
        return TrainConfig(loss=loss or self.loss_config(), seed=self.seed, **self.raw["train"])


def build_datasets(cfg: ExperimentConfig):
    """Training scenes use seeds ``seed + i``; test scenes are offset by a large prime."""
    kw = cfg.scene_kwargs()
    train_set = generate_dataset(cfg.seed, cfg.raw["dataset_size"], **kw)
    test_set = generate_dataset(cfg.seed + TEST_SEED_OFFSET, cfg.raw["test_size"], **kw)
    return train_set, test_set


# ---------------------------------------------------------------------------
# dataset on disk


def write_dataset(out_dir, dataset, prefix="utt"):
    """Write every instance as WAVs plus ``manifest.json``; returns the manifest path."""
    out_dir = Path(out_dir)
    entries = []
    for k, inst in enumerate(dataset):
        utt = f"{prefix}{k:05d}"
        d = out_dir / utt
        files = {"mix": inst.mixture, "noise": inst.noise}
        for j in range(inst.n_sources):
            files[f"src{j + 1}"] = inst.reverberant_targets[j]
            files[f"src{j + 1}_direct"] = inst.direct_targets[j]
            files[f"src{j + 1}_late"] = inst.late_targets[j]
        written = {}
        for name, wav in files.items():
            try:
                write_wav(d / f"{name}.wav", wav, subtype="float32")
            except OSError as exc:
                raise ConfigError(f"cannot write {d / f'{name}.wav'}: {exc.strerror}") from None
            written[name] = f"{utt}/{name}.wav"
        entry = manifest_entry(utt, inst)
        entry["files"] = written
        entries.append(entry)
    text = dumps_manifest(entries)
    jsonschema.validate(json.loads(text), MANIFEST_SCHEMA)
    path = out_dir / "manifest.json"
    path.write_text(text)
    return path


# ---------------------------------------------------------------------------
# CSV helpers

CSV_SCHEMAS = {
    "metrics/v1": ("utterance_id", "overlap_bucket", "SNR", "TSNR", "SI-SDR", "TSI-SDR"),
    "table/v1": ("objective", "alpha", "overlap_bucket", "count", "SNR", "TSNR", "SI-SDR", "TSI-SDR", "status"),
    "contour/v1": ("set", "label", "metric_value_db", "tsnr_db", "tsi_sdr_db", "flagged"),
}
_NUMERIC = {"SNR", "TSNR", "SI-SDR", "TSI-SDR", "metric_value_db", "tsnr_db", "tsi_sdr_db"}


def _cell(col, value):
    if col in _NUMERIC:
        if value is None or value == "":
            return ""
        value = float(value)
        if math.isnan(value):
            return ""
        return repr(round(clamp_db(value), 6))
    if value is None:
        return ""
    return str(value)


def write_csv(rows, schema: str, stream=None) -> str:
    """Validate rows against a named column schema and serialise them.

    Infinite values become the +-300 dB sentinels.
    """
    cols = CSV_SCHEMAS[schema]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        extra = set(row) - set(cols)
        if extra:
            raise ReverbSepError(f"{schema}: unexpected columns {sorted(extra)}")
        writer.writerow([_cell(c, row.get(c)) for c in cols])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def read_csv(text: str):
    return list(csv.DictReader(io.StringIO(text)))


# ---------------------------------------------------------------------------
# sweep


@dataclass
class SweepCell:
    objective: str
    alpha: float | None
    status: str
    table: dict
    trace: list
    filters: list | None

    @property
    def label(self) -> str:
        return self.objective if self.alpha is None else f"{self.objective}+A2T"


def sweep_cells(cfg: ExperimentConfig):
    cells = []
    for metric in cfg.raw["metrics"]:
        cells.append((metric, None))
        cells.extend((metric, a) for a in cfg.alpha_grid)
    return cells


def run_cell(cfg: ExperimentConfig, metric, alpha, train_set, test_set, stats=None) -> SweepCell:
    loss = cfg.loss_config(base_metric=metric, use_a2t=alpha is not None, alpha=alpha or 0.0)
    tcfg = cfg.train_config(loss)
    model = LinearSeparator.init(len(train_set[0].reverberant_targets), tcfg.filter_length, tcfg.init, seed=cfg.seed)
    try:
        report = train(model, train_set, tcfg, stats=stats, evaluate_after=False)
    except TrainingDivergenceError as exc:
        return SweepCell(metric, alpha, f"diverged@{exc.epoch}", {}, [], None)
    table = evaluate(model, test_set if test_set else train_set)
    return SweepCell(metric, alpha, "ok", table, report.trace, model.to_json())


def run_sweep(cfg: ExperimentConfig, datasets=None, progress=None):
    """Train and evaluate one model per (objective, A2T/alpha) cell.

    Cells are evaluated on the held-out test set (or the training set if
    ``test_size`` is 0). A diverging cell is recorded and the sweep goes on.
    """
    train_set, test_set = datasets if datasets is not None else build_datasets(cfg)
    L = cfg.raw["train"]["filter_length"]
    stats = [GramStats.from_instance(inst, L) for inst in train_set]
    results = []
    for metric, alpha in sweep_cells(cfg):
        cell = run_cell(cfg, metric, alpha, train_set, test_set, stats)
        results.append(cell)
        if progress:
            progress(cell)
    return results


def table_rows(cells):
    """Long-form rows (``table/v1``) for a list of sweep cells or train reports."""
    rows = []
    for c in cells:
        alpha = "" if c.alpha is None else repr(float(c.alpha))
        if not c.table:
            rows.append({"objective": c.label, "alpha": alpha, "overlap_bucket": "overall", "status": c.status})
            continue
        for bucket in (*OVERLAP_BUCKETS, "overall"):
            entry = c.table[bucket]
            rows.append({
                "objective": c.label,
                "alpha": alpha,
                "overlap_bucket": bucket,
                "count": entry["count"],
                **{m: entry[m] for m in METRIC_COLUMNS},
                "status": c.status,
            })
    return rows


def format_table1(cells) -> str:
    """Wide Table-1 layout: one row per objective/alpha, ``SNR / TSNR / SI-SDR / TSI-SDR`` per bucket."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["objective", "alpha", *(f"OR {b}%" for b in OVERLAP_BUCKETS), "overall"])
    for c in cells:
        alpha = "--" if c.alpha is None else f"{c.alpha:g}"
        if not c.table:
            writer.writerow([c.label, alpha, *([c.status] * (len(OVERLAP_BUCKETS) + 1))])
            continue
        cols = []
        for bucket in (*OVERLAP_BUCKETS, "overall"):
            e = c.table[bucket]
            if not e["count"]:
                cols.append("")
                continue
            cols.append(" / ".join(f"{clamp_db(e[m]):.1f}" for m in METRIC_COLUMNS))
        writer.writerow([c.label, alpha, *cols])
    return buf.getvalue()


def dumps_trace(cells) -> str:
    return json.dumps(
        [{"objective": c.label, "alpha": c.alpha, "status": c.status, "trace": c.trace, "filters": c.filters}
         for c in cells],
        indent=1,
    )
