"""Command-line entry point: ``reverbsep {simulate,metrics,contour,train,sweep}``.

Exit codes: 0 success, 2 validation or I/O error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import contour as contour_mod
from .errors import (
    ConfigError,
    DegenerateSignalError,
    GradientUndefinedError,
    ReverbSepError,
    TrainingDivergenceError,
)
from .experiment import (
    ExperimentConfig,
    build_datasets,
    dumps_trace,
    format_table1,
    run_sweep,
    table_rows,
    write_csv,
    write_dataset,
    SweepCell,
)
from .metrics import si_sdr, snr, tsi_sdr, tsnr
from .toytrain import LinearSeparator, train, evaluate
from .wavio import read_wav

log = logging.getLogger("reverbsep")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def _alpha_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not vals or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("alpha values must be >= 0")
    return vals


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.from_dict({})
    over = {"seed": args.seed, "direct_window_ms": args.window_ms}
    if getattr(args, "metric", None):
        metric = {"snr": "SNR", "sisdr": "SI-SDR"}[args.metric]
        over["loss.base_metric"] = metric
        over["metrics"] = [metric]
    if getattr(args, "a2t", None):
        over["loss.use_a2t"] = args.a2t == "on"
    if getattr(args, "alpha", None):
        over["alpha_grid"] = args.alpha
        over["loss.alpha"] = args.alpha[0]
    if getattr(args, "num", None):
        over["dataset_size"] = args.num
    return cfg.override(**over)


def _common(p):
    p.add_argument("--config", type=Path, help="experiment configuration (JSON)")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--window-ms", dest="window_ms", type=float, choices=[6.0, 20.0],
                   help="half-width of the direct-path window")


def cmd_simulate(args):
    cfg = _load_config(args)
    if args.out is None:
        raise ConfigError("simulate needs --out")
    train_set, _ = build_datasets(cfg.override(test_size=0))
    path = write_dataset(args.out, train_set)
    log.info("wrote %d utterances, manifest %s", len(train_set), path)
    return EXIT_OK


def _read_all(paths, what):
    out = []
    for p in paths:
        try:
            out.append(read_wav(p))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{p}: cannot read {what} ({exc})") from None
    return out


def cmd_metrics(args):
    est = _read_all(args.estimates, "estimate")
    ref = _read_all(args.references, "reference")
    if len(est) != len(ref):
        raise ConfigError(f"{len(est)} estimates vs {len(ref)} references")
    mapped = directs = None
    if args.directs or args.mapped_directs:
        if not (args.directs and args.mapped_directs):
            raise ConfigError("--directs and --mapped-directs must be given together")
        mapped = _read_all(args.mapped_directs, "mapped direct-path")
        directs = _read_all(args.directs, "direct-path")
        if not len(mapped) == len(directs) == len(est):
            raise ConfigError("direct-path file counts must match the estimates")
    rows, code = [], EXIT_OK
    for k, (e, r) in enumerate(zip(est, ref)):
        row = {"utterance_id": Path(args.estimates[k]).stem, "overlap_bucket": ""}
        try:
            row["SNR"] = snr(e, r)
            row["SI-SDR"] = si_sdr(e, r)
            if mapped is not None:
                row["TSNR"] = tsnr(mapped[k], directs[k])
                row["TSI-SDR"] = tsi_sdr(mapped[k], directs[k])
        except ReverbSepError as exc:
            numerical = isinstance(exc, DegenerateSignalError)
            code = max(code, EXIT_NUMERICAL if numerical else EXIT_VALIDATION)
            row = {"utterance_id": f"{row['utterance_id']} (error: {exc})", "overlap_bucket": ""}
        rows.append(row)
    write_csv(rows, "metrics/v1", sys.stdout)
    return code


def cmd_contour(args):
    if args.direct:
        d, r = read_wav(args.direct), read_wav(args.late)
    else:
        rng = np.random.default_rng(args.seed or 0)
        d = rng.standard_normal(args.length)
        r = 0.5 * rng.standard_normal(args.length)
    rows = []
    for cset in (contour_mod.snr_contour_points(d, r), contour_mod.si_sdr_contour_points(d, r, args.count)):
        for p in cset.points:
            rows.append({
                "set": cset.kind,
                "label": p.label,
                "metric_value_db": p.metric_value,
                "tsnr_db": tsnr(p.estimate, cset.direct),
                "tsi_sdr_db": tsi_sdr(p.estimate, cset.direct),
                "flagged": int(cset.flagged),
            })
    text = write_csv(rows, "contour/v1")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "contour.csv").write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _write_outputs(out, cells, name):
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.csv").write_text(write_csv(table_rows(cells), "table/v1"))
    (out / f"{name}_table1.csv").write_text(format_table1(cells))
    (out / f"{name}_trace.json").write_text(dumps_trace(cells))


def cmd_train(args):
    cfg = _load_config(args)
    train_set, test_set = build_datasets(cfg)
    tcfg = cfg.train_config()
    model = LinearSeparator.init(2, tcfg.filter_length, tcfg.init, seed=cfg.seed)
    report = train(model, train_set, tcfg, evaluate_after=False)
    table = evaluate(model, test_set or train_set)
    alpha = tcfg.loss.alpha if tcfg.loss.use_a2t else None
    cell = SweepCell(tcfg.loss.base_metric, alpha, "ok", table, report.trace, model.to_json())
    out = args.out or Path(".")
    _write_outputs(out, [cell], "train")
    (out / "model.json").write_text(json.dumps(model.to_json()))
    sys.stdout.write(format_table1([cell]))
    return EXIT_OK


def cmd_sweep(args):
    cfg = _load_config(args)

    def progress(cell):
        o = cell.table.get("overall", {})
        log.info("%s alpha=%s %s SNR=%.2f TSNR=%.2f", cell.label, cell.alpha, cell.status,
                 o.get("SNR", float("nan")), o.get("TSNR", float("nan")))

    cells = run_sweep(cfg, progress=progress)
    if args.out:
        _write_outputs(args.out, cells, "sweep")
    sys.stdout.write(format_table1(cells))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="reverbsep", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a seeded dataset of reverberant mixtures")
    _common(p)
    p.add_argument("-n", "--num", type=int, help="number of utterances (default: dataset_size)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("metrics", help="SNR / SI-SDR (and TSNR / TSI-SDR) of WAV pairs as CSV")
    p.add_argument("--estimates", nargs="+", required=True)
    p.add_argument("--references", nargs="+", required=True)
    p.add_argument("--mapped-directs", dest="mapped_directs", nargs="+",
                   help="the separator applied to each direct-path reference")
    p.add_argument("--directs", nargs="+", help="direct-path references")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("contour", help="equal-valued contour exemplars as CSV")
    p.add_argument("--direct", type=Path)
    p.add_argument("--late", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--length", type=int, default=256)
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_contour)

    for name, func, helptext in (
        ("train", cmd_train, "train one toy separator"),
        ("sweep", cmd_sweep, "train one toy separator per objective/alpha cell"),
    ):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--alpha", type=_alpha_list, help="comma-separated alpha values")
        p.add_argument("--metric", choices=["snr", "sisdr"])
        p.add_argument("--a2t", choices=["on", "off"])
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "contour" and bool(args.direct) != bool(args.late):
        parser.error("--direct and --late must be given together")
    try:
        return args.func(args)
    except (TrainingDivergenceError, DegenerateSignalError, GradientUndefinedError) as exc:
        print(f"reverbsep: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ReverbSepError, OSError) as exc:
        print(f"reverbsep: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
