"""A small alpha sweep with the linear FIR separator.

The default here is a quick run (16 scenes of 1 s, 100 epochs). Pass
--full for the 64-scene, 4 s, 200-epoch setting used by the acceptance tests.

Run: python demos/04_alpha_sweep.py [--full] [--seed N]
"""

import argparse
import sys

from reverbsep.experiment import ExperimentConfig, format_table1, run_sweep

parser = argparse.ArgumentParser()
parser.add_argument("--full", action="store_true")
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

overrides = {"seed": args.seed, "alpha_grid": [0.0, 0.01, 0.1, 0.3, 1.0, 3.0, 10.0]}
if not args.full:
    overrides.update(dataset_size=16, test_size=8, scene={"duration_s": 1.0}, train={"epochs": 100})
cfg = ExperimentConfig.from_dict(overrides)


def progress(cell):
    o = cell.table["overall"]
    print(f"  {cell.label:8s} alpha={cell.alpha!s:5s} SNR {o['SNR']:6.2f}  TSNR {o['TSNR']:6.2f}", file=sys.stderr)


cells = run_sweep(cfg, progress=progress)
print(format_table1(cells))
