#!/usr/bin/env python3
"""Run the full 3x3 gender-classification grid on the desk-scale dataset.

Writes report.txt / report.tsv / per-run logs under --out (default
results/gender) and prints the rendered table.  With per-channel gain spread
on the generator, window-level within-channel scaling should clearly beat the
unnormalized baseline.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from eegnorm.harness import GridConfig, render_table, run_grid
from eegnorm.supervised import SupervisedConfig
from eegnorm.synth import PlantedRule, SynthSpec


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/gender")
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    cfg = GridConfig(
        task="gender",
        seeds=tuple(range(args.seeds)),
        synth=SynthSpec(
            n_channels=16,
            duration_s=60.0,
            osc_amp=14.0,
            pink_amp=2.5,
            gain_spread=0.5,
            master_seed=11,
        ),
        rule=PlantedRule(base_freq=8.0, age_slope=0.05, gender_delta=5.0),
        sup=SupervisedConfig(task="gender", epochs=10, hidden_dim=64),
        n_subjects=50,
        n_groups=5,
        test_group="g3",
        workers=args.workers,
    )
    report = run_grid(cfg)

    from eegnorm.cli import _write_grid_outputs

    out = Path(args.out)
    _write_grid_outputs(report, out)
    print(render_table(report))
    print(f"written to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
