#!/usr/bin/env python3
"""Contrastive pretext benchmark with same-recording distractors.

Runs the 3x3 grid on 20-second windows over a slow-rhythm dataset and writes
the loss table; the chance plateau for 20 distractors is ln(21) ~ 3.045.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from eegnorm.cpc import CpcConfig, DistractorMode
from eegnorm.harness import GridConfig, render_table, run_grid
from eegnorm.synth import PlantedRule, SynthSpec


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/cpc_same")
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    cfg = GridConfig(
        task="cpc_same",
        seeds=tuple(range(args.seeds)),
        synth=SynthSpec(
            n_channels=8,
            duration_s=160.0,
            osc_amp=10.0,
            pink_amp=2.0,
            gain_spread=0.3,
            burst_rate=1.0,
            master_seed=21,
        ),
        rule=PlantedRule(base_freq=0.37, age_slope=0.0, gender_delta=0.0),
        cpc=CpcConfig(mode=DistractorMode.SAME_RECORDING, batch_size=32, epochs=10),
        n_subjects=40,
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
