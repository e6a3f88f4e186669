#!/usr/bin/env python3
"""Generate a small synthetic dataset on disk (.eegn + .meta files).

Useful for exercising the CLI and external consumers of the file formats.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from eegnorm.recio import write_recording
from eegnorm.synth import PlantedRule, SynthSpec, gen_dataset


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/dataset")
    parser.add_argument("--subjects", type=int, default=10)
    parser.add_argument("--groups", type=int, default=2)
    parser.add_argument("--channels", type=int, default=8)
    parser.add_argument("--duration", type=float, default=20.0)
    parser.add_argument("--seed", type=int, default=17)
    args = parser.parse_args()

    spec = SynthSpec(
        n_channels=args.channels,
        duration_s=args.duration,
        master_seed=args.seed,
        gain_spread=0.3,
    )
    ds = gen_dataset(spec, args.subjects, args.groups, rule=PlantedRule(base_freq=8.0))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for rec in ds:
        write_recording(rec, out / f"{rec.id}.eegn")
    print(f"wrote {len(ds)} recordings to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
