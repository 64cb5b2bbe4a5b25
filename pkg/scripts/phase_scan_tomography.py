"""Tomography across a piezo phase scan, with sinusoid fits per channel.

    python scripts/phase_scan_tomography.py --events 500 --phi13 0 --seed 3
"""
import argparse
import math

import numpy as np

from biphoton.experiment import BALANCED_HWP1, BALANCED_HWP2, ApparatusConfig, ScanSpec, tomography_scan
from biphoton.tomography import OFF_DIAGONAL_CHANNELS, fit_phase_scan


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=float, default=500.0, help="per scan point; inf for noiseless")
    ap.add_argument("--phi13", type=float, default=0.0, help="degrees")
    ap.add_argument("--step", type=float, default=15.0, help="degrees")
    ap.add_argument("--overlap", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    phi13 = math.radians(args.phi13)
    grid = tuple(np.deg2rad(np.arange(0, 360, args.step)))
    cfg = ApparatusConfig(hwp1_angle=BALANCED_HWP1, hwp2_angle=BALANCED_HWP2, phi13=phi13,
                          overlap=args.overlap, mean_events=args.events)
    points = tomography_scan(ScanSpec(phi13, grid, seed=args.seed), cfg)

    print("phi12_deg," + ",".join(OFF_DIAGONAL_CHANNELS))
    for pt in points:
        vals = [f"{pt.moments.channel(c):.5f}" for c in OFF_DIAGONAL_CHANNELS]
        print(f"{math.degrees(pt.phi12):g}," + ",".join(vals))

    fit = fit_phase_scan((pt.phi12, pt.moments) for pt in points)
    print("\nchannel,amplitude,stderr,offset_deg,baseline")
    for c in OFF_DIAGONAL_CHANNELS:
        ch = fit.channels[c]
        print(f"{c},{ch.amplitude:.5f},{ch.amplitude_stderr:.5f},"
              f"{math.degrees(ch.offset):.2f},{ch.baseline:.5f}")


if __name__ == "__main__":
    main()
