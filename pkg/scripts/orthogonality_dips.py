"""Orthogonality fringes for one set state per basis.

Each fringe is computed ideal, then with the overlap (or, for the trivial
basis, the accidental rate) tuned to a target visibility, then sampled.

    python scripts/orthogonality_dips.py --target 0.932 --events 500
"""
import argparse
import math

import numpy as np

from biphoton.experiment import (
    BALANCED_HWP1,
    BALANCED_HWP2,
    ApparatusConfig,
    ScanSpec,
    expected_visibility,
    orthogonality_scan,
    tune_visibility,
)
from biphoton.qutrit import ProtocolStateId, protocol_state

PHI_GRID = tuple(np.deg2rad(np.arange(-180, 180, 5)))
HWP_GRID = tuple(np.deg2rad(np.arange(0, 90, 2.5)))

CASES = [
    # set state, phi13 (deg), scanned knob, imperfection knob
    (ProtocolStateId.ALPHA, 0.0, "hwp2", "accidental_rate"),
    (ProtocolStateId.ALPHA1, -120.0, "phi12", "overlap"),
    (ProtocolStateId.ALPHA2, 120.0, "phi12", "overlap"),
    (ProtocolStateId.ALPHA3, 0.0, "phi12", "overlap"),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--target", type=float, default=0.932)
    ap.add_argument("--events", type=float, default=500.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    print("set_state,variable,dip_deg,ideal_V,knob,knob_value,expected_V,sampled_V")
    for sid, phi13_deg, variable, knob in CASES:
        grid = HWP_GRID if variable == "hwp2" else PHI_GRID
        spec = ScanSpec(math.radians(phi13_deg), grid, seed=args.seed, variable=variable)
        if variable == "hwp2":
            base = ApparatusConfig(mean_events=args.events)
        else:
            base = ApparatusConfig(hwp1_angle=BALANCED_HWP1, hwp2_angle=BALANCED_HWP2,
                                   mean_events=args.events)
        s = protocol_state(sid)
        ideal = orthogonality_scan(s, spec, base.replace(mean_events=math.inf))
        tuned = tune_visibility(s, spec, base, args.target, knob=knob)
        sampled = orthogonality_scan(s, spec, tuned)
        print(",".join([
            sid.ascii_name, variable, f"{math.degrees(ideal.minimum_at):g}",
            f"{ideal.visibility:.4f}", knob, f"{getattr(tuned, knob):.4f}",
            f"{expected_visibility(s, spec, tuned):.4f}", f"{sampled.visibility:.4f}",
        ]))


if __name__ == "__main__":
    main()
