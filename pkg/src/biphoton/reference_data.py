"""Published measurement values used as regression fixtures."""
from __future__ import annotations

import math

import numpy as np

from .qutrit import ProtocolStateId

# raw reconstruction of beta'' printed to three decimals
MEASURED_BETA2_RHO = np.array(
    [
        [0.355, -0.054 - 0.210j, 0.315 - 0.010j],
        [-0.054 + 0.210j, 0.340, -0.106 + 0.262j],
        [0.315 + 0.010j, -0.106 - 0.262j, 0.305],
    ]
)
MEASURED_BETA2_RHO.setflags(write=False)

REPORTED_EIGENVALUES = (0.877, 0.136, -0.013)
REPORTED_EIGENVECTORS = (
    (0.587, -0.173 + 0.521j, 0.594 - 0.071j),
    (0.642, 0.379 - 0.649j, 0.048 + 0.143j),
    (0.493, -0.287 + 0.224j, -0.769 - 0.178j),
)
REPORTED_PRINCIPAL_WEIGHT = 0.878
REPORTED_PRINCIPAL_FIDELITY = 0.9903
# tolerance inherited from three-decimal printing of the matrix entries
PRINT_TOLERANCE = 0.005

REPORTED_MLE_FIDELITIES = {
    ProtocolStateId.ALPHA1: 0.9989,
    ProtocolStateId.BETA1: 0.9967,
    ProtocolStateId.GAMMA1: 0.9883,
    ProtocolStateId.ALPHA2: 0.9967,
    ProtocolStateId.BETA2: 0.9989,
    ProtocolStateId.GAMMA2: 0.9883,
    ProtocolStateId.ALPHA3: 0.9883,
    ProtocolStateId.BETA3: 0.9989,
    ProtocolStateId.GAMMA3: 0.9967,
}
MLE_FIDELITY_TOLERANCE = 0.003
REPORTED_EVENTS = 500
REPORTED_QUANTILES = {"q05": 0.9842, "q95": 0.9991}

REPORTED_VISIBILITY = 0.932
REPORTED_VISIBILITY_RANGE = (0.92, 0.95)

# plate angles (degrees) quoted for the alpha''' set state; the plate sign
# convention behind them is not stated, so they are a cross-check only
REPORTED_FILTER_ANGLES_ALPHA3 = {"chi1": 28.3, "theta1": -33.5, "chi2": -24.0, "theta2": -2.0}

# type-I/type-II overlap that makes the model beta'' resemble the raw matrix
MODEL_OVERLAP_BETA2 = 0.93

NINE_STATE_PHASES_DEG = {
    ProtocolStateId.ALPHA1: (0, 0),
    ProtocolStateId.BETA1: (120, -120),
    ProtocolStateId.GAMMA1: (-120, 120),
    ProtocolStateId.ALPHA2: (-120, -120),
    ProtocolStateId.BETA2: (120, 0),
    ProtocolStateId.GAMMA2: (0, 120),
    ProtocolStateId.ALPHA3: (120, 120),
    ProtocolStateId.BETA3: (-120, 0),
    ProtocolStateId.GAMMA3: (0, -120),
}
"""(phi12, phi13) in degrees preparing each non-trivial state at balanced HWPs."""


def nine_state_phases(state_id: ProtocolStateId) -> tuple[float, float]:
    phi12, phi13 = NINE_STATE_PHASES_DEG[state_id]
    return math.radians(phi12), math.radians(phi13)
