"""One detector, one displacement.

A coherent pulse of amplitude +alpha or -alpha arrives with equal odds.  We
displace it by beta and ask whether an on/off detector clicks.
"""
import numpy as np

from qreceiver import ReceiverConfig, helstrom_bound, homodyne_limit
from qreceiver.planner import exhaustive_optimal, single_layer_ml_success

alpha = 0.4
print(f"alpha = {alpha}, mean photon number {alpha**2:.2f}")
print(f"Helstrom bound       {helstrom_bound(alpha):.6f}")
print(f"homodyne (Gaussian)  {homodyne_limit(alpha):.6f}")

# Kennedy receiver: displace so that +alpha becomes vacuum
print(f"Kennedy, beta=-alpha {single_layer_ml_success(alpha, -alpha):.6f}")

# scanning beta shows the optimum sits beyond the nulling point
betas = np.linspace(-1.5, 0.5, 2001)
values = np.array([single_layer_ml_success(alpha, b) for b in betas])
best = betas[values.argmax()]
print(f"best beta on a fine scan {best:.3f} -> {values.max():.6f}")

# the learning experiments use a 21-point grid with step 0.1
p, tree = exhaustive_optimal(alpha, ReceiverConfig(L=1))
print(f"best on the 21-point grid: beta={tree.betas[0][0]} -> {p:.6f}")
