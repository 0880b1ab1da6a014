"""Optimal layered receivers by backward induction and belief-state DP.

With L layers the pulse is split across L detectors.  Exhaustive search
enumerates every history; the belief DP replaces the history by the posterior
probability of +alpha and scales to more layers.  In "adaptive" mode the
planner also chooses how much light each layer taps.
"""
import numpy as np

from qreceiver import ReceiverConfig, helstrom_bound
from qreceiver.planner import BeliefGrid, dp_optimal_value, dp_policy_extract, exact_success_probability, exhaustive_optimal

alpha = 0.4
cfg = ReceiverConfig(alpha=alpha, L=2)
p_ex, tree = exhaustive_optimal(alpha, cfg)
grid = BeliefGrid(1001)
p_dp = dp_optimal_value(alpha, cfg, grid)
print(f"L=2 exhaustive {p_ex:.7f}  belief DP {p_dp:.7f}")
print("first displacement", tree.betas[0][0], "second layer", tree.betas[1], "guesses", tree.guesses)
print(f"tree extracted from DP scores {exact_success_probability(alpha, dp_policy_extract(grid), cfg):.7f}")

print("\ngap to Helstrom as layers are added (alpha=0.4, 21-point grid)")
print(" L   fixed      adaptive")
for L in range(1, 6):
    f = dp_optimal_value(alpha, ReceiverConfig(alpha=alpha, L=L))
    a = dp_optimal_value(alpha, ReceiverConfig(alpha=alpha, L=L, attenuation_mode="adaptive"))
    h = helstrom_bound(alpha)
    print(f"{L:2d}  {f - h:+.5f}  {a - h:+.5f}")

# at higher energy, adaptive attenuation with 2 layers can beat 3 fixed layers
wide = tuple(np.round(np.linspace(-2, 2, 81), 12))
for a2 in (0.5, 1.0, 1.5):
    a = np.sqrt(a2)
    ad2 = dp_optimal_value(a, ReceiverConfig(alpha=a, L=2, beta_grid=wide, attenuation_mode="adaptive"))
    fx3 = dp_optimal_value(a, ReceiverConfig(alpha=a, L=3, beta_grid=wide))
    print(f"|alpha|^2={a2}: adaptive L=2 {ad2:.6f}  fixed L=3 {fx3:.6f}")
