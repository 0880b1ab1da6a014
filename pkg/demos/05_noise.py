"""Dark counts and phase flips.

Both degrade the best achievable receiver; the agents keep tracking it.
p_f = 0.5 erases all information, and so does p_dc = 1.
"""
from qreceiver import ExperimentConfig, PolicySpec, sweep

base = ExperimentConfig(policy=PolicySpec("thompson"), T=50_000, n_agents=8)
for parameter, values in (("p_dc", [0.0, 0.25, 0.5, 0.75, 1.0]), ("p_f", [0.5, 0.625, 0.75, 0.875, 1.0])):
    print(parameter)
    for p in sweep(parameter, values, base, 50_000):
        print(f"  {p.value:5.3f}  P*={p.P_star:.4f}  P_t={p.P_t:.4f}  R_t={p.R_t:.4f}")
