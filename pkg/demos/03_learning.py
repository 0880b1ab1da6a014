"""Model-free agents learning the two-layer receiver.

The agent never sees the physics: it picks a displacement per layer from a
21-point grid, watches the clicks and finally guesses.  P_t is the exact
success probability of its current greedy policy.
"""
from qreceiver import ExperimentConfig, PolicySpec, ReceiverConfig, run_ensemble
from qreceiver.env import homodyne_limit
from qreceiver.planner import exhaustive_optimal

rc = ReceiverConfig()
p_star, _ = exhaustive_optimal(rc.alpha, rc)
print(f"P* = {p_star:.4f}, homodyne = {homodyne_limit(rc.alpha):.4f}")

checkpoints = (100, 1_000, 10_000, 100_000)
for spec in (PolicySpec("epsilon_greedy", 0.3), PolicySpec("exp_greedy"), PolicySpec("ucb"), PolicySpec("thompson")):
    curves = run_ensemble(ExperimentConfig(rc, spec, T=100_000, n_agents=8, checkpoints=checkpoints))
    cells = "  ".join(f"t={t:>6}: R={r:.3f} P={p:.3f}" for t, r, p in zip(curves.t, curves.R_mean, curves.P_mean))
    print(f"{spec.label:>11}  {cells}")
