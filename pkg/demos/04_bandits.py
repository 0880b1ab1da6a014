"""Single-layer receivers as three-armed bandits.

Arms are displacements {0, -alpha, beta*}; the reward is a correct guess.
Cumulative regret grows linearly for fixed-epsilon exploration and
logarithmically for UCB and Thompson sampling.
"""
import math

from qreceiver import PolicySpec
from qreceiver.bandit import (
    lai_robbins_constant,
    make_problem_from_displacements,
    problem_1_displacements,
    run_bandit_ensemble,
    ucb1_regret_upper_bound,
)

problem = make_problem_from_displacements(0.4, problem_1_displacements())
print("arm values", [round(v, 4) for v in problem.arms], "gaps", problem.gaps.round(4))
c_lr = lai_robbins_constant(problem)

T = 10_000
for spec in (PolicySpec("epsilon_greedy", 0.3), PolicySpec("ucb"), PolicySpec("thompson")):
    ens = run_bandit_ensemble(problem, spec, T, n_agents=300)
    L_t = ens.mean_cumulative
    print(f"{spec.label:>11}: L_100={L_t[99]:7.1f}  L_1000={L_t[999]:7.1f}  L_T={L_t[-1]:7.1f}"
          f"  simple regret {ens.mean_simple[-1]:.4f}")
print(f"Lai-Robbins reference C*log T = {c_lr * math.log(T):.1f}, UCB-1 bound {ucb1_regret_upper_bound(problem, T):.0f}")
