"""Does a trained agent learn the maximum-likelihood guessing rule?

After training, compare the sign of Q(h, "-") - Q(h, "+") with the model's
ML guess for every full history the agent visited often.
"""
import numpy as np

from qreceiver import Agent, PolicySpec, ReceiverConfig
from qreceiver.agents import encode_history
from qreceiver.cli import eval_rows

rc = ReceiverConfig(beta_grid=tuple(np.round(np.linspace(-1, 1, 5), 12)))
agent = Agent(rc, PolicySpec("ucb"), np.random.default_rng(0))
agent.train(300_000)

agree = total = 0
for b0, b1, o1, o2, diff, ml in eval_rows(agent.table, rc, use_posterior=False):
    h = encode_history([(rc.beta_index(b0), o1), (rc.beta_index(b1), o2)], rc.n_beta)
    if agent.table.visits[agent.table.row(2, h)].sum() >= 200 and diff != 0:
        total += 1
        agree += int((diff > 0) == (ml == 1))
print(f"learned guess agrees with the ML rule on {agree}/{total} well-visited histories")
