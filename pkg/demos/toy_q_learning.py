"""Linear Q-learning on a five-state chain with a known optimum.

Value iteration gives the optimal action in every state. Q-learning with
one-hot (state, action) features and epsilon-greedy exploration should recover
it from experience alone; state 3 is the one where the myopic choice is wrong.

Run with ``python3 demos/toy_q_learning.py``.
"""

import numpy as np

from ensemble_explorer.toy_mdp import N_ACTIONS, N_STATES, greedy_policy, oracle_policy, train_toy, value_iteration

q_star = value_iteration(0.99)
print("optimal Q:\n", np.round(q_star, 4))
print("optimal policy:", oracle_policy())

hits = 0
for seed in range(20):
    p = train_toy(500, seed=seed)
    learned = greedy_policy(p.w)
    hits += np.array_equal(learned, oracle_policy())
    if seed < 3:
        print(f"seed {seed}: learned Q\n", np.round(p.w.reshape(N_STATES, N_ACTIONS), 4))
print(f"{hits}/20 seeds recover the optimal policy")
