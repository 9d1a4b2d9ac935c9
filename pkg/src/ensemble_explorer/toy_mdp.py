"""A five-state deterministic MDP that stands in for the exploration tree.

It speaks the same ``actions`` / ``features`` / ``step`` / ``done`` protocol as
:class:`~ensemble_explorer.exploration.Exploration`, so the Q-learner in
:mod:`ensemble_explorer.policy` trains on it unchanged. Features are one-hot
over (state, action) pairs, which makes the linear Q-function tabular and
lets value iteration serve as an exact oracle.
"""

from __future__ import annotations

import numpy as np

from .policy import train_on

N_STATES = 5
N_ACTIONS = 2
TERMINAL = -1

# TRANSITIONS[s][a] = (next state, reward). Outside state 2, action 0 walks
# right along the chain and action 1 quits for a small reward; in state 2
# action 0 jumps straight to state 4 and action 1 walks. In state 3 the
# myopic choice (quit) is wrong, so the learner has to carry value back from
# state 4.
TRANSITIONS = (
    ((1, 0.2), (TERMINAL, 0.1)),
    ((2, 0.2), (TERMINAL, 0.1)),
    ((4, 0.8), (3, 0.2)),
    ((4, 0.1), (TERMINAL, 0.15)),
    ((TERMINAL, 1.0), (TERMINAL, 0.0)),
)

FEATURE_NAMES = tuple(f"s{s}_a{a}" for s in range(N_STATES) for a in range(N_ACTIONS))


def features(s: int, a: int) -> np.ndarray:
    f = np.zeros(N_STATES * N_ACTIONS)
    f[s * N_ACTIONS + a] = 1.0
    return f


class ToyMDP:
    """One episode starting in ``start``, cut off after ``horizon`` steps."""

    def __init__(self, start: int = 0, horizon: int = 20):
        self.state = start
        self.steps_left = horizon

    @property
    def done(self) -> bool:
        return self.state == TERMINAL or self.steps_left <= 0

    def actions(self) -> list:
        return list(range(N_ACTIONS))

    def features(self, a: int) -> np.ndarray:
        return features(self.state, a)

    def step(self, a: int) -> float:
        self.state, r = TRANSITIONS[self.state][a]
        self.steps_left -= 1
        return r


def value_iteration(gamma: float = 0.99, tol: float = 1e-12):
    """Optimal Q table (states x actions) by repeated Bellman backups."""
    q = np.zeros((N_STATES, N_ACTIONS))
    while True:
        v = q.max(axis=1)
        new = np.array([[r + (0.0 if nxt == TERMINAL else gamma * v[nxt]) for nxt, r in row]
                        for row in TRANSITIONS])
        if np.max(np.abs(new - q)) < tol:
            return new
        q = new


def oracle_policy(gamma: float = 0.99) -> np.ndarray:
    return np.argmax(value_iteration(gamma), axis=1)


def greedy_policy(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return np.argmax(w.reshape(N_STATES, N_ACTIONS), axis=1)


def train_toy(episodes: int = 500, seed: int = 0, alpha: float = 0.05, gamma: float = 0.99,
              epsilon: float = 0.2):
    """Q-learn the toy MDP, starting episodes round-robin over the five states."""
    return train_on(lambda i: ToyMDP(start=i % N_STATES), episodes, seed, alpha, gamma, epsilon,
                    feature_names=FEATURE_NAMES, schema_version=0)
