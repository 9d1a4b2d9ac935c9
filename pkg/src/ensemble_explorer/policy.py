"""Linear Q-function policy: action selection, TD updates, training and persistence.

``Q(s, a) = w . f(s, a)`` where ``f`` is the state featurization conditioned
on the candidate action. Training is plain one-step Q-learning with an
epsilon-greedy behaviour policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .estimators import derive_seed
from .exploration import FEATURE_NAMES, N_FEATURES, Clock, Exploration, RunConfig

SCHEMA_VERSION = 1
SCHEMA_DIMS = {SCHEMA_VERSION: N_FEATURES}
HEADER = "aprl-policy"


class PolicyError(ValueError):
    pass


class PolicyFormatError(PolicyError):
    pass


class SchemaMismatch(PolicyError):
    pass


class PolicyDiverged(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class PolicyWeights:
    w: np.ndarray
    schema_version: int = SCHEMA_VERSION
    gamma: float = 0.99
    alpha: float = 0.05
    epsilon: float = 0.2
    training_episodes: int = 0
    feature_names: tuple = field(default=FEATURE_NAMES, compare=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        object.__setattr__(self, "w", w)
        dim = SCHEMA_DIMS.get(self.schema_version, len(self.feature_names))
        if w.shape != (dim,) or len(self.feature_names) != dim:
            raise SchemaMismatch(f"expected {dim} weights, got {w.shape}")
        if not 0.0 <= self.gamma < 1.0:
            raise PolicyError("gamma must lie in [0, 1)")
        if self.alpha <= 0.0:
            raise PolicyError("alpha must be positive")
        if not 0.0 <= self.epsilon <= 1.0:
            raise PolicyError("epsilon must lie in [0, 1]")

    @classmethod
    def zeros(cls, **kw) -> "PolicyWeights":
        names = kw.get("feature_names", FEATURE_NAMES)
        return cls(np.zeros(len(names)), **kw)


def default_policy() -> PolicyWeights:
    """Hand-set weights for use without a trained policy file.

    Fits every estimator on a data node before branching further, favours
    transforms that paid off before, and shifts from untried data nodes early
    in the budget to the best-performing ones late.
    """
    w = dict.fromkeys(FEATURE_NAMES, 0.0)
    w.update(
        kind_estimator=0.5,
        estimator_mean_perf=0.3,
        kind_transform=0.3,
        transform_best_gain=4.0,
        transform_mean_gain=1.0,
        kind_hpo=0.0,
        node_best_perf=0.5,
        remaining_x_node_best_perf=-1.0,
        node_depth=-0.3,
    )
    return PolicyWeights(np.array([w[n] for n in FEATURE_NAMES]), training_episodes=0)


def q_value(policy, f) -> float:
    w = policy.w if isinstance(policy, PolicyWeights) else np.asarray(policy, dtype=float)
    f = np.asarray(f, dtype=float)
    if w.shape != f.shape:
        raise PolicyError(f"weight/feature length mismatch: {w.shape} vs {f.shape}")
    return float(w @ f)


def greedy_index(q: np.ndarray) -> int:
    """Index of the largest Q value; ties go to the earliest action."""
    return int(np.argmax(q))


def select_action(policy, env, actions=None, epsilon: float = 0.0, rng=None):
    """Pick an action from ``env``: uniformly at random with probability ``epsilon``, else greedily."""
    actions = env.actions() if actions is None else actions
    if not actions:
        raise PolicyError("no legal actions")
    if epsilon > 0.0:
        if rng is None:
            raise PolicyError("epsilon-greedy selection needs an rng")
        if rng.random() < epsilon:
            return actions[int(rng.integers(len(actions)))]
    w = policy.w if isinstance(policy, PolicyWeights) else np.asarray(policy, dtype=float)
    q = np.array([w @ env.features(a) for a in actions])
    return actions[greedy_index(q)]


def td_update(policy: PolicyWeights, f, r: float, next_best_q: float, terminal: bool,
              alpha: float | None = None) -> PolicyWeights:
    """One Q-learning step: ``w += alpha * (r + gamma * max Q' - Q) * f``.

    ``alpha`` overrides the policy's own step size for this update only.
    """
    f = np.asarray(f, dtype=float)
    alpha = policy.alpha if alpha is None else alpha
    target = r + (0.0 if terminal else policy.gamma * next_best_q)
    w = policy.w + alpha * (target - q_value(policy, f)) * f
    if not np.all(np.isfinite(w)):
        raise PolicyDiverged("weights became non-finite")
    return replace(policy, w=w)


def run_episode(policy: PolicyWeights, env, rng) -> PolicyWeights:
    """Play ``env`` to the end with epsilon-greedy actions, updating after every step."""
    actions = [] if env.done else env.actions()
    feats = np.array([env.features(a) for a in actions])
    while actions:
        if rng.random() < policy.epsilon:
            idx = int(rng.integers(len(actions)))
        else:
            idx = greedy_index(feats @ policy.w)
        f = feats[idx]
        r = env.step(actions[idx])
        actions = [] if env.done else env.actions()
        next_q = 0.0
        if actions:
            feats = np.array([env.features(a) for a in actions])
            next_q = float(np.max(feats @ policy.w))
        policy = td_update(policy, f, r, next_q, terminal=not actions)
    return policy


def train_on(env_factory, episodes: int, seed: int = 0, alpha: float = 0.05, gamma: float = 0.99,
             epsilon: float = 0.2, feature_names=FEATURE_NAMES, schema_version=SCHEMA_VERSION):
    """Q-learning over ``episodes`` environments produced by ``env_factory(i)``.

    Weights start at zero. Any environment with ``actions()``, ``features(a)``,
    ``step(a) -> reward`` and ``done`` works.
    """
    policy = PolicyWeights(np.zeros(len(feature_names)), schema_version=schema_version,
                           gamma=gamma, alpha=alpha, epsilon=epsilon,
                           feature_names=tuple(feature_names))
    rng = np.random.default_rng(derive_seed(seed, "train"))
    for i in range(episodes):
        policy = run_episode(policy, env_factory(i), rng)
    return replace(policy, training_episodes=episodes)


def train(corpus, alpha: float = 0.05, gamma: float = 0.99, epsilon: float = 0.2,
          episodes: int = 10, seed: int = 0, config: RunConfig | None = None) -> PolicyWeights:
    """Train exploration weights over a corpus of ``(Dataset, t_max[, iteration_cap])`` items.

    Items are visited round-robin in list order, one full exploration run per
    episode.
    """
    corpus = list(corpus)
    if not corpus:
        raise PolicyError("empty training corpus")

    def make(i):
        item = corpus[i % len(corpus)]
        d, t_max = item[0], item[1]
        cap = item[2] if len(item) > 2 else None
        return Exploration(d, Clock(t_max, cap), config, seed=derive_seed(seed, "episode", i))

    return train_on(make, episodes, seed, alpha, gamma, epsilon)


# -- persistence ------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_policy(policy: PolicyWeights, path) -> None:
    lines = [
        f"{HEADER} v{policy.schema_version}",
        f"gamma={_fmt(policy.gamma)} alpha={_fmt(policy.alpha)} "
        f"epsilon={_fmt(policy.epsilon)} episodes={policy.training_episodes}",
    ]
    lines += [f"{n}\t{_fmt(v)}" for n, v in zip(policy.feature_names, policy.w)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_policy(path) -> PolicyWeights:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise PolicyFormatError(f"{path}: not UTF-8") from exc
    lines = text.splitlines()
    if len(lines) < 2 or not lines[0].startswith(HEADER + " v"):
        raise PolicyFormatError(f"{path}: missing policy header")
    try:
        version = int(lines[0][len(HEADER) + 2:])
    except ValueError:
        raise PolicyFormatError(f"{path}: bad schema version") from None
    if version not in SCHEMA_DIMS:
        raise SchemaMismatch(f"{path}: schema version {version} is not supported")
    try:
        meta = dict(tok.split("=", 1) for tok in lines[1].split())
        gamma, alpha = float(meta["gamma"]), float(meta["alpha"])
        epsilon, episodes = float(meta["epsilon"]), int(meta["episodes"])
    except (KeyError, ValueError):
        raise PolicyFormatError(f"{path}: malformed metadata line") from None
    body = [ln for ln in lines[2:] if ln.strip()]
    if len(body) != SCHEMA_DIMS[version]:
        raise PolicyFormatError(f"{path}: expected {SCHEMA_DIMS[version]} weights, found {len(body)}")
    names, w = [], []
    for ln in body:
        parts = ln.split("\t")
        if len(parts) != 2:
            raise PolicyFormatError(f"{path}: malformed weight line {ln!r}")
        try:
            val = float(parts[1])
        except ValueError:
            raise PolicyFormatError(f"{path}: malformed weight {parts[1]!r}") from None
        if not math.isfinite(val):
            raise PolicyFormatError(f"{path}: non-finite weight")
        names.append(parts[0])
        w.append(val)
    if tuple(names) != FEATURE_NAMES:
        raise SchemaMismatch(f"{path}: feature names do not match schema v{version}")
    return PolicyWeights(np.array(w), version, gamma, alpha, epsilon, episodes)
