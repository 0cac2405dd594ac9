"""SARSA with linear function approximation.

This module provides the learning core shared by the learned schedulers:

- ``feature_vector`` / ``q_value``: block-sparse features ``2^-v`` and the
  linear Q estimate
- ``init_theta``: optimistic initialization
- ``sarsa_update``: one TD(0) on-policy update
- ``select_action``: epsilon-greedy choice over a feasible action set
- ``rate_schedule``: learning and exploration rates per kernel phase
- ``storage_estimate`` / ``tabular_size``: hardware cost arithmetic
- ``SarsaAgent``: weights, parameters, random source and counters bundled

θ has layout ``[action 0 block | action 1 block | ...]`` with one weight per
active state variable in every block.
"""

from __future__ import annotations

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

import logging
import math
from collections.abc import Mapping, Sequence
from pathlib import Path

import numpy as np

from warpsched.config import RlParams
from warpsched.errors import ConfigError, SimulationFault

logger = logging.getLogger(__name__)


def feature_block(buckets: Sequence[int]) -> np.ndarray:
    """Per-variable features ``2^-v`` of a bucketed state."""
    return np.exp2(-np.asarray(buckets, dtype=float))


def feature_vector(buckets: Sequence[int], action: int, num_actions: int) -> np.ndarray:
    """Full feature vector of ``(state, action)``.

    Example:
        >>> feature_vector([0, 1, 3], 1, 2).tolist()
        [0.0, 0.0, 0.0, 1.0, 0.5, 0.125]

    """
    if not 0 <= action < num_actions:
        raise ValueError(f"action {action} outside 0..{num_actions - 1}")
    n = len(buckets)
    phi = np.zeros(n * num_actions)
    phi[action * n : (action + 1) * n] = feature_block(buckets)
    return phi


def q_value(theta: np.ndarray, phi: np.ndarray) -> float:
    return float(np.dot(theta, phi))


def init_theta(r_max: float, gamma: float, num_vars: int, num_actions: int) -> np.ndarray:
    """Optimistic weights: Q is ``r_max / (1 - gamma)`` at the all-zero state.

    Raises:
        ConfigError: If ``gamma >= 1`` (no finite ceiling)

    """
    if not gamma < 1.0:
        raise ConfigError(f"gamma must be < 1 for optimistic initialization, got {gamma}")
    if num_vars < 1 or num_actions < 1:
        raise ConfigError("need at least one state variable and one action")
    return np.full(num_vars * num_actions, (r_max / (1.0 - gamma)) / num_vars)


def sarsa_update(
    theta: np.ndarray,
    phi_prev: np.ndarray,
    reward: float,
    q_curr: float,
    alpha: float,
    gamma: float,
) -> tuple[np.ndarray, float]:
    """One SARSA step: ``θ + α·δ·φ_prev`` with ``δ = r + γ·q_curr - Q(φ_prev)``.

    ``Q(φ_prev)`` is evaluated on the weights before the update.

    Returns:
        tuple: Updated weights (a new array) and the TD error

    Raises:
        SimulationFault: If the TD error or the new weights are not finite

    """
    q_prev = q_value(theta, phi_prev)
    delta = reward + gamma * q_curr - q_prev
    if not math.isfinite(delta):
        raise SimulationFault(
            "non-finite TD error",
            {"reward": reward, "q_curr": q_curr, "q_prev": q_prev, "alpha": alpha, "gamma": gamma},
        )
    new = theta + alpha * delta * phi_prev
    if not np.all(np.isfinite(new)):
        raise SimulationFault("non-finite weights after update", {"delta": delta, "alpha": alpha})
    return new, delta


def select_action(
    q_values: Mapping[int, float],
    epsilon: float,
    rng: np.random.Generator,
) -> tuple[int, bool]:
    """Epsilon-greedy choice among feasible actions.

    Exploration is uniform over the feasible set; exploitation takes the
    highest Q with ties going to the lowest action index. One uniform number
    is always drawn so the random stream does not depend on epsilon.

    Args:
        q_values: Feasible action index -> Q value
        epsilon: Exploration probability
        rng: Random source

    Returns:
        tuple: Chosen action and whether it was an exploration step

    Example:
        >>> select_action({0: 5.0, 1: 7.0, 2: 3.0}, 0.0, np.random.default_rng(0))
        (1, False)

    """
    if not q_values:
        raise ValueError("select_action needs a nonempty feasible set")
    if rng.random() < epsilon:
        actions = sorted(q_values)
        return actions[int(rng.integers(len(actions)))], True
    best = max(q_values.values())
    return min(a for a, q in q_values.items() if q == best), False


def rate_schedule(phase: int, step: int, params: RlParams) -> tuple[float, float]:
    """Learning and exploration rate for a decision.

    Phase 1 (TBs still waiting for an SM) decays both rates by ``decay`` every
    ``decay_interval`` decisions, floored at ``floor_fraction`` of their
    initial values. Phase 2 holds the initial values.

    Example:
        >>> rate_schedule(1, 100_000, RlParams())
        (0.045, 0.02)

    """
    if phase not in (1, 2):
        raise ValueError(f"phase must be 1 or 2, got {phase}")
    if phase == 2:
        return params.alpha, params.epsilon
    factor = params.decay ** (step / params.decay_interval)
    floor = params.floor_fraction
    return (
        max(params.alpha * factor, params.alpha * floor),
        max(params.epsilon * factor, params.epsilon * floor),
    )


def storage_estimate(num_vars: int, num_actions: int) -> int:
    """Registers per SM: θ, one φ block and four scalars.

    Example:
        >>> storage_estimate(8, 5)
        52

    """
    if num_vars < 1 or num_actions < 1:
        raise ValueError("num_vars and num_actions must be >= 1")
    return num_vars * (num_actions + 1) + 4


def tabular_size(bucket_counts: Sequence[int], num_actions: int) -> int:
    """Entries of the equivalent Q table.

    Example:
        >>> tabular_size([4] * 7, 5)
        81920

    """
    return math.prod(bucket_counts) * num_actions


class SarsaAgent:
    """One linear-FA SARSA learner.

    Args:
        params: Learning parameters
        num_vars: Number of active state variables (N)
        num_actions: Number of actions (A)
        seed: Seed of the exploration random source

    """

    def __init__(
        self,
        params: RlParams,
        num_vars: int,
        num_actions: int,
        seed: int | Sequence[int] = 0,
    ) -> None:
        self.params = params
        self.num_vars = num_vars
        self.num_actions = num_actions
        self.theta = init_theta(params.r_max, params.gamma, num_vars, num_actions)
        self.rng = np.random.default_rng(seed)
        self.updates = 0
        self.decisions = 0
        self.explored = 0

    @property
    def q_ceiling(self) -> float:
        return self.params.r_max / (1.0 - self.params.gamma)

    def q_values(self, buckets: Sequence[int]) -> np.ndarray:
        """Q of every action in the bucketed state."""
        return self.theta.reshape(self.num_actions, self.num_vars) @ feature_block(buckets)

    def select(
        self, buckets: Sequence[int], feasible: Sequence[int], epsilon: float
    ) -> tuple[int, bool, np.ndarray]:
        """Choose an action; returns (action, explored, Q of every action)."""
        q = self.q_values(buckets)
        action, explored = select_action({a: float(q[a]) for a in feasible}, epsilon, self.rng)
        self.decisions += 1
        self.explored += explored
        return action, explored, q

    def greedy(self, buckets: Sequence[int], feasible: Sequence[int]) -> int:
        q = self.q_values(buckets)
        best = max(float(q[a]) for a in feasible)
        return min(a for a in feasible if float(q[a]) == best)

    def update(
        self,
        prev_buckets: Sequence[int],
        prev_action: int,
        reward: float,
        q_curr: float,
        alpha: float,
    ) -> float:
        """Apply one SARSA update for the previous (state, action); returns δ.

        Only the previous action's block of θ changes.
        """
        n = self.num_vars
        block = slice(prev_action * n, (prev_action + 1) * n)
        f = feature_block(prev_buckets)
        q_prev = float(np.dot(self.theta[block], f))
        delta = reward + self.params.gamma * q_curr - q_prev
        if not math.isfinite(delta):
            raise SimulationFault(
                "non-finite TD error",
                {
                    "reward": reward,
                    "q_curr": q_curr,
                    "q_prev": q_prev,
                    "buckets": list(prev_buckets),
                    "action": prev_action,
                },
            )
        self.theta[block] += alpha * delta * f
        self.updates += 1
        return delta

    def export_theta(self, path: str | Path) -> Path:
        """Write θ as an A x N text matrix, one row per action."""
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(p, self.theta.reshape(self.num_actions, self.num_vars), fmt="%.17g")
        return p

    def import_theta(self, path: str | Path) -> None:
        """Load a θ matrix written by ``export_theta``.

        Raises:
            ConfigError: If the matrix shape does not match this agent

        """
        data = np.loadtxt(Path(path), ndmin=2)
        if data.shape != (self.num_actions, self.num_vars):
            raise ConfigError(
                f"{path}: theta shape {data.shape} does not match "
                f"({self.num_actions}, {self.num_vars})"
            )
        self.theta = data.reshape(-1).astype(float)
