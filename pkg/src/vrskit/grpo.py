"""Group-relative advantages and the clipped surrogate objective.

Values only: gradients belong to the host training framework. Rewards are
standardized per group with population statistics, the importance ratio is
sequence-level, and the KL penalty uses the non-negative low-variance
estimator exp(d) - d - 1 with d = logp_ref - logp_new.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GrpoConfig:
    epsilon: float = 0.2    # clip half-width
    beta: float = 0.01      # KL coefficient
    std_floor: float = 1e-6 # degenerate groups map to zero advantage

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        if self.std_floor <= 0.0:
            raise ValueError(f"std_floor must be positive, got {self.std_floor}")


def _vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class RolloutGroup:
    """N sampled responses for one query with rewards and per-response
    total log-probabilities under the new, old, and reference policies."""

    query_id: str
    rewards: np.ndarray
    logp_new: np.ndarray
    logp_old: np.ndarray
    logp_ref: np.ndarray

    def __post_init__(self):
        rewards = _vector(self.rewards, "rewards")
        if rewards.size < 2:
            raise ValueError("a rollout group needs at least 2 responses")
        object.__setattr__(self, "rewards", rewards)
        for name in ("logp_new", "logp_old", "logp_ref"):
            vec = _vector(getattr(self, name), name)
            if vec.size != rewards.size:
                raise ValueError(f"{name} has length {vec.size}, expected {rewards.size}")
            object.__setattr__(self, name, vec)

    @property
    def size(self) -> int:
        return self.rewards.size


def advantages(rewards, cfg: GrpoConfig | None = None) -> np.ndarray:
    """Group-standardized rewards: (R - mean) / population std.

    All-zero when the reward spread is at or below the std floor, so that
    constant-reward groups contribute no gradient signal instead of NaNs.
    """
    cfg = cfg or GrpoConfig()
    r = _vector(rewards, "rewards")
    if r.size < 2:
        raise ValueError("advantages require at least 2 rewards")
    std = float(r.std())  # population (ddof=0)
    if std <= cfg.std_floor:
        return np.zeros_like(r)
    return (r - r.mean()) / std


def clipped_term(logp_new_i: float, logp_old_i: float, advantage_i: float,
                 cfg: GrpoConfig | None = None) -> float:
    """min(ratio * A, clip(ratio, 1-eps, 1+eps) * A) with a sequence-level ratio."""
    cfg = cfg or GrpoConfig()
    ratio = math.exp(logp_new_i - logp_old_i)
    clipped = min(max(ratio, 1.0 - cfg.epsilon), 1.0 + cfg.epsilon)
    return min(ratio * advantage_i, clipped * advantage_i)


def kl_lowvar(logp_new_i: float, logp_ref_i: float) -> float:
    """Low-variance KL estimate exp(d) - d - 1, d = logp_ref - logp_new; >= 0."""
    d = logp_ref_i - logp_new_i
    return math.exp(d) - d - 1.0


def group_objective(group: RolloutGroup, cfg: GrpoConfig | None = None) -> float:
    """Mean clipped surrogate minus beta times the mean KL estimate."""
    cfg = cfg or GrpoConfig()
    adv = advantages(group.rewards, cfg)
    surrogate = sum(
        clipped_term(n, o, a, cfg)
        for n, o, a in zip(group.logp_new, group.logp_old, adv)
    ) / group.size
    kl = sum(kl_lowvar(n, r) for n, r in zip(group.logp_new, group.logp_ref)) / group.size
    return surrogate - cfg.beta * kl
