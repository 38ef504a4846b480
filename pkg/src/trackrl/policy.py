"""Numeric core of the policy objectives.

Operates on caller-supplied rewards and per-rollout log-probabilities; no
model lives here. Covers group-normalized advantages, the clipped
surrogate with a reference-KL penalty, the frame-freezing corruption
schedule, and the combined objective with the temporal-sensitivity term.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

TAPO_STRATEGY_FREEZE = "freeze"
DEGENERATE_STD_ZERO_ADVANTAGES = "zero_advantages"


@dataclass(frozen=True)
class PolicyConfig:
    clip_epsilon: float = 0.2
    kl_beta: float = 5.0e-3
    # Reserved second KL coefficient mirroring common trainer configs; the
    # objective here never applies it.
    kl_coef: float = 0.0
    tapo_gamma: float = 0.1
    tapo_strategy: str = TAPO_STRATEGY_FREEZE
    tapo_keep_prob: float = 0.7
    tapo_interval: int = 2
    degenerate_std_mode: str = DEGENERATE_STD_ZERO_ADVANTAGES

    def __post_init__(self) -> None:
        if self.clip_epsilon <= 0:
            raise ValueError(f"clip_epsilon must be positive, got {self.clip_epsilon}")
        if self.kl_beta < 0:
            raise ValueError(f"kl_beta must be nonnegative, got {self.kl_beta}")
        if self.tapo_gamma < 0:
            raise ValueError(f"tapo_gamma must be nonnegative, got {self.tapo_gamma}")
        if not 0.0 <= self.tapo_keep_prob <= 1.0:
            raise ValueError(f"tapo_keep_prob must lie in [0, 1], got {self.tapo_keep_prob}")
        if self.tapo_interval < 1:
            raise ValueError(f"tapo_interval must be >= 1, got {self.tapo_interval}")
        if self.tapo_strategy != TAPO_STRATEGY_FREEZE:
            raise ValueError(f"unknown tapo_strategy: {self.tapo_strategy!r}")
        if self.degenerate_std_mode != DEGENERATE_STD_ZERO_ADVANTAGES:
            raise ValueError(f"unknown degenerate_std_mode: {self.degenerate_std_mode!r}")


def _finite_tuple(values: Sequence[float], name: str) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if any(not math.isfinite(v) for v in out):
        raise ValueError(f"{name} entries must be finite")
    return out


@dataclass(frozen=True)
class RolloutGroup:
    """Rewards and optional log-probabilities for one input's rollouts."""

    rewards: tuple[float, ...]
    logp_new: tuple[float, ...] | None = None
    logp_old: tuple[float, ...] | None = None
    logp_ref: tuple[float, ...] | None = None
    logp_masked: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        rewards = _finite_tuple(self.rewards, "rewards")
        if not rewards:
            raise ValueError("a rollout group needs at least one reward")
        object.__setattr__(self, "rewards", rewards)
        for name in ("logp_new", "logp_old", "logp_ref", "logp_masked"):
            values = getattr(self, name)
            if values is None:
                continue
            values = _finite_tuple(values, name)
            if len(values) != len(rewards):
                raise ValueError(
                    f"{name} has {len(values)} entries for {len(rewards)} rollouts"
                )
            object.__setattr__(self, name, values)

    @property
    def size(self) -> int:
        return len(self.rewards)


@dataclass(frozen=True)
class FrameMask:
    """Per-frame keep flags; dropped frames are replaced by frame 0."""

    keep: tuple[bool, ...]
    strategy: str = TAPO_STRATEGY_FREEZE

    def __post_init__(self) -> None:
        if not self.keep:
            raise ValueError("a frame mask needs at least one frame")
        if not self.keep[0]:
            raise ValueError("frame 0 is the substitution source and must be kept")

    @property
    def num_frames(self) -> int:
        return len(self.keep)

    def source_frames(self) -> tuple[int, ...]:
        """For each frame, the frame index actually shown to the policy."""
        return tuple(t if kept else 0 for t, kept in enumerate(self.keep))


def grpo_advantages(rewards: Sequence[float],
                    cfg: PolicyConfig | None = None) -> list[float]:
    """Group-normalized advantages: (r - mean) / population std.

    A zero-variance group (all rewards identical) yields all-zero
    advantages instead of dividing by zero.
    """
    cfg = cfg or PolicyConfig()
    values = _finite_tuple(rewards, "rewards")
    g = len(values)
    if g < 2:
        raise ValueError(f"advantage normalization needs >= 2 rollouts, got {g}")
    if all(v == values[0] for v in values):
        return [0.0] * g
    mean = sum(values) / g
    std = math.sqrt(sum((v - mean) ** 2 for v in values) / g)
    if std == 0.0:
        return [0.0] * g
    return [(v - mean) / std for v in values]


def grpo_objective(group: RolloutGroup, advantages: Sequence[float],
                   cfg: PolicyConfig | None = None) -> float:
    """Clipped surrogate averaged over the group, minus the reference-KL term.

    The per-rollout KL estimate is exp(d) - d - 1 with
    d = logp_ref - logp_new, applied when kl_beta > 0.
    """
    cfg = cfg or PolicyConfig()
    if group.logp_new is None or group.logp_old is None:
        raise ValueError("grpo_objective requires logp_new and logp_old")
    if len(advantages) != group.size:
        raise ValueError(
            f"got {len(advantages)} advantages for {group.size} rollouts"
        )
    lo, hi = 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon
    total = 0.0
    for new, old, a in zip(group.logp_new, group.logp_old, advantages):
        ratio = math.exp(new - old)
        clipped = min(max(ratio, lo), hi)
        total += min(ratio * a, clipped * a)
    j = total / group.size

    if cfg.kl_beta > 0:
        if group.logp_ref is None:
            raise ValueError("kl_beta > 0 requires logp_ref")
        kl = 0.0
        for new, ref in zip(group.logp_new, group.logp_ref):
            d = ref - new
            kl += math.exp(d) - d - 1.0
        j -= cfg.kl_beta * (kl / group.size)
    return j


def build_frame_mask(num_frames: int, cfg: PolicyConfig | None = None,
                     rng_seed: int = 0) -> FrameMask:
    """Freeze-strategy corruption mask, deterministic for a seed.

    Frame 0 is always kept; each later frame is independently kept with
    probability tapo_keep_prob, otherwise replaced by frame 0. Whether a
    given training step applies the mask at all (every tapo_interval
    steps) is the caller's schedule, not encoded here.
    """
    cfg = cfg or PolicyConfig()
    if num_frames < 1:
        raise ValueError(f"num_frames must be >= 1, got {num_frames}")
    rng = random.Random(rng_seed)
    keep = [True] + [rng.random() < cfg.tapo_keep_prob for _ in range(num_frames - 1)]
    return FrameMask(keep=tuple(keep), strategy=cfg.tapo_strategy)


def should_apply_corruption(step_index: int, cfg: PolicyConfig | None = None) -> bool:
    """Schedule helper: corrupt on steps where index % tapo_interval == 0."""
    cfg = cfg or PolicyConfig()
    if step_index < 0:
        raise ValueError(f"step_index must be >= 0, got {step_index}")
    return step_index % cfg.tapo_interval == 0


def tapo_temporal_loss(group: RolloutGroup) -> float:
    """Mean log-probability gap between clean and corrupted conditioning."""
    if group.logp_new is None or group.logp_masked is None:
        raise ValueError("tapo_temporal_loss requires logp_new and logp_masked")
    gaps = [new - masked for new, masked in zip(group.logp_new, group.logp_masked)]
    return sum(gaps) / len(gaps)


def tapo_objective(group: RolloutGroup, advantages: Sequence[float],
                   cfg: PolicyConfig | None = None) -> float:
    """Combined objective: clipped surrogate plus gamma times the temporal term.

    With tapo_gamma == 0 this equals grpo_objective bit for bit.
    """
    cfg = cfg or PolicyConfig()
    j = grpo_objective(group, advantages, cfg)
    temporal = tapo_temporal_loss(group)
    if cfg.tapo_gamma == 0.0:
        return j
    return j + cfg.tapo_gamma * temporal
