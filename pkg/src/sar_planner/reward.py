"""Reward components and their weighted scalarization."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .ahp import WeightVector
from .enums import ConfigError, Terminal

ENERGY_MODES = ("penalty", "literal")


@dataclass(frozen=True)
class RewardComponents:
    r_t: float
    r_e: float
    r_o: float
    r_h: float

    def __iter__(self):
        return iter((self.r_t, self.r_e, self.r_o, self.r_h))


@dataclass
class RewardConfig:
    dt: float = 0.5
    battery_capacity: float = 100.0
    r_e_cap: float = 10.0
    r_e_eps: float | None = None  # None -> 1% of capacity
    # "literal" feeds B/(B_c - B) straight into the sum; "penalty" shifts it by
    # -r_e_cap so the term is <= 0 and grows in magnitude as the battery drains.
    energy_mode: str = "penalty"
    k_h: float = 1.0
    unsafe_radius: float = 2.0
    obstacle_range: float = 20.0
    unsafe_proximity_penalty: float = -5.0
    collision_penalty: float = -10.0
    human_failure_penalty: float = -10.0
    success_bonus: float = 10.0
    # reward per metre of closing distance to the survivor, added after weighting
    progress_gain: float = 0.2

    def __post_init__(self):
        if self.r_e_eps is None:
            self.r_e_eps = 0.01 * self.battery_capacity
        if self.dt <= 0 or self.battery_capacity <= 0:
            raise ConfigError("reward.dt and reward.battery_capacity must be positive")
        if self.r_e_cap <= 0 or self.r_e_eps <= 0:
            raise ConfigError("reward.r_e_cap and reward.r_e_eps must be positive")
        if self.energy_mode not in ENERGY_MODES:
            raise ConfigError(f"reward.energy_mode must be one of {ENERGY_MODES}, got {self.energy_mode!r}")
        for name in ("unsafe_proximity_penalty", "collision_penalty", "human_failure_penalty"):
            if getattr(self, name) >= 0:
                raise ConfigError(f"reward.{name} must be negative")
        if self.success_bonus <= 0:
            raise ConfigError("reward.success_bonus must be positive")
        if self.progress_gain < 0 or self.k_h < 0:
            raise ConfigError("reward.progress_gain and reward.k_h must be non-negative")


def r_time(dt: float) -> float:
    if dt <= 0:
        raise ValueError("dt must be positive")
    return -dt


def r_energy(battery: float, capacity: float, cfg: RewardConfig) -> float:
    return min(battery / max(capacity - battery, cfg.r_e_eps), cfg.r_e_cap)


def energy_component(battery: float, capacity: float, cfg: RewardConfig) -> float:
    """The energy term as it enters the weighted sum (see ``RewardConfig.energy_mode``)."""
    value = r_energy(battery, capacity, cfg)
    if cfg.energy_mode == "penalty":
        return value - cfg.r_e_cap
    return value


def r_obstacle(d_n: float, collided: bool, cfg: RewardConfig) -> float:
    value = -math.exp(-d_n) if d_n < cfg.obstacle_range else 0.0
    if collided:
        value += cfg.collision_penalty
    return value


def r_human(v_s: float, dist_to_survivor: float, cfg: RewardConfig, failed: bool = False) -> float:
    value = -cfg.k_h * abs(v_s)
    if dist_to_survivor < cfg.unsafe_radius:
        value += cfg.unsafe_proximity_penalty
    if failed:
        value += cfg.human_failure_penalty
    return value


def total_reward(
    components: RewardComponents,
    weights: WeightVector,
    terminal: Terminal,
    cfg: RewardConfig,
    *,
    omit_human: bool = False,
    progress: float = 0.0,
) -> float:
    """Weighted sum of the components plus the terminal bonus and progress term.

    ``omit_human`` removes the human weight and rescales the remaining three.
    ``progress`` is the metres of distance closed to the survivor this step.
    """
    if abs(weights.total - 1.0) > 1e-6:
        raise ValueError(f"weights must sum to 1 (got {weights.total!r})")
    if omit_human:
        weights = weights.without_human()
    value = (
        weights.w_t * components.r_t
        + weights.w_e * components.r_e
        + weights.w_o * components.r_o
        + weights.w_h * components.r_h
    )
    if terminal is Terminal.SUCCESS:
        value += cfg.success_bonus
    if progress:
        value += cfg.progress_gain * progress
    return value


HUMAN_FAILURES = frozenset({Terminal.SPEED_FAILURE, Terminal.DRIFT_FAILURE})
CONTACT_FAILURES = frozenset({Terminal.COLLISION, Terminal.OUT_OF_BOUNDS})
