"""Enumerations shared across the simulator, reward and learner."""

from __future__ import annotations

import enum


class ConfigError(ValueError):
    """Invalid configuration value or unplaceable world layout."""


class Scenario(str, enum.Enum):
    E1 = "E1"  # human-centric factors disabled
    E2 = "E2"
    E3 = "E3"  # survivor placed next to an obstacle

    @classmethod
    def parse(cls, value: "str | Scenario") -> "Scenario":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ConfigError(f"unknown scenario {value!r}; expected one of E1, E2, E3") from None

    @property
    def human_centric(self) -> bool:
        return self is not Scenario.E1


class Label(enum.IntEnum):
    """Operational context from the two proximity predicates."""

    L1 = 0  # far from survivor and obstacle
    L2 = 1  # near obstacle and survivor
    L3 = 2  # near survivor only
    L4 = 3  # near obstacle only

    @classmethod
    def from_flags(cls, near_obstacle: bool, near_survivor: bool) -> "Label":
        if near_survivor:
            return cls.L2 if near_obstacle else cls.L3
        return cls.L4 if near_obstacle else cls.L1


class Terminal(str, enum.Enum):
    NONE = "None"
    SUCCESS = "Success"
    COLLISION = "Collision"
    OUT_OF_BOUNDS = "OutOfBounds"
    DRIFT_FAILURE = "DriftFailure"
    SPEED_FAILURE = "SpeedFailure"
    BATTERY_DEPLETED = "BatteryDepleted"
    TIMEOUT = "Timeout"

    @property
    def is_terminal(self) -> bool:
        return self is not Terminal.NONE
