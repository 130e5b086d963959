import math

import numpy as np
import pytest

from sar_planner.world import Obstacle, SurvivorState, UavState, World, WorldConfig

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_world(obstacles=(), side=200.0, uav_pos=(100.0, 100.0), heading=0.0, survivor_pos=(20.0, 20.0), **cfg):
    config = WorldConfig(arena_side=side, n_obstacles=len(obstacles), **cfg)
    obs = [Obstacle(tuple(map(float, c)), float(r)) for c, r in obstacles]
    uav = UavState(tuple(map(float, uav_pos)), (0.0, 0.0), heading, config.battery_capacity, config.battery_capacity)
    return World(config, obs, uav, SurvivorState(tuple(map(float, survivor_pos))))


def moving_uav(pos, speed, heading=0.0, battery=100.0):
    return UavState(tuple(map(float, pos)), (speed * math.cos(heading), speed * math.sin(heading)), heading, battery, 100.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
