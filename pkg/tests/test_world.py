import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_world, moving_uav
from sar_planner.enums import ConfigError, Label, Scenario, Terminal
from sar_planner.world import (
    Action,
    SarEnv,
    SurvivorState,
    WorldConfig,
    categorize_state,
    check_terminal,
    flatten_state,
    generate_world,
    lidar_scan,
    LidarScan,
    step,
    survivor_react,
)


def _world_signature(w):
    return ([(o.center, o.radius) for o in w.obstacles], w.uav_start, w.survivor_start)


# -- generation -------------------------------------------------------------

def test_same_seed_same_world():
    cfg = WorldConfig()
    a = generate_world(cfg, np.random.default_rng(42))
    b = generate_world(cfg, np.random.default_rng(42))
    assert _world_signature(a) == _world_signature(b)


@pytest.mark.parametrize("scenario", ["E1", "E2", "E3"])
def test_generated_worlds_respect_placement_rules(scenario):
    cfg = WorldConfig(scenario=scenario, n_obstacles=15)
    rng = np.random.default_rng(7)
    for _ in range(40):
        w = generate_world(cfg, rng)
        assert len(w.obstacles) == 15
        for o in w.obstacles:
            lo, hi = cfg.obstacle_radius_range
            assert lo <= o.radius <= hi
            assert o.radius <= o.center[0] <= cfg.arena_side - o.radius
            assert o.radius <= o.center[1] <= cfg.arena_side - o.radius
        assert math.dist(w.uav_start.pos, w.survivor_start.pos) >= 50.0
        assert w.surface_distance(w.uav_start.pos) >= 3.5
        assert w.surface_distance(w.survivor_start.pos) >= 3.5
        if scenario == "E3":
            # direct check: some obstacle surface is within 5 m of the survivor
            gaps = [math.dist(w.survivor_start.pos, o.center) - o.radius for o in w.obstacles]
            assert min(gaps) <= 5.0


def test_impossible_layout_is_a_config_error():
    cfg = WorldConfig(arena_side=40.0, obstacle_radius_range=(2.0, 5.0), n_obstacles=0)
    with pytest.raises(ConfigError):
        generate_world(cfg, np.random.default_rng(0))  # 50 m separation cannot fit


# -- lidar ------------------------------------------------------------------

def test_empty_world_reads_max_range():
    w = make_world()
    scan = lidar_scan(w, w.uav_start)
    assert scan.distances.shape == (16,)
    assert np.all(scan.distances == 20.0)


def test_obstacle_dead_ahead():
    w = make_world([((110.0, 100.0), 5.0)])
    scan = lidar_scan(w, w.uav_start)
    assert scan.distances[0] == pytest.approx(5.0, abs=1e-12)
    assert np.all(scan.distances[4:13] == 20.0)


def test_wall_is_sensed():
    w = make_world(side=200.0, uav_pos=(190.0, 100.0))
    scan = lidar_scan(w, w.uav_start)
    assert scan.distances[0] == pytest.approx(10.0)
    assert scan.distances[8] == 20.0


def test_rotating_heading_by_one_beam_shifts_scan():
    rng = np.random.default_rng(3)
    cfg = WorldConfig(n_obstacles=15)
    for _ in range(20):
        w = generate_world(cfg, rng)
        uav = w.uav_start
        turned = moving_uav(uav.pos, 0.0, uav.heading + 2 * math.pi / 16)
        a = lidar_scan(w, uav).distances
        b = lidar_scan(w, turned).distances
        np.testing.assert_allclose(b, np.roll(a, -1), atol=1e-9)


def _march(w, origin, angle, max_range):
    """Independent oracle: coarse march to bracket the first hit, then bisection."""
    d = np.array([math.cos(angle), math.sin(angle)])
    side = w.config.arena_side
    centers = np.array([o.center for o in w.obstacles]).reshape(-1, 2)
    radii = np.array([o.radius for o in w.obstacles])

    def blocked(t):
        p = np.asarray(origin) + np.multiply.outer(np.atleast_1d(t), d)
        outside = np.any((p < 0) | (p > side), axis=-1)
        inside = np.any(np.linalg.norm(p[:, None, :] - centers[None], axis=-1) <= radii, axis=-1)
        return outside | inside

    ts = np.linspace(0.0, max_range, 2001)
    hits = np.flatnonzero(blocked(ts[1:]))
    if not len(hits):
        return max_range
    lo, hi = ts[hits[0]], ts[hits[0] + 1]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if blocked(mid)[0] else (mid, hi)
    return hi


def test_lidar_matches_ray_marching_on_random_worlds():
    rng = np.random.default_rng(11)
    cfg = WorldConfig(arena_side=80.0, n_obstacles=6, obstacle_radius_range=(1.0, 8.0), min_separation=20.0)
    beams_checked = 0
    for _ in range(100):
        w = generate_world(cfg, rng)
        uav = w.uav_start
        scan = lidar_scan(w, uav)
        for i, angle in enumerate(uav.heading + 2 * np.pi * np.arange(16) / 16):
            expected = _march(w, uav.pos, angle, 20.0)
            assert scan.distances[i] == pytest.approx(expected, abs=1e-6)
            beams_checked += 1
    assert beams_checked == 1600


# -- kinematics -------------------------------------------------------------

def test_zero_speed_keeps_position():
    w = make_world()
    out = step(w, w.uav_start, w.survivor_start, Action(-1.0, 0.3))
    assert out.next_uav.pos == w.uav_start.pos
    assert out.next_uav.speed == 0.0


def test_full_speed_straight_line_covers_eleven_metres():
    w = make_world()
    out = step(w, w.uav_start, w.survivor_start, Action(1.0, 0.0))
    assert math.dist(out.next_uav.pos, w.uav_start.pos) == pytest.approx(11.0, abs=1e-12)
    assert out.next_uav.pos[1] == pytest.approx(100.0)


def test_yaw_rate_limit():
    w = make_world()
    out = step(w, w.uav_start, w.survivor_start, Action(0.0, 1.0))
    assert out.next_uav.heading == pytest.approx(math.pi / 4)


def test_battery_drain_model():
    w = make_world()
    still = step(w, w.uav_start, w.survivor_start, Action(-1.0, 0.0))
    assert still.next_uav.battery == pytest.approx(100.0 - 0.02 * 0.5, abs=1e-12)
    fast = step(w, w.uav_start, w.survivor_start, Action(1.0, 0.0))
    assert fast.next_uav.battery == pytest.approx(100.0 - (0.02 + 0.004 * 22.0) * 0.5, abs=1e-12)


def test_action_is_clamped():
    w = make_world()
    out = step(w, w.uav_start, w.survivor_start, Action(5.0, -9.0))
    assert out.next_uav.speed == pytest.approx(22.0)
    assert out.next_uav.heading == pytest.approx(-math.pi / 4)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=40),
       st.sampled_from(["E1", "E2", "E3"]), st.integers(0, 2**16))
def test_rollout_invariants(actions, scenario, seed):
    cfg = WorldConfig(scenario=scenario, arena_side=200.0, n_obstacles=5)
    world = generate_world(cfg, np.random.default_rng(seed))
    uav, surv = world.uav_start, world.survivor_start
    for i, (u1, u2) in enumerate(actions):
        out = step(world, uav, surv, Action.clamped(u1, u2), i)
        moved = math.dist(out.next_uav.pos, uav.pos)
        assert 0.0 <= out.next_uav.speed <= 22.0 + 1e-9
        assert moved == pytest.approx(out.next_uav.speed * cfg.dt, abs=1e-9)
        assert out.next_uav.battery <= uav.battery
        assert out.next_survivor.cumulative_drift >= surv.cumulative_drift
        if scenario == "E1":
            assert out.next_survivor.cumulative_drift == 0.0
        assert -math.pi <= out.next_uav.heading < math.pi
        uav, surv = out.next_uav, out.next_survivor
        if out.terminal.is_terminal:
            break


def test_identical_inputs_identical_trajectory():
    cfg = WorldConfig(n_obstacles=12)
    rng = np.random.default_rng(99)
    actions = rng.uniform(-1, 1, size=(60, 2))

    def rollout():
        w = generate_world(cfg, np.random.default_rng(5))
        env = SarEnv(w)
        rows = []
        for a in actions:
            out = env.step(a)
            rows.append((out.next_uav, out.next_survivor, out.reward_total, out.terminal, out.scan.distances.tobytes()))
            if out.terminal.is_terminal:
                break
        return rows

    assert rollout() == rollout()


def test_env_refuses_to_step_after_termination():
    w = make_world(uav_pos=(195.0, 100.0))
    env = SarEnv(w)
    out = env.step((1.0, 0.0))
    assert out.terminal is Terminal.OUT_OF_BOUNDS
    with pytest.raises(RuntimeError):
        env.step((0.0, 0.0))


# -- survivor ---------------------------------------------------------------

def test_e1_survivor_never_moves():
    surv = SurvivorState((100.0, 100.0))
    out = survivor_react(moving_uav((95.0, 100.0), 22.0), surv, 0.5, Scenario.E1)
    assert out == surv


def test_reaction_boundary_excluded():
    surv = SurvivorState((120.0, 100.0))
    out = survivor_react(moving_uav((100.0, 100.0), 22.0), surv, 0.5, Scenario.E2)
    assert out.speed == 0.0 and out.cumulative_drift == 0.0


def test_slow_uav_causes_no_reaction():
    surv = SurvivorState((105.0, 100.0))
    out = survivor_react(moving_uav((100.0, 100.0), 14.9), surv, 0.5, Scenario.E2)
    assert out.speed == 0.0


def test_flee_speed_formula():
    surv = SurvivorState((110.0, 100.0))
    out = survivor_react(moving_uav((100.0, 100.0), 20.0), surv, 0.5, Scenario.E2)
    assert out.speed == pytest.approx(0.5 * 20 * (1 - 10 / 20))  # 5 m/s
    assert out.direction == pytest.approx((1.0, 0.0))
    assert out.pos == pytest.approx((112.5, 100.0))
    assert out.cumulative_drift == pytest.approx(2.5)


# -- categorization -----------------------------------------------------------

def _scan(min_d):
    d = np.full(16, 20.0)
    d[3] = min_d
    return LidarScan(d, 20.0)


@pytest.mark.parametrize("min_d, dist, label", [
    (20.0, 150.0, Label.L1),
    (4.0, 5.0, Label.L2),
    (20.0, 3.0, Label.L3),
    (7.0, 90.0, Label.L4),
    (19.999, 20.0, Label.L4),
])
def test_categorize(min_d, dist, label):
    assert categorize_state(_scan(min_d), dist) is label


@given(st.floats(0.01, 20.0), st.floats(0.0, 300.0))
def test_obstacle_flag_flip_pairs_labels(min_d, dist):
    far = categorize_state(_scan(20.0), dist)
    near = categorize_state(_scan(min(min_d, 19.99)), dist)
    assert {far, near} in ({Label.L1, Label.L4}, {Label.L3, Label.L2})


# -- termination -----------------------------------------------------------

def test_drift_failure():
    w = make_world(survivor_pos=(150.0, 150.0))
    surv = SurvivorState((150.0, 150.0), 0.0, (0.0, 0.0), 20.5)
    assert check_terminal(moving_uav((100.0, 100.0), 5.0), surv, w, 1) is Terminal.DRIFT_FAILURE


def test_success_at_safe_proximity():
    w = make_world()
    surv = SurvivorState((103.5, 100.0))
    assert check_terminal(moving_uav((100.0, 100.0), 2.0), surv, w, 1) is Terminal.SUCCESS


def test_fast_arrival_is_not_success():
    w = make_world()
    surv = SurvivorState((102.0, 100.0))
    assert check_terminal(moving_uav((100.0, 100.0), 6.0), surv, w, 1) is Terminal.NONE


def test_obstacle_boundary_counts_as_collision():
    w = make_world([((110.0, 100.0), 10.0)])
    assert check_terminal(moving_uav((100.0, 100.0), 1.0), w.survivor_start, w, 1) is Terminal.COLLISION


def test_speed_failure_only_with_human_factors():
    surv = SurvivorState((119.0, 100.0))
    uav = moving_uav((100.0, 100.0), 20.1)
    assert check_terminal(uav, surv, make_world(scenario="E2"), 1) is Terminal.SPEED_FAILURE
    assert check_terminal(uav, surv, make_world(scenario="E1"), 1) is Terminal.NONE


def test_precedence_collision_before_everything():
    w = make_world([((100.0, 100.0), 3.0)], scenario="E2")
    surv = SurvivorState((101.0, 100.0), 0.0, (0.0, 0.0), 50.0)
    assert check_terminal(moving_uav((100.0, 100.0), 21.0, battery=0.0), surv, w, 999) is Terminal.COLLISION


def test_precedence_drift_before_success():
    w = make_world()
    surv = SurvivorState((101.0, 100.0), 0.0, (0.0, 0.0), 25.0)
    assert check_terminal(moving_uav((100.0, 100.0), 1.0), surv, w, 1) is Terminal.DRIFT_FAILURE


def test_battery_and_timeout():
    w = make_world()
    far = SurvivorState((10.0, 10.0))
    assert check_terminal(moving_uav((100.0, 100.0), 1.0, battery=0.0), far, w, 1) is Terminal.BATTERY_DEPLETED
    assert check_terminal(moving_uav((100.0, 100.0), 1.0), far, w, 300) is Terminal.TIMEOUT
    assert check_terminal(moving_uav((100.0, 100.0), 1.0), far, w, 299) is Terminal.NONE


def test_out_of_bounds():
    w = make_world()
    assert check_terminal(moving_uav((-0.1, 100.0), 1.0), w.survivor_start, w, 1) is Terminal.OUT_OF_BOUNDS


# -- observation ------------------------------------------------------------

def test_flatten_state_layout():
    w = make_world()
    uav = w.uav_start
    scan = lidar_scan(w, uav)
    s = flatten_state(uav, SurvivorState((100.0, 100.0)), scan, w.config)
    assert s.shape == (25,)
    assert s[0] == 0.0 and s[1] == 0.0
    assert s[5] == 1.0
    assert np.all(s[9:] == 1.0)
    assert np.all(np.abs(s) <= 1.0)
