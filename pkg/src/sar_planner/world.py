"""Planar kinematic search-and-rescue world.

A world is a square arena with cylindrical obstacles (circles in the plane),
one UAV and one survivor. States are immutable; ``step`` returns fresh ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .ahp import DEFAULT_TABLE, CategoryWeightTable
from .enums import ConfigError, Label, Scenario, Terminal
from .reward import (
    CONTACT_FAILURES,
    HUMAN_FAILURES,
    RewardComponents,
    RewardConfig,
    energy_component,
    r_human,
    r_obstacle,
    r_time,
    total_reward,
)

PLACEMENT_ATTEMPTS = 1000
STATE_DIM_BASE = 9
# Hit distance reported when the sensor origin sits inside an obstacle.
INSIDE_DISTANCE = 1e-6


@dataclass
class WorldConfig:
    arena_side: float = 200.0
    n_obstacles: int = 12
    obstacle_radius_range: tuple[float, float] = (2.0, 15.0)
    obstacle_height: float = 50.0
    scenario: Scenario = Scenario.E2
    dt: float = 0.5
    max_steps: int = 300
    v_max: float = 22.0
    altitude: float = 10.0
    seed: int = 0

    n_beams: int = 16
    lidar_range: float = 20.0
    battery_capacity: float = 100.0
    omega_max: float = math.pi / 2
    battery_idle_rate: float = 0.02
    battery_speed_rate: float = 0.004

    min_separation: float = 50.0
    clearance: float = 3.5
    adjacent_gap: float = 5.0

    reaction_radius: float = 20.0
    reaction_speed: float = 15.0
    flee_gain: float = 0.5
    speed_limit: float = 20.0
    drift_limit: float = 20.0
    success_radius: float = 3.5
    success_speed: float = 5.0

    def __post_init__(self):
        self.scenario = Scenario.parse(self.scenario)
        self.obstacle_radius_range = tuple(float(r) for r in self.obstacle_radius_range)
        lo, hi = self.obstacle_radius_range
        if self.arena_side <= 0:
            raise ConfigError("world.arena_side must be positive")
        if self.dt <= 0:
            raise ConfigError("world.dt must be positive")
        if self.v_max <= 0:
            raise ConfigError("world.v_max must be positive")
        if not 0 < lo <= hi:
            raise ConfigError(f"world.obstacle_radius_range must satisfy 0 < min <= max, got {self.obstacle_radius_range}")
        if 2 * hi >= self.arena_side:
            raise ConfigError("world.obstacle_radius_range too large for the arena")
        if self.n_obstacles < 0 or self.max_steps <= 0 or self.n_beams <= 0:
            raise ConfigError("world.n_obstacles must be >= 0; world.max_steps and world.n_beams > 0")
        if self.lidar_range <= 0 or self.battery_capacity <= 0:
            raise ConfigError("world.lidar_range and world.battery_capacity must be positive")

    @property
    def state_dim(self) -> int:
        return STATE_DIM_BASE + self.n_beams


@dataclass(frozen=True)
class Obstacle:
    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class UavState:
    pos: tuple[float, float]
    vel: tuple[float, float]
    heading: float
    battery: float
    battery_capacity: float = 100.0

    @property
    def speed(self) -> float:
        return math.hypot(*self.vel)


@dataclass(frozen=True)
class SurvivorState:
    pos: tuple[float, float]
    speed: float = 0.0
    direction: tuple[float, float] = (0.0, 0.0)
    cumulative_drift: float = 0.0


@dataclass(frozen=True)
class LidarScan:
    distances: np.ndarray
    max_range: float

    @property
    def nearest(self) -> float:
        return float(self.distances.min())


@dataclass(frozen=True)
class Action:
    u1: float
    u2: float

    @classmethod
    def clamped(cls, u1: float, u2: float) -> "Action":
        return cls(min(max(float(u1), -1.0), 1.0), min(max(float(u2), -1.0), 1.0))


@dataclass
class World:
    config: WorldConfig
    obstacles: tuple[Obstacle, ...]
    uav_start: UavState
    survivor_start: SurvivorState
    centers: np.ndarray = field(init=False, repr=False)
    radii: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.obstacles = tuple(self.obstacles)
        self.centers = np.array([o.center for o in self.obstacles], dtype=float).reshape(-1, 2)
        self.radii = np.array([o.radius for o in self.obstacles], dtype=float)

    def surface_distance(self, point) -> float:
        """Distance from ``point`` to the nearest obstacle surface (inf when empty)."""
        if not len(self.radii):
            return math.inf
        d = np.hypot(*(self.centers - np.asarray(point, dtype=float)).T) - self.radii
        return float(d.min())


@dataclass(frozen=True)
class StepOutcome:
    next_uav: UavState
    next_survivor: SurvivorState
    scan: LidarScan
    label: Label
    reward_components: RewardComponents
    reward_total: float
    terminal: Terminal
    progress: float


def wrap_angle(theta: float) -> float:
    """Wrap to [-pi, pi)."""
    return (theta + math.pi) % (2 * math.pi) - math.pi


def _dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _inside(point, side: float, margin: float = 0.0) -> bool:
    return margin <= point[0] <= side - margin and margin <= point[1] <= side - margin


def _uniform_point(rng: np.random.Generator, side: float, margin: float) -> tuple[float, float]:
    x, y = rng.uniform(margin, side - margin, size=2)
    return float(x), float(y)


def generate_world(config: WorldConfig, rng: np.random.Generator) -> World:
    """Random arena; deterministic given the state of ``rng``.

    E1/E2 place the endpoints first and reject obstacles that crowd them;
    E3 places obstacles first and puts the survivor next to one of them.
    """
    side, clear = config.arena_side, config.clearance
    lo, hi = config.obstacle_radius_range

    def draw_obstacle(keep_clear):
        for _ in range(PLACEMENT_ATTEMPTS):
            r = float(rng.uniform(lo, hi))
            c = _uniform_point(rng, side, r)
            if all(_dist(c, p) - r >= clear for p in keep_clear):
                return Obstacle(c, r)
        raise ConfigError(f"could not place obstacle after {PLACEMENT_ATTEMPTS} attempts")

    def draw_free_point(obstacles, others=()):
        tmp = World(config, obstacles, _dummy_uav(config), SurvivorState((0.0, 0.0)))
        for _ in range(PLACEMENT_ATTEMPTS):
            p = _uniform_point(rng, side, clear)
            if tmp.surface_distance(p) >= clear and all(_dist(p, q) >= config.min_separation for q in others):
                return p
        raise ConfigError(f"could not place a free point after {PLACEMENT_ATTEMPTS} attempts")

    if config.scenario is Scenario.E3 and config.n_obstacles > 0:
        obstacles = [draw_obstacle(()) for _ in range(config.n_obstacles)]
        tmp = World(config, obstacles, _dummy_uav(config), SurvivorState((0.0, 0.0)))
        for _ in range(PLACEMENT_ATTEMPTS):
            host = obstacles[int(rng.integers(len(obstacles)))]
            angle = float(rng.uniform(-math.pi, math.pi))
            gap = float(rng.uniform(clear, config.adjacent_gap))
            reach = host.radius + gap
            p = (host.center[0] + reach * math.cos(angle), host.center[1] + reach * math.sin(angle))
            if _inside(p, side, clear) and tmp.surface_distance(p) >= clear:
                survivor_pos = p
                break
        else:
            raise ConfigError(f"could not place survivor next to an obstacle after {PLACEMENT_ATTEMPTS} attempts")
        start = draw_free_point(obstacles, (survivor_pos,))
    else:
        start = None
        for _ in range(PLACEMENT_ATTEMPTS):
            a = _uniform_point(rng, side, clear)
            b = _uniform_point(rng, side, clear)
            if _dist(a, b) >= config.min_separation:
                start, survivor_pos = a, b
                break
        if start is None:
            raise ConfigError(f"could not separate start and survivor after {PLACEMENT_ATTEMPTS} attempts")
        obstacles = [draw_obstacle((start, survivor_pos)) for _ in range(config.n_obstacles)]

    heading = float(rng.uniform(-math.pi, math.pi))
    uav = UavState(start, (0.0, 0.0), wrap_angle(heading), config.battery_capacity, config.battery_capacity)
    return World(config, obstacles, uav, SurvivorState(survivor_pos))


def _dummy_uav(config: WorldConfig) -> UavState:
    return UavState((0.0, 0.0), (0.0, 0.0), 0.0, config.battery_capacity, config.battery_capacity)


def beam_angles(heading: float, n_beams: int) -> np.ndarray:
    return heading + 2 * np.pi * np.arange(n_beams) / n_beams


def ray_distances(world: World, origin, angles: np.ndarray, max_range: float) -> np.ndarray:
    """Nearest obstacle/wall hit along each ray, clipped to ``max_range``."""
    ox, oy = float(origin[0]), float(origin[1])
    dx, dy = np.cos(angles), np.sin(angles)
    side = world.config.arena_side

    with np.errstate(divide="ignore", invalid="ignore"):
        tx = np.where(dx > 0, (side - ox) / dx, np.where(dx < 0, -ox / dx, np.inf))
        ty = np.where(dy > 0, (side - oy) / dy, np.where(dy < 0, -oy / dy, np.inf))
    best = np.minimum(tx, ty)

    if len(world.radii):
        fx = ox - world.centers[:, 0:1]
        fy = oy - world.centers[:, 1:2]
        b = fx * dx + fy * dy  # (m, n)
        c = (fx * fx + fy * fy) - world.radii[:, None] ** 2
        disc = b * b - c
        hit = disc >= 0
        root = np.sqrt(np.where(hit, disc, 0.0))
        t_near = -b - root
        t = np.where(hit & (t_near >= 0), t_near, np.inf)
        inside = c <= 0
        t = np.where(np.broadcast_to(inside, t.shape), INSIDE_DISTANCE, t)
        best = np.minimum(best, t.min(axis=0))

    return np.clip(best, INSIDE_DISTANCE, max_range)


def lidar_scan(world: World, uav: UavState) -> LidarScan:
    cfg = world.config
    angles = beam_angles(uav.heading, cfg.n_beams)
    return LidarScan(ray_distances(world, uav.pos, angles, cfg.lidar_range), cfg.lidar_range)


def survivor_react(uav: UavState, survivor: SurvivorState, dt: float, scenario: Scenario,
                   config: WorldConfig | None = None) -> SurvivorState:
    """Survivor flees from a fast, close UAV with speed proportional to the UAV's."""
    cfg = config or WorldConfig()
    if not Scenario.parse(scenario).human_centric:
        return survivor
    d = _dist(uav.pos, survivor.pos)
    v_u = uav.speed
    if d < cfg.reaction_radius and v_u >= cfg.reaction_speed:
        v_s = cfg.flee_gain * v_u * (1.0 - d / cfg.reaction_radius)
        if d > 0:
            direction = ((survivor.pos[0] - uav.pos[0]) / d, (survivor.pos[1] - uav.pos[1]) / d)
        else:
            direction = (math.cos(uav.heading), math.sin(uav.heading))
    else:
        v_s, direction = 0.0, (0.0, 0.0)
    side = cfg.arena_side
    x = min(max(survivor.pos[0] + direction[0] * v_s * dt, 0.0), side)
    y = min(max(survivor.pos[1] + direction[1] * v_s * dt, 0.0), side)
    return SurvivorState((x, y), v_s, direction, survivor.cumulative_drift + v_s * dt)


def categorize_state(scan: LidarScan, dist_to_survivor: float, threshold: float | None = None) -> Label:
    threshold = scan.max_range if threshold is None else threshold
    return Label.from_flags(scan.nearest < threshold, dist_to_survivor < threshold)


def check_terminal(uav: UavState, survivor: SurvivorState, world: World, step_index: int) -> Terminal:
    cfg = world.config
    if len(world.radii):
        d_centers = np.hypot(world.centers[:, 0] - uav.pos[0], world.centers[:, 1] - uav.pos[1])
        if np.any(d_centers <= world.radii):
            return Terminal.COLLISION
    if not _inside(uav.pos, cfg.arena_side):
        return Terminal.OUT_OF_BOUNDS
    d = _dist(uav.pos, survivor.pos)
    speed = uav.speed
    if cfg.scenario.human_centric and speed > cfg.speed_limit and d <= cfg.reaction_radius:
        return Terminal.SPEED_FAILURE
    if survivor.cumulative_drift > cfg.drift_limit:
        return Terminal.DRIFT_FAILURE
    if d <= cfg.success_radius and speed <= cfg.success_speed:
        return Terminal.SUCCESS
    if uav.battery <= 0:
        return Terminal.BATTERY_DEPLETED
    if step_index >= cfg.max_steps:
        return Terminal.TIMEOUT
    return Terminal.NONE


def step(
    world: World,
    uav: UavState,
    survivor: SurvivorState,
    action: Action,
    step_index: int = 0,
    weights: CategoryWeightTable = DEFAULT_TABLE,
    reward_cfg: RewardConfig | None = None,
) -> StepOutcome:
    """Advance one time step. ``step_index`` counts steps already taken."""
    cfg = world.config
    reward_cfg = reward_cfg or reward_config_for(cfg)
    action = Action.clamped(action.u1, action.u2)

    heading = wrap_angle(uav.heading + action.u2 * cfg.omega_max * cfg.dt)
    speed = (action.u1 + 1.0) / 2.0 * cfg.v_max
    vel = (speed * math.cos(heading), speed * math.sin(heading))
    pos = (uav.pos[0] + vel[0] * cfg.dt, uav.pos[1] + vel[1] * cfg.dt)
    battery = max(uav.battery - (cfg.battery_idle_rate + cfg.battery_speed_rate * speed) * cfg.dt, 0.0)
    nxt = UavState(pos, vel, heading, battery, uav.battery_capacity)

    surv = survivor_react(nxt, survivor, cfg.dt, cfg.scenario, cfg)
    scan = lidar_scan(world, nxt)
    dist = _dist(nxt.pos, surv.pos)
    label = categorize_state(scan, dist)
    terminal = check_terminal(nxt, surv, world, step_index + 1)

    components = RewardComponents(
        r_time(cfg.dt),
        energy_component(battery, uav.battery_capacity, reward_cfg),
        r_obstacle(scan.nearest, terminal in CONTACT_FAILURES, reward_cfg),
        r_human(surv.speed, dist, reward_cfg, failed=terminal in HUMAN_FAILURES),
    )
    progress = _dist(uav.pos, survivor.pos) - dist
    total = total_reward(
        components, weights[label], terminal, reward_cfg,
        omit_human=not cfg.scenario.human_centric, progress=progress,
    )
    return StepOutcome(nxt, surv, scan, label, components, total, terminal, progress)


def reward_config_for(cfg: WorldConfig, **overrides) -> RewardConfig:
    return RewardConfig(dt=cfg.dt, battery_capacity=cfg.battery_capacity, **overrides)


def flatten_state(uav: UavState, survivor: SurvivorState, scan: LidarScan, config: WorldConfig) -> np.ndarray:
    """Fixed-order observation, every component mapped into [-1, 1]."""
    side, vmax = config.arena_side, config.v_max
    head = [
        2 * uav.pos[0] / side - 1,
        2 * uav.pos[1] / side - 1,
        uav.vel[0] / vmax,
        uav.vel[1] / vmax,
        uav.heading / math.pi,
        2 * uav.battery / uav.battery_capacity - 1,
        min(survivor.speed / vmax, 1.0),
        2 * survivor.pos[0] / side - 1,
        2 * survivor.pos[1] / side - 1,
    ]
    out = np.empty(STATE_DIM_BASE + len(scan.distances))
    out[:STATE_DIM_BASE] = np.clip(head, -1.0, 1.0)
    out[STATE_DIM_BASE:] = 2 * scan.distances / scan.max_range - 1
    return out


class SarEnv:
    """Episode wrapper around the pure ``step`` function (reset/step interface)."""

    def __init__(self, world: World, weights: CategoryWeightTable = DEFAULT_TABLE,
                 reward_cfg: RewardConfig | None = None):
        self.world = world
        self.weights = weights
        self.reward_cfg = reward_cfg or reward_config_for(world.config)
        self.reset()

    def reset(self) -> np.ndarray:
        self.uav = self.world.uav_start
        self.survivor = self.world.survivor_start
        self.scan = lidar_scan(self.world, self.uav)
        self.label = categorize_state(self.scan, _dist(self.uav.pos, self.survivor.pos))
        self.steps = 0
        self.terminal = Terminal.NONE
        return self.observation()

    def observation(self) -> np.ndarray:
        return flatten_state(self.uav, self.survivor, self.scan, self.world.config)

    def step(self, action) -> StepOutcome:
        if self.terminal.is_terminal:
            raise RuntimeError(f"episode already ended ({self.terminal.value}); call reset()")
        if not isinstance(action, Action):
            action = Action.clamped(action[0], action[1])
        out = step(self.world, self.uav, self.survivor, action, self.steps, self.weights, self.reward_cfg)
        self.uav, self.survivor, self.scan, self.label = out.next_uav, out.next_survivor, out.scan, out.label
        self.steps += 1
        self.terminal = out.terminal
        return out


TRACE_HEADER = "step,x,y,vx,vy,theta,battery,label,r_t,r_e,r_o,r_h,reward,terminal"


def trace_line(step_index: int, out: StepOutcome) -> str:
    u, c = out.next_uav, out.reward_components
    fields = [step_index, u.pos[0], u.pos[1], u.vel[0], u.vel[1], u.heading, u.battery,
              out.label.name, c.r_t, c.r_e, c.r_o, c.r_h, out.reward_total, out.terminal.value]
    return ",".join(repr(float(f)) if isinstance(f, float) else str(f) for f in fields)


def with_scenario(config: WorldConfig, scenario) -> WorldConfig:
    return replace(config, scenario=Scenario.parse(scenario))
