"""Run configuration and the flat ``key = value`` config file format.

Keys are namespaced: ``run.*``, ``world.*``, ``agent.*``, ``reward.*`` and
``ahp.l1`` .. ``ahp.l4`` (four comma-separated weights each). Lines starting
with ``#`` and blank lines are ignored; unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..agent import AgentConfig, Mode
from ..ahp import CONTEXT_WEIGHTS, CategoryWeightTable, WeightVector
from ..enums import ConfigError, Label, Scenario
from ..reward import RewardConfig
from ..world import WorldConfig, reward_config_for

DESK_PRESET = {
    "world.arena_side": "60",
    "world.n_obstacles": "3",
    "agent.hidden": "64, 64",
    "run.episodes": "300",
    "run.seeds": "0, 1, 2",
    "run.eval_obstacles": "3",
    "run.start_steps": "200",
}

# fields of the section dataclasses that are not exposed as keys
_HIDDEN = {"world": {"scenario"}, "agent": {"mode"}, "reward": {"dt", "battery_capacity"}}


@dataclass
class RunConfig:
    algo: Mode = Mode.PROPOSED
    episodes: int = 5000
    seeds: list[int] = field(default_factory=lambda: [0])
    eval_episodes: int = 200
    eval_obstacles: int = 15
    start_steps: int = 1000
    ma_window: int = 50
    out: Path = Path("runs/latest")
    world: WorldConfig = field(default_factory=WorldConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    reward: dict = field(default_factory=dict)
    ahp: dict = field(default_factory=lambda: dict(CONTEXT_WEIGHTS))

    def __post_init__(self):
        self.algo = Mode.parse(self.algo)
        self.out = Path(self.out)
        self.agent.mode = self.algo
        self.agent.__post_init__()
        if not self.seeds:
            raise ConfigError("run.seeds needs at least one seed")
        if self.episodes <= 0:
            raise ConfigError("run.episodes must be positive")
        if self.eval_episodes <= 0 or self.ma_window <= 0 or self.start_steps < 0 or self.eval_obstacles < 0:
            raise ConfigError("run.eval_episodes and run.ma_window must be positive; "
                              "run.start_steps and run.eval_obstacles non-negative")
        self.reward_config()  # validate early

    @property
    def scenario(self) -> Scenario:
        return self.world.scenario

    def reward_config(self) -> RewardConfig:
        try:
            return reward_config_for(self.world, **self.reward)
        except TypeError as exc:
            raise ConfigError(f"bad reward option: {exc}") from None

    def weight_table(self) -> CategoryWeightTable:
        return CategoryWeightTable(self.ahp)

    def eval_world(self) -> WorldConfig:
        return dataclasses.replace(self.world, n_obstacles=self.eval_obstacles)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def _convert(key: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if isinstance(default, int) and not isinstance(default, bool):
            return int(raw)
        if isinstance(default, float) or default is None:
            out = float(raw)
            if not math.isfinite(out):
                raise ValueError(raw)
            return out
        if isinstance(default, (list, tuple)):
            items = [p.strip() for p in raw.split(",") if p.strip()]
            elem = type(default[0]) if default else int
            conv = [elem(p) if elem is not float else float(p) for p in items]
            return tuple(conv) if isinstance(default, tuple) else conv
        if isinstance(default, Path):
            return Path(raw)
        return raw
    except ValueError:
        raise ConfigError(f"invalid value {raw!r} for key {key!r}") from None


def _section_defaults(section: str) -> dict:
    if section == "world":
        obj = WorldConfig()
    elif section == "agent":
        obj = AgentConfig()
    elif section == "reward":
        obj = RewardConfig()
    else:
        raise KeyError(section)
    return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj) if f.name not in _HIDDEN[section]}


_RUN_DEFAULTS = {
    "algo": "proposed", "scenario": "E2", "episodes": 5000, "max_steps": 300, "seeds": [0],
    "eval_episodes": 200, "eval_obstacles": 15, "start_steps": 1000, "ma_window": 50, "out": Path("runs/latest"),
}


def known_keys() -> list[str]:
    keys = [f"run.{k}" for k in _RUN_DEFAULTS]
    for section in ("world", "agent", "reward"):
        keys += [f"{section}.{k}" for k in _section_defaults(section)]
    keys += [f"ahp.{label.name.lower()}" for label in Label]
    return keys


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines into a raw mapping, rejecting unknown keys."""
    allowed = set(known_keys())
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = (p.strip() for p in stripped.split("=", 1))
        if key not in allowed:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        out[key] = value
    return out


def read_config_file(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return parse_config_text(text, str(path))


def build_run_config(raw: dict[str, str]) -> RunConfig:
    """Resolve raw string settings (already merged by precedence) on top of defaults."""
    allowed = set(known_keys())
    sections: dict[str, dict] = {"run": {}, "world": {}, "agent": {}, "reward": {}, "ahp": {}}
    for key, value in raw.items():
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r}")
        section, name = key.split(".", 1)
        if section == "ahp":
            weights = _convert(key, value, (0.0,))
            if len(weights) != 4:
                raise ConfigError(f"{key} needs 4 comma-separated weights, got {len(weights)}")
            sections["ahp"][Label[name.upper()]] = WeightVector.from_array(weights)
        elif section == "run":
            sections["run"][name] = _convert(key, value, _RUN_DEFAULTS[name])
        else:
            sections[section][name] = _convert(key, value, _section_defaults(section)[name])

    run = sections["run"]
    scenario = run.pop("scenario", "E2")
    max_steps = run.pop("max_steps", 300)
    world = WorldConfig(scenario=scenario, max_steps=max_steps, **sections["world"])
    algo = run.pop("algo", "proposed")
    agent = AgentConfig(mode=algo, **sections["agent"])
    ahp = dict(CONTEXT_WEIGHTS)
    ahp.update(sections["ahp"])
    seeds = run.pop("seeds", [0])
    return RunConfig(algo=algo, seeds=list(seeds), world=world, agent=agent, reward=sections["reward"], ahp=ahp, **run)


def resolved_items(cfg: RunConfig) -> list[tuple[str, str]]:
    """Every setting as ``(key, value)``, suitable for writing back as a config file."""
    items = [
        ("run.algo", cfg.algo.value), ("run.scenario", cfg.scenario.value), ("run.episodes", cfg.episodes),
        ("run.max_steps", cfg.world.max_steps), ("run.seeds", cfg.seeds), ("run.eval_episodes", cfg.eval_episodes),
        ("run.eval_obstacles", cfg.eval_obstacles), ("run.start_steps", cfg.start_steps),
        ("run.ma_window", cfg.ma_window), ("run.out", cfg.out),
    ]
    for f in dataclasses.fields(cfg.world):
        if f.name not in ("scenario", "max_steps"):
            items.append((f"world.{f.name}", getattr(cfg.world, f.name)))
    for f in dataclasses.fields(cfg.agent):
        if f.name != "mode":
            items.append((f"agent.{f.name}", getattr(cfg.agent, f.name)))
    rcfg = cfg.reward_config()
    for f in dataclasses.fields(rcfg):
        if f.name not in _HIDDEN["reward"]:
            items.append((f"reward.{f.name}", getattr(rcfg, f.name)))
    table = cfg.weight_table()
    for label in Label:
        items.append((f"ahp.{label.name.lower()}", list(table.raw[label])))
    return [(k, _fmt(v)) for k, v in items]


def format_config(cfg: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in resolved_items(cfg))
