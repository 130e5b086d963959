"""Training and evaluation loops over seeds, with per-episode records."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..agent import Mode, Td3Agent
from ..ahp import CategoryWeightTable
from ..approximator import CheckpointError
from ..enums import Terminal
from ..replay import LabeledBuffer
from ..reward import RewardConfig, total_reward
from ..world import TRACE_HEADER, SarEnv, World, generate_world, trace_line
from .config import RunConfig, format_config
from .results import EpisodeWriter, Summary, summarize, write_summary, write_text

log = logging.getLogger(__name__)


@dataclass
class EpisodeRecord:
    episode: int
    seed: int
    outcome: Terminal
    steps: int
    reward: float
    path_len: float
    min_clearance: float
    max_drift: float
    wall_time: float = 0.0


@dataclass
class EpisodeResult:
    record: EpisodeRecord
    trace: list[str] = field(default_factory=list)


@dataclass
class SeedStreams:
    """Independent random streams for one seed."""

    world: np.random.Generator
    noise: np.random.Generator
    sample: np.random.Generator
    init_seed: int

    @classmethod
    def from_seed(cls, seed: int, purpose: int = 0) -> "SeedStreams":
        w, n, s, i = np.random.SeedSequence([seed, purpose]).spawn(4)
        return cls(np.random.default_rng(w), np.random.default_rng(n), np.random.default_rng(s),
                   int(i.generate_state(1)[0]))


TRAIN_STREAM, EVAL_STREAM = 0, 1


def run_episode(
    world: World,
    agent: Td3Agent,
    train_weights: CategoryWeightTable,
    metric_weights: CategoryWeightTable,
    reward_cfg: RewardConfig,
    *,
    index: int,
    seed: int,
    explore: bool,
    streams: SeedStreams,
    buffer: LabeledBuffer | None = None,
    random_steps: int = 0,
    keep_trace: bool = False,
) -> EpisodeResult:
    """Roll out one episode; with a buffer, store transitions and learn every step.

    The first ``random_steps`` actions are uniform random. The recorded reward
    always uses ``metric_weights`` so that methods trained with different
    weightings are scored on the same objective.
    """
    t0 = time.perf_counter()
    env = SarEnv(world, train_weights, reward_cfg)
    s = env.reset()
    omit_human = not world.config.scenario.human_centric
    total, path = 0.0, 0.0
    clearance = world.surface_distance(env.uav.pos)
    trace = [_start_line(env)] if keep_trace else []
    while True:
        if random_steps > 0:
            a = streams.noise.uniform(-1.0, 1.0, size=2)
            random_steps -= 1
        else:
            a = agent.select_action(s, explore=explore, rng=streams.noise)
        label = env.label
        prev = env.uav.pos
        out = env.step(a)
        s_next = env.observation()
        path += math.hypot(out.next_uav.pos[0] - prev[0], out.next_uav.pos[1] - prev[1])
        clearance = min(clearance, world.surface_distance(out.next_uav.pos))
        if train_weights is metric_weights:
            total += out.reward_total
        else:
            total += total_reward(out.reward_components, metric_weights[out.label], out.terminal, reward_cfg,
                                  omit_human=omit_human, progress=out.progress)
        if keep_trace:
            trace.append(trace_line(env.steps, out))
        if buffer is not None:
            # time-limit cut-offs still bootstrap
            done = out.terminal.is_terminal and out.terminal is not Terminal.TIMEOUT
            buffer.push(s, a, agent.clip_reward(out.reward_total), s_next, done, label)
            agent.train_step(buffer, out.label, streams.sample)
        s = s_next
        if out.terminal.is_terminal:
            break
    record = EpisodeRecord(index, seed, out.terminal, env.steps, total, path, clearance,
                           env.survivor.cumulative_drift, time.perf_counter() - t0)
    return EpisodeResult(record, trace)


def _start_line(env: SarEnv) -> str:
    u = env.uav
    fields = [0, u.pos[0], u.pos[1], u.vel[0], u.vel[1], u.heading, u.battery, env.label.name,
              0.0, 0.0, 0.0, 0.0, 0.0, Terminal.NONE.value]
    return ",".join(repr(float(f)) if isinstance(f, float) else str(f) for f in fields)


def checkpoint_dir(out: Path, seed: int) -> Path:
    return Path(out) / "checkpoints" / f"seed_{seed}"


def _prepare_out(out: Path) -> Path:
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    return out


def train_seed(cfg: RunConfig, seed: int, writer: EpisodeWriter | None = None) -> tuple[list[EpisodeRecord], list[str], Td3Agent]:
    streams = SeedStreams.from_seed(seed, TRAIN_STREAM)
    agent = Td3Agent(cfg.world.state_dim, 2, cfg.agent, seed=streams.init_seed)
    buffer = LabeledBuffer(cfg.agent.buffer_size, cfg.world.state_dim, 2)
    reward_cfg = cfg.reward_config()
    metric_w = cfg.weight_table()
    train_w = metric_w if cfg.algo is Mode.PROPOSED else CategoryWeightTable.uniform()
    records: list[EpisodeRecord] = []
    trace: list[str] = []
    random_left = cfg.start_steps
    for ep in range(1, cfg.episodes + 1):
        world = generate_world(cfg.world, streams.world)
        steps_before = buffer.pushes
        res = run_episode(world, agent, train_w, metric_w, reward_cfg, index=ep, seed=seed, explore=True,
                          streams=streams, buffer=buffer, random_steps=random_left,
                          keep_trace=ep == cfg.episodes)
        random_left = max(0, random_left - (buffer.pushes - steps_before))
        agent.episodes += 1
        records.append(res.record)
        if writer is not None:
            writer.write(res.record)
        if ep % 50 == 0:
            recent = records[-50:]
            sr = 100.0 * sum(r.outcome is Terminal.SUCCESS for r in recent) / len(recent)
            log.info("seed %d episode %d: last-50 SR %.1f%%, reward %.2f", seed, ep, sr,
                     float(np.mean([r.reward for r in recent])))
        if ep == cfg.episodes:
            trace = res.trace
    return records, trace, agent


def run_training(cfg: RunConfig) -> Summary:
    """Train every seed, streaming records to ``episodes.csv``; checkpoint each seed."""
    out = _prepare_out(cfg.out)
    write_text(out / "config.txt", format_config(cfg))
    all_records: list[EpisodeRecord] = []
    with EpisodeWriter(out / "episodes.csv") as writer:
        for seed in cfg.seeds:
            records, trace, agent = train_seed(cfg, seed, writer)
            all_records.extend(records)
            agent.save(checkpoint_dir(out, seed), extra={"scenario": cfg.scenario.value, "seed": seed})
            write_text(out / f"trace_{seed}.csv", TRACE_HEADER + "\n" + "".join(line + "\n" for line in trace))
    summary = summarize(all_records, cfg.ma_window)
    write_summary(out / "summary.txt", summary, cfg)
    return summary


def evaluate(agent: Td3Agent, cfg: RunConfig, n_episodes: int, seed: int) -> tuple[list[EpisodeRecord], list[str]]:
    """Frozen-policy rollouts on fresh worlds (no exploration noise, no learning)."""
    streams = SeedStreams.from_seed(seed, EVAL_STREAM)
    reward_cfg = cfg.reward_config()
    weights = cfg.weight_table()
    wcfg = cfg.eval_world()
    records, trace = [], []
    for ep in range(1, n_episodes + 1):
        world = generate_world(wcfg, streams.world)
        res = run_episode(world, agent, weights, weights, reward_cfg, index=ep, seed=seed, explore=False,
                          streams=streams, keep_trace=ep == n_episodes)
        records.append(res.record)
        if ep == n_episodes:
            trace = res.trace
    return records, trace


def run_eval(checkpoint, cfg: RunConfig, n_episodes: int | None = None) -> Summary:
    """Evaluate a checkpoint for every seed in ``cfg.seeds``; writes ``episodes.csv`` and ``summary.txt``."""
    n_episodes = cfg.eval_episodes if n_episodes is None else n_episodes
    agent = Td3Agent.load(checkpoint, expect=cfg.agent)
    if agent.state_dim != cfg.world.state_dim:
        raise CheckpointError(f"checkpoint expects state dimension {agent.state_dim}, "
                              f"world produces {cfg.world.state_dim}")
    out = _prepare_out(cfg.out)
    write_text(out / "config.txt", format_config(cfg))
    all_records = []
    with EpisodeWriter(out / "episodes.csv") as writer:
        for seed in cfg.seeds:
            records, trace = evaluate(agent, cfg, n_episodes, seed)
            for r in records:
                writer.write(r)
            all_records.extend(records)
            write_text(out / f"trace_{seed}.csv", TRACE_HEADER + "\n" + "".join(line + "\n" for line in trace))
    summary = summarize(all_records, cfg.ma_window)
    write_summary(out / "summary.txt", summary, cfg)
    return summary
