"""TD3 learner with similarity-based replay selection, plus TD3/DDPG baselines."""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .approximator import AdamState, CheckpointError, Mlp, adam_step, atomic_write, polyak_update
from .enums import ConfigError, Label
from .replay import Batch, LabeledBuffer, select_by_td

CHECKPOINT_VERSION = 1


class Mode(str, enum.Enum):
    PROPOSED = "proposed"
    TD3 = "td3"
    DDPG = "ddpg"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ConfigError(f"unknown algo {value!r}; expected proposed, td3 or ddpg") from None


@dataclass
class AgentConfig:
    gamma: float = 0.99
    tau: float = 0.005
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    batch: int = 128
    policy_update_frequency: int = 2
    exploration_noise_sigma: float = 0.1
    policy_noise_sigma: float = 0.2
    noise_clip: float = 0.5
    hidden: list[int] = field(default_factory=lambda: [400, 300])
    mode: Mode = Mode.PROPOSED
    buffer_size: int = 500_000
    reward_clip: float = 20.0

    def __post_init__(self):
        self.mode = Mode.parse(self.mode)
        self.hidden = [int(h) for h in self.hidden]
        if self.mode is Mode.DDPG:
            # single critic, no target smoothing, actor updated every step
            self.policy_update_frequency = 1
        if not 0 < self.gamma < 1:
            raise ConfigError("agent.gamma must lie in (0, 1)")
        if not 0 <= self.tau <= 1:
            raise ConfigError("agent.tau must lie in [0, 1]")
        for name in ("actor_lr", "critic_lr", "batch", "policy_update_frequency", "buffer_size", "reward_clip"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"agent.{name} must be positive")
        for name in ("exploration_noise_sigma", "policy_noise_sigma", "noise_clip"):
            if getattr(self, name) < 0:
                raise ConfigError(f"agent.{name} must be non-negative")
        if not self.hidden or any(h <= 0 for h in self.hidden):
            raise ConfigError(f"agent.hidden must be a non-empty list of positive sizes, got {self.hidden}")

    @property
    def twin(self) -> bool:
        return self.mode is not Mode.DDPG

    @property
    def similarity_replay(self) -> bool:
        return self.mode is Mode.PROPOSED

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        return d


@dataclass
class Diagnostics:
    critic_loss: float
    actor_loss: float | None
    mean_abs_td: float
    similar_fraction: float | None
    update: int


class Td3Agent:
    def __init__(self, state_dim: int, action_dim: int = 2, config: AgentConfig | None = None, seed: int = 0):
        self.config = config or AgentConfig()
        self.state_dim = state_dim
        self.action_dim = action_dim
        cfg = self.config
        actor_rng, c1_rng, c2_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
        self.actor = Mlp([state_dim, *cfg.hidden, action_dim], "tanh", actor_rng)
        self.critic1 = Mlp([state_dim + action_dim, *cfg.hidden, 1], "identity", c1_rng)
        self.critic2 = Mlp([state_dim + action_dim, *cfg.hidden, 1], "identity", c2_rng) if cfg.twin else None
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy() if self.critic2 is not None else None
        self.actor_opt = AdamState.for_net(self.actor)
        self.critic1_opt = AdamState.for_net(self.critic1)
        self.critic2_opt = AdamState.for_net(self.critic2) if self.critic2 is not None else None
        self.updates = 0
        self.episodes = 0

    # -- acting --------------------------------------------------------

    def select_action(self, state, explore: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        a = self.actor(np.asarray(state, dtype=float))
        if explore:
            a = a + rng.normal(0.0, self.config.exploration_noise_sigma, size=a.shape)
        return np.clip(a, -1.0, 1.0)

    def target_action(self, s_next, rng: np.random.Generator | None = None, sigma: float | None = None) -> np.ndarray:
        cfg = self.config
        a = self.actor_target(np.asarray(s_next, dtype=float))
        if not cfg.twin:
            return a
        sigma = cfg.policy_noise_sigma if sigma is None else sigma
        if sigma > 0:
            if rng is None:
                raise ValueError("target smoothing needs an rng when sigma > 0")
            noise = np.clip(rng.normal(0.0, sigma, size=a.shape), -cfg.noise_clip, cfg.noise_clip)
            a = a + noise
        return np.clip(a, -1.0, 1.0)

    # -- values --------------------------------------------------------

    def _sa(self, s, a) -> np.ndarray:
        return np.concatenate([np.atleast_2d(s), np.atleast_2d(a)], axis=1)

    def critic_targets(self, batch: Batch, rng: np.random.Generator | None) -> np.ndarray:
        a2 = self.target_action(batch.s_next, rng)
        sa2 = self._sa(batch.s_next, a2)
        q_next = self.critic1_target(sa2)[:, 0]
        if self.critic2_target is not None:
            q_next = np.minimum(q_next, self.critic2_target(sa2)[:, 0])
        return batch.r + self.config.gamma * (1.0 - batch.done) * q_next

    def td_error(self, batch: Batch, rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(delta, target) per experience; delta is measured against critic 1."""
        y = self.critic_targets(batch, rng)
        q = self.critic1(self._sa(batch.s, batch.a))[:, 0]
        return y - q, y

    # -- learning ------------------------------------------------------

    def _regress(self, net: Mlp, opt: AdamState, sa: np.ndarray, y: np.ndarray) -> float:
        out, inputs = net.forward_cached(sa)
        err = out[:, 0] - y
        grads = net.backward(sa, (2.0 / len(y)) * err[:, None], cache=(out, inputs), need_input_grad=False)
        adam_step(net, grads, opt, self.config.critic_lr)
        return float(np.mean(err * err))

    def update_critics(self, batch: Batch, y: np.ndarray) -> float:
        sa = self._sa(batch.s, batch.a)
        loss = self._regress(self.critic1, self.critic1_opt, sa, y)
        if self.critic2 is not None:
            loss = 0.5 * (loss + self._regress(self.critic2, self.critic2_opt, sa, y))
        return loss

    def update_actor(self, s: np.ndarray) -> float:
        a_out, a_cache = self.actor.forward_cached(s)
        sa = self._sa(s, a_out)
        q, q_cache = self.critic1.forward_cached(sa)
        n = len(s)
        dq = self.critic1.backward(sa, np.full_like(q, 1.0 / n), cache=(q, q_cache)).inputs
        dq_da = dq[:, self.state_dim:]
        grads = self.actor.backward(s, -dq_da, cache=(a_out, a_cache), need_input_grad=False)
        adam_step(self.actor, grads, self.actor_opt, self.config.actor_lr)
        return float(-q.mean())

    def update_targets(self) -> None:
        tau = self.config.tau
        polyak_update(self.actor_target, self.actor, tau)
        polyak_update(self.critic1_target, self.critic1, tau)
        if self.critic2 is not None:
            polyak_update(self.critic2_target, self.critic2, tau)

    def train_on_batch(self, batch: Batch, y: np.ndarray | None = None, rng=None) -> tuple[float, float | None]:
        if y is None:
            y = self.critic_targets(batch, rng)
        self.updates += 1
        critic_loss = self.update_critics(batch, y)
        actor_loss = None
        if self.updates % self.config.policy_update_frequency == 0:
            actor_loss = self.update_actor(batch.s)
            self.update_targets()
        return critic_loss, actor_loss

    def train_step(self, buffer: LabeledBuffer, current_label: Label, rng: np.random.Generator) -> Diagnostics | None:
        """One learning iteration; returns None while the buffer is too small."""
        cfg = self.config
        if not buffer.ready(cfg.batch):
            return None
        similar_fraction = None
        if cfg.similarity_replay:
            sim_idx, rnd_idx = buffer.sample_pair_batch(current_label, cfg.batch, rng)
            sim, rnd = buffer.gather(sim_idx), buffer.gather(rnd_idx)
            d_sim, y_sim = self.td_error(sim, rng)
            d_rnd, y_rnd = self.td_error(rnd, rng)
            keep_sim = np.abs(d_sim) >= np.abs(d_rnd)
            batch = buffer.gather(select_by_td(sim_idx, rnd_idx, d_sim, d_rnd))
            y = np.where(keep_sim, y_sim, y_rnd)
            delta = np.where(keep_sim, d_sim, d_rnd)
            similar_fraction = float(keep_sim.mean())
        else:
            batch = buffer.gather(buffer.sample_uniform(cfg.batch, rng))
            delta, y = self.td_error(batch, rng)
        critic_loss, actor_loss = self.train_on_batch(batch, y)
        return Diagnostics(critic_loss, actor_loss, float(np.mean(np.abs(delta))), similar_fraction, self.updates)

    def clip_reward(self, r: float) -> float:
        c = self.config.reward_clip
        return min(max(r, -c), c)

    # -- checkpoints ---------------------------------------------------

    def _nets(self) -> dict[str, Mlp]:
        nets = {"actor": self.actor, "actor_target": self.actor_target,
                "critic1": self.critic1, "critic1_target": self.critic1_target}
        if self.critic2 is not None:
            nets["critic2"] = self.critic2
            nets["critic2_target"] = self.critic2_target
        return nets

    def save(self, path, extra: dict | None = None) -> None:
        """Write a checkpoint directory: one parameter file per network plus manifest.json."""
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        for name, net in self._nets().items():
            net.save(path / f"{name}.mlp")
        manifest = {"version": CHECKPOINT_VERSION, "mode": self.config.mode.value, "config": self.config.to_dict(),
                    "state_dim": self.state_dim, "action_dim": self.action_dim,
                    "updates": self.updates, "episodes": self.episodes, **(extra or {})}
        atomic_write(path / "manifest.json", (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())

    @classmethod
    def load(cls, path, expect: AgentConfig | None = None) -> "Td3Agent":
        path = Path(path)
        try:
            manifest = json.loads((path / "manifest.json").read_text())
        except (OSError, ValueError) as exc:
            raise CheckpointError(f"cannot read checkpoint manifest in {path}: {exc}") from None
        if manifest.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {manifest.get('version')!r}")
        known = {f.name for f in fields(AgentConfig)}
        cfg = AgentConfig(**{k: v for k, v in manifest["config"].items() if k in known})
        if expect is not None and (expect.hidden != cfg.hidden or expect.mode != cfg.mode):
            raise CheckpointError(f"checkpoint has hidden={cfg.hidden} mode={cfg.mode.value}, "
                                  f"expected hidden={expect.hidden} mode={expect.mode.value}")
        agent = cls(manifest["state_dim"], manifest["action_dim"], cfg)
        loaded = {}
        for name, net in agent._nets().items():
            loaded[name] = Mlp.load(path / f"{name}.mlp", net.layer_sizes, net.output_activation)
        for name, net in loaded.items():
            setattr(agent, name, net)
        agent.actor_opt = AdamState.for_net(agent.actor)
        agent.critic1_opt = AdamState.for_net(agent.critic1)
        agent.critic2_opt = AdamState.for_net(agent.critic2) if agent.critic2 is not None else None
        agent.updates = int(manifest["updates"])
        agent.episodes = int(manifest.get("episodes", 0))
        return agent
