"""Soft actor-critic with twin critics and a fixed entropy temperature."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigurationError, DivergenceError
from .buffer import ReplayBuffer
from .nets import Adam, Mlp
from .policy import GaussianPolicy


@dataclass
class SacConfig:
    gamma: float = 0.99
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    tau: float = 0.005
    temperature: float = 0.05
    batch_size: int = 128
    warmup_steps: int = 1000
    hidden: tuple = (64, 64)
    buffer_capacity: int = 100_000
    reward_scale: float = 1.0
    updates_per_step: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.temperature < 0:
            raise ConfigurationError("temperature must be non-negative")
        if self.batch_size < 1 or self.buffer_capacity < 1:
            raise ConfigurationError("batch_size and buffer_capacity must be positive")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigurationError("tau must lie in (0, 1]")

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


class SacLearner:
    """Actor, twin critics with targets, replay buffer and optimizers.

    The critics consume the normalized action in ``[-1, 1]``; the buffer
    stores normalized actions too. Box-space actions only appear at the
    ``act`` boundary.
    """

    def __init__(self, obs_dim, act_dim, low=-1.0, high=1.0, config=None):
        self.config = config or SacConfig()
        cfg = self.config
        seeds = np.random.SeedSequence(cfg.rng_seed).spawn(5)
        self.rng = np.random.default_rng(seeds[0])
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.policy = GaussianPolicy(obs_dim, act_dim, cfg.hidden, low, high, rng=seeds[1])
        self.q1 = Mlp([obs_dim + act_dim, *cfg.hidden, 1], rng=seeds[2])
        self.q2 = Mlp([obs_dim + act_dim, *cfg.hidden, 1], rng=seeds[3])
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        self.actor_opt = Adam(self.policy.net.params, lr=cfg.actor_lr)
        self.q1_opt = Adam(self.q1.params, lr=cfg.critic_lr)
        self.q2_opt = Adam(self.q2.params, lr=cfg.critic_lr)
        self.buffer = ReplayBuffer(cfg.buffer_capacity, obs_dim, act_dim, seed=seeds[4])
        self.steps = 0
        self.updates = 0

    def act(self, obs, deterministic=False):
        """Box-space action for one observation."""
        obs = np.asarray(obs, dtype=np.float64)
        if deterministic:
            a = self.policy.mode(obs[None, :])[0]
        elif self.steps < self.config.warmup_steps:
            a = self.policy.to_box(self.rng.uniform(-1.0, 1.0, self.act_dim))
        else:
            a, _ = self.policy.sample(obs[None, :], self.rng)
            a = a[0]
        if not np.all(np.isfinite(a)):
            raise DivergenceError("policy produced a non-finite action", self.snapshot())
        return a

    def observe(self, obs, action, reward, next_obs, done):
        """Store a transition and run the configured number of updates."""
        y = np.clip(self.policy.to_unit(action), -1.0, 1.0)
        self.buffer.add(obs, y, reward, next_obs, done)
        self.steps += 1
        diag = None
        if self.steps >= self.config.warmup_steps and len(self.buffer) >= self.config.batch_size:
            for _ in range(self.config.updates_per_step):
                diag = self.update(self.buffer.sample(self.config.batch_size))
        return diag

    def _critic_pass(self, net, obs, y):
        return net.forward(np.concatenate([obs, y], axis=1))

    def critic_targets(self, batch):
        cfg = self.config
        nxt = batch["next_obs"]
        s = self.policy.rsample(nxt, self.rng.standard_normal((nxt.shape[0], self.act_dim)))
        inp = np.concatenate([nxt, s["y"]], axis=1)
        q_next = np.minimum(self.q1_target(inp), self.q2_target(inp))[:, 0]
        soft = q_next - cfg.temperature * s["logp"]
        return cfg.reward_scale * batch["rewards"] + cfg.gamma * (1.0 - batch["dones"]) * soft

    def update(self, batch):
        """One gradient step on both critics and the actor; returns losses."""
        cfg = self.config
        obs = batch["obs"]
        n = obs.shape[0]
        if n == 0:
            raise ValueError("empty batch")
        target = self.critic_targets(batch)

        losses = []
        for net, opt in ((self.q1, self.q1_opt), (self.q2, self.q2_opt)):
            q, cache = self._critic_pass(net, obs, batch["actions"])
            diff = q[:, 0] - target
            losses.append(float(np.mean(diff ** 2)))
            grads, _ = net.backward(cache, (2.0 / n) * diff[:, None])
            opt.step(grads)

        s = self.policy.rsample(obs, self.rng.standard_normal((n, self.act_dim)))
        q1, c1 = self._critic_pass(self.q1, obs, s["y"])
        q2, c2 = self._critic_pass(self.q2, obs, s["y"])
        use1 = (q1[:, 0] <= q2[:, 0])[:, None]
        qmin = np.where(use1, q1, q2)[:, 0]
        actor_loss = float(np.mean(cfg.temperature * s["logp"] - qmin))
        # d(-qmin)/dy through whichever critic is the minimum
        upstream = -np.where(use1, 1.0, 0.0) / n
        _, gin1 = self.q1.backward(c1, upstream)
        _, gin2 = self.q2.backward(c2, -np.where(use1, 0.0, 1.0) / n)
        grad_y = (gin1 + gin2)[:, self.obs_dim:]
        grads = self.policy.backward(s, grad_y, np.full(n, cfg.temperature / n))
        self.actor_opt.step(grads)

        self.q1_target.soft_update(self.q1, cfg.tau)
        self.q2_target.soft_update(self.q2, cfg.tau)
        self.updates += 1

        diag = {"critic1_loss": losses[0], "critic2_loss": losses[1],
                "actor_loss": actor_loss, "entropy": float(-np.mean(s["logp"]))}
        if not all(np.isfinite(v) for v in diag.values()):
            raise DivergenceError(f"non-finite loss at update {self.updates}", diag)
        return diag

    def snapshot(self):
        return {"steps": self.steps, "updates": self.updates,
                "buffer": len(self.buffer), "config": self.config.to_dict()}

    def networks(self):
        return {"actor": self.policy.net, "q1": self.q1, "q2": self.q2,
                "q1_target": self.q1_target, "q2_target": self.q2_target}
