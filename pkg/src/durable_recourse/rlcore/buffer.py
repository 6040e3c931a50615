from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """Fixed-capacity ring of ``(obs, action, reward, next_obs, done)``."""

    def __init__(self, capacity, obs_dim, act_dim, seed=None):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.rng = np.random.default_rng(seed)
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, act_dim))
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity)
        self.inserted = 0

    def __len__(self):
        return min(self.inserted, self.capacity)

    def add(self, obs, action, reward, next_obs, done):
        i = self.inserted % self.capacity
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.dones[i] = float(done)
        self.inserted += 1

    def sample(self, batch_size):
        n = len(self)
        if n == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = self.rng.choice(n, size=min(batch_size, n), replace=False)
        return self.batch(idx)

    def batch(self, idx):
        return {
            "obs": self.obs[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_obs": self.next_obs[idx],
            "dones": self.dones[idx],
        }

    def newest(self, n):
        """The ``n`` most recent transitions, oldest first."""
        n = min(n, len(self))
        idx = [(self.inserted - n + j) % self.capacity for j in range(n)]
        return self.batch(np.array(idx, dtype=int))
