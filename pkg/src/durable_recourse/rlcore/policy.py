"""Tanh-squashed diagonal Gaussian policy over a box."""

from __future__ import annotations

import numpy as np

from ..errors import DivergenceError, ShapeError
from .nets import Mlp

LOG_STD_MIN = -5.0
LOG_STD_MAX = 1.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_LOG2 = np.log(2.0)


def log1m_tanh_sq(u):
    """Stable ``log(1 - tanh(u)**2)``."""
    return 2.0 * (_LOG2 - u - np.logaddexp(0.0, -2.0 * u))


class GaussianPolicy:
    """Maps observations to a squashed Gaussian over ``[low, high]``.

    The network head emits a mean and an unbounded log-std per action
    dimension; the log-std is softly mapped into
    ``[LOG_STD_MIN, LOG_STD_MAX]``. Samples are ``tanh(u)`` rescaled to the
    box. Log-probabilities returned by :meth:`sample` are densities of the
    normalized action ``tanh(u)`` in ``[-1, 1]``; :meth:`log_prob` also
    accounts for the affine map to the box.
    """

    def __init__(self, obs_dim, act_dim, hidden=(64, 64), low=-1.0, high=1.0, rng=None):
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.low = np.broadcast_to(np.asarray(low, dtype=np.float64), (self.act_dim,)).copy()
        self.high = np.broadcast_to(np.asarray(high, dtype=np.float64), (self.act_dim,)).copy()
        if np.any(self.high <= self.low):
            raise ShapeError("action box must have high > low")
        self.net = Mlp([self.obs_dim, *hidden, 2 * self.act_dim], rng=rng, head_scale=0.1)

    @property
    def scale(self):
        return 0.5 * (self.high - self.low)

    def to_box(self, y):
        return self.low + (np.asarray(y) + 1.0) * self.scale

    def to_unit(self, action):
        return (np.asarray(action, dtype=np.float64) - self.low) / self.scale - 1.0

    def distribution(self, obs):
        """Return ``(mean, log_std, raw_log_std, cache)`` in pre-squash space."""
        out, cache = self.net.forward(obs)
        mean = out[:, :self.act_dim]
        raw = out[:, self.act_dim:]
        log_std = LOG_STD_MIN + 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (np.tanh(raw) + 1.0)
        return mean, log_std, raw, cache

    def rsample(self, obs, noise):
        """Reparameterized sample for fixed standard-normal ``noise``.

        Returns a dict with the normalized action ``y``, its log-density
        ``logp`` (per row) and the intermediates needed by
        :meth:`backward`.
        """
        mean, log_std, raw, cache = self.distribution(obs)
        std = np.exp(log_std)
        u = mean + std * noise
        y = np.tanh(u)
        logp = np.sum(-0.5 * noise ** 2 - log_std - _HALF_LOG_2PI - log1m_tanh_sq(u), axis=1)
        return {"y": y, "u": u, "logp": logp, "noise": noise, "mean": mean,
                "log_std": log_std, "std": std, "raw": raw, "cache": cache}

    def backward(self, sample, grad_y, grad_logp):
        """Parameter gradients of ``sum(grad_y * y) + sum(grad_logp * logp)``."""
        y, u, std, noise = sample["y"], sample["u"], sample["std"], sample["noise"]
        grad_logp = np.asarray(grad_logp, dtype=np.float64).reshape(-1, 1)
        grad_u = grad_y * (1.0 - y ** 2) + grad_logp * 2.0 * np.tanh(u)
        grad_mean = grad_u
        grad_log_std = grad_u * std * noise - grad_logp
        dlog_draw = 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (1.0 - np.tanh(sample["raw"]) ** 2)
        grad_out = np.concatenate([grad_mean, grad_log_std * dlog_draw], axis=1)
        grads, _ = self.net.backward(sample["cache"], grad_out)
        return grads

    def sample(self, obs, rng):
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        noise = rng.standard_normal((obs.shape[0], self.act_dim))
        s = self.rsample(obs, noise)
        return self.to_box(s["y"]), s["logp"]

    def mode(self, obs):
        mean, _, _, _ = self.distribution(obs)
        return self.to_box(np.tanh(mean))

    def log_prob(self, obs, action):
        """Log-density of box-space ``action`` (change of variables included)."""
        y = np.clip(self.to_unit(action), -1.0 + 1e-12, 1.0 - 1e-12)
        y = np.atleast_2d(y)
        mean, log_std, _, _ = self.distribution(obs)
        u = np.arctanh(y)
        z = (u - mean) / np.exp(log_std)
        return np.sum(-0.5 * z ** 2 - log_std - _HALF_LOG_2PI - log1m_tanh_sq(u)
                      - np.log(self.scale), axis=1)


def select_action(policy, obs, mode="deterministic", rng=None):
    """Pick an action for one observation or a batch.

    ``mode="deterministic"`` returns the squashed mean. ``"stochastic"``
    returns ``(action, log_prob)`` drawn with ``rng``.
    """
    obs = np.asarray(obs, dtype=np.float64)
    single = obs.ndim == 1
    obs2 = np.atleast_2d(obs)
    if obs2.shape[1] != policy.obs_dim:
        raise ShapeError(f"expected observation width {policy.obs_dim}, got {obs2.shape[1]}")
    if mode == "deterministic":
        act = policy.mode(obs2)
        if not np.all(np.isfinite(act)):
            raise DivergenceError("policy produced a non-finite action")
        return act[0] if single else act
    if mode == "stochastic":
        if rng is None:
            raise ValueError("stochastic mode needs an rng")
        act, logp = policy.sample(obs2, rng)
        if not np.all(np.isfinite(act)):
            raise DivergenceError("policy produced a non-finite action")
        return (act[0], logp[0]) if single else (act, logp)
    raise ValueError(f"unknown mode {mode!r}")
