"""Equity, reliability, feasibility, cost, and the two reward functions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError, ShapeError, UndefinedMetric

LOG_FLOOR = 1e-6


@dataclass(frozen=True)
class RewardParams:
    alpha: float = 7.0
    tau: float = 5.0
    log_coeff: float = 0.90
    epsilon: float = 0.01
    varphi: float = 10.0
    psi: float = 300.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.tau > 0):
            raise ConfigurationError("alpha and tau must be positive")
        if self.psi < 10 * self.varphi:
            raise ConfigurationError("psi must dominate varphi (psi >= 10 * varphi)")


@dataclass
class StepMetrics:
    step: int
    gini: float | None
    rr: float | None
    rf: float | None
    n_rejected: int
    threshold: float
    reward_recommender: float = 0.0
    reward_predictor: float = 0.0
    mean_error: float | None = None
    mean_cost: float | None = None

    def row(self):
        return {k: ("" if v is None else v) for k, v in self.__dict__.items()}


def gini_index(goal_scores) -> float:
    g = np.asarray(goal_scores, dtype=np.float64).ravel()
    if g.size == 0:
        raise UndefinedMetric("Gini index of an empty set")
    if g.sum() <= 0:
        raise UndefinedMetric("Gini index needs a positive total")
    return kernels.gini_pairwise(g)


def recourse_reliability(succ_ids, accepted_ids):
    """Share of successful reapplicants that were accepted; ``None`` if there were none."""
    succ = set(succ_ids)
    if not succ:
        return None
    return len(succ & set(accepted_ids)) / len(succ)


def recourse_feasibility(succ_ids, window_rejected_ids):
    """Share of recently rejected candidates that came back with the full change.

    Dropouts stay in the denominator.
    """
    window = set(window_rejected_ids)
    if not window:
        return None
    return len(set(succ_ids)) / len(window)


def _log_term(metric, c):
    return 1.0 + c * math.log(max(metric, LOG_FLOOR))


def predictor_reward(rr, rf, params: RewardParams) -> float:
    """Log-shaped reward on reliability and feasibility.

    A metric that is undefined for the step (``None``) contributes zero.
    """
    r = 0.0
    if rr is not None:
        r += params.alpha * _log_term(rr, params.log_coeff)
    if rf is not None:
        r += params.tau * _log_term(rf, params.log_coeff)
    return r


def recommender_reward(error, est_cost, params: RewardParams, phase="full") -> float:
    if phase == "warmup":
        return -params.psi * error
    if phase != "full":
        raise ValueError(f"unknown phase {phase!r}")
    r = -params.varphi * est_cost
    if error > params.epsilon:
        r -= params.psi * (error - params.epsilon)
    return r


def true_cost(x_f, x_cf, d) -> float:
    """Difficulty-weighted L1 change; accepts single vectors or row batches."""
    x_f = np.asarray(x_f, dtype=np.float64)
    x_cf = np.asarray(x_cf, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if x_f.shape != x_cf.shape or x_f.shape[-1] != d.shape[-1]:
        raise ShapeError(f"shape mismatch: {x_f.shape}, {x_cf.shape}, {d.shape}")
    return np.abs(x_cf - x_f) @ d
