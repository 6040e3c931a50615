"""Closed-form candidate behavior: dropout, implementation success, reapplication.

Scalar entry points mirror the formulas one-to-one; the ``*_array``
variants are what the environment calls on whole populations and are
backed by :mod:`durable_recourse.kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigurationError

#: feature difficulties used throughout the experiments
PAPER_DIFFICULTIES = (0.84, 0.15, 0.85, 0.78, 0.25, 0.18, 0.29, 0.83, 0.91, 0.10)


@dataclass(frozen=True)
class BehaviorParams:
    rho: float = 2.0     # score-gap dropout decay
    chi: float = 0.1     # reapplication-count dropout decay
    omega: float = 0.5   # gap x count interaction
    nu: float = 3.0      # reapply base decay
    beta: float = 0.05   # global success scale
    difficulties: tuple = PAPER_DIFFICULTIES

    def __post_init__(self):
        object.__setattr__(self, "difficulties", tuple(float(v) for v in self.difficulties))
        for name in ("rho", "chi", "omega", "nu"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigurationError(f"{name} must be finite and >= 0, got {v}")
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ConfigurationError(f"beta must be > 0, got {self.beta}")
        if any(not 0.0 <= d <= 1.0 for d in self.difficulties):
            raise ConfigurationError("difficulties must lie in [0, 1]")

    @property
    def d(self):
        return np.asarray(self.difficulties)


@dataclass(frozen=True)
class GapState:
    b: float          # max(0, goal - current score)
    q: int            # reapplications so far
    l: int = 0        # step of last application
    t: int = 0        # current step
    T: int = 1        # validity horizon

    @property
    def u(self):
        return (self.t - self.l) / self.T


def dropout_probability(gap: GapState, params: BehaviorParams) -> float:
    x = params.rho * gap.b + params.chi * gap.q + params.omega * gap.b * gap.q
    return -math.expm1(-x)


def attainability(x_f: float, x_cf: float) -> float:
    """``1 / (|x_cf - x_f| * x_cf) - 1``; ``inf`` when the product is zero."""
    denom = abs(x_cf - x_f) * x_cf
    if denom == 0.0:
        return math.inf
    return 1.0 / denom - 1.0


def success_probability(a: float, d_i: float, beta: float) -> float:
    if d_i == 0.0 or math.isinf(a):
        return 1.0
    return -math.expm1(-beta * a / d_i)


def reapply_probability(gap: GapState, params: BehaviorParams) -> float:
    u = gap.u
    base = math.exp(-params.nu * gap.b)
    return (1.0 - u) * base + u


def attainability_array(x_f, x_cf):
    return kernels.attainability(np.asarray(x_f, dtype=np.float64),
                                 np.asarray(x_cf, dtype=np.float64))


def success_probability_array(x_f, x_cf, d, beta):
    """Per-feature success probabilities for rows of (factual, counterfactual)."""
    x_f = np.atleast_2d(np.asarray(x_f, dtype=np.float64))
    x_cf = np.atleast_2d(np.asarray(x_cf, dtype=np.float64))
    return kernels.success_probability(x_f, x_cf, np.asarray(d, dtype=np.float64), float(beta))


def dropout_probability_array(b, q, params: BehaviorParams):
    return kernels.dropout_probability(np.asarray(b, dtype=np.float64),
                                       np.asarray(q, dtype=np.float64),
                                       params.rho, params.chi, params.omega)


def reapply_probability_array(b, u, params: BehaviorParams):
    return kernels.reapply_probability(np.asarray(b, dtype=np.float64),
                                       np.asarray(u, dtype=np.float64), params.nu)
