"""Classical counterfactual generators used in place of the learned recommender.

All three work on the linear-logit :class:`~durable_recourse.scorer.ScoreModel`:

* ``ustun_exact`` - minimal L1 change, solved exactly;
* ``wachter_gradient`` - penalized score matching with an L1 proximity term;
* ``dice_diverse`` - a simplified diversity-regularized variant of the
  above (reported as "diverse-CF (simplified)").
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError, InfeasibleGoal, ShapeError
from .scorer import ScoreModel, sigmoid

DICE_LABEL = "diverse-CF (simplified)"


class ConvergenceWarning(UserWarning):
    def __init__(self, message, error):
        super().__init__(message)
        self.error = error


@dataclass
class CfRequest:
    x_f: np.ndarray
    goal: float
    model: ScoreModel
    tolerance: float = 1e-3

    def __post_init__(self):
        self.x_f = np.asarray(self.x_f, dtype=np.float64)
        if self.x_f.shape != (self.model.num_features,):
            raise ShapeError(f"x_f has shape {self.x_f.shape}, model expects "
                             f"({self.model.num_features},)")
        if not 0.0 < self.goal < 1.0:
            raise ConfigurationError(f"goal must lie in (0, 1), got {self.goal}")


GOAL_MARGIN = 1e-12


def _logit(p):
    return math.log(p) - math.log1p(-p)


def max_attainable_score(model: ScoreModel) -> float:
    corner = (model.weights > 0).astype(float)
    return float(model.score(corner))


def ustun_exact(req: CfRequest) -> np.ndarray:
    """Minimal-L1 counterfactual reaching ``goal`` exactly.

    With one linear constraint on the logit and box bounds this is a
    fractional knapsack: spend change on features in order of decreasing
    ``|w|``.
    """
    m = req.model
    gain = _logit(req.goal) - float(m.logit(req.x_f))
    if gain <= 0.0:
        return req.x_f.copy()
    # a hair of extra logit keeps rounding from landing just under the goal
    x_cf, remaining = kernels.greedy_l1(req.x_f, m.weights, gain + GOAL_MARGIN)
    if remaining > 1e-12:
        best = max_attainable_score(m)
        raise InfeasibleGoal(f"goal {req.goal:.6f} above the best attainable score {best:.6f}",
                             best)
    return x_cf


def _smooth_grad(m, x, goal, lam):
    s = np.asarray(sigmoid(x @ m.weights + m.bias))
    err = s - goal
    # d/dx lam * (s - g)^2
    grad = (2.0 * lam * err * s * (1.0 - s))[..., None] * m.weights
    return grad, err


def _prox(x, x_f, thresh):
    """Soft-threshold toward ``x_f`` then project onto the unit box."""
    delta = x - x_f
    delta = np.sign(delta) * np.maximum(np.abs(delta) - thresh, 0.0)
    return np.clip(x_f + delta, 0.0, 1.0)


LAMBDAS = tuple(10.0 ** p for p in range(0, 7))


def wachter_gradient(req: CfRequest, lambdas=LAMBDAS, iters=500) -> np.ndarray:
    """Minimize ``lam * (M(x') - g)^2 + |x' - x_f|_1`` over the unit box.

    Proximal (soft-threshold + box projection) gradient steps with ``lam``
    escalated until the score error is within tolerance. Warns with
    :class:`ConvergenceWarning` and returns the closest iterate otherwise.
    """
    m = req.model
    x_f = req.x_f
    if abs(float(m.score(x_f)) - req.goal) <= req.tolerance:
        return x_f.copy()
    wn2 = float(m.weights @ m.weights)
    x = x_f.copy()
    best, best_err = x.copy(), abs(float(m.score(x)) - req.goal)
    for lam in lambdas:
        step = 1.0 / (0.35 * lam * wn2 + 1e-12)
        for _ in range(iters):
            grad, err = _smooth_grad(m, x, req.goal, lam)
            x = _prox(x - step * grad, x_f, step)
            err = abs(float(m.score(x)) - req.goal)
            if err < best_err:
                best, best_err = x.copy(), err
        if best_err <= req.tolerance:
            return best
    warnings.warn(ConvergenceWarning(
        f"wachter search stopped with error {best_err:.3g} > {req.tolerance:.3g}", best_err))
    return best


def diverse_counterfactuals(req: CfRequest, k_cfs=4, diversity_floor=0.05, repulsion=0.1,
                            lambdas=LAMBDAS, iters=500, seed=0):
    """Jointly optimize ``k_cfs`` counterfactuals that repel each other.

    Each member minimizes the score-matching objective of
    :func:`wachter_gradient`; members closer than ``diversity_floor`` (L1)
    are pushed apart with weight ``repulsion * lam``. Member 0 starts at
    ``x_f``, the others at seeded jitters of it. Returns ``(members, errors)``.
    """
    if k_cfs < 1:
        raise ConfigurationError("k_cfs must be >= 1")
    m = req.model
    x_f = req.x_f
    z = x_f.size
    rng = np.random.default_rng(seed)
    xs = np.repeat(x_f[None, :], k_cfs, axis=0)
    if k_cfs > 1:
        xs[1:] = np.clip(xs[1:] + rng.uniform(-0.02, 0.02, size=(k_cfs - 1, z)), 0.0, 1.0)
    if abs(float(m.score(x_f)) - req.goal) <= req.tolerance:
        errs = np.abs(m.score(xs) - req.goal)
        return xs, errs
    wn2 = float(m.weights @ m.weights)
    margin = 1.1 * diversity_floor
    order_sign = np.sign(np.subtract.outer(np.arange(k_cfs), np.arange(k_cfs))).astype(float)
    for lam in lambdas:
        step = 1.0 / (0.35 * lam * wn2 + repulsion * lam * k_cfs + 1e-12)
        for _ in range(iters):
            grad, _ = _smooth_grad(m, xs, req.goal, lam)
            if k_cfs > 1:
                diff = xs[:, None, :] - xs[None, :, :]
                close = (np.abs(diff).sum(axis=2) < margin)
                np.fill_diagonal(close, False)
                # coincident members get pushed apart by index order
                push = np.where(diff == 0.0, order_sign[..., None], np.sign(diff))
                grad = grad - repulsion * lam * (push * close[..., None]).sum(axis=1)
            xs = _prox(xs - step * grad, x_f, step)
        errs = np.abs(m.score(xs) - req.goal)
        if np.all(errs <= req.tolerance):
            break
    return xs, np.abs(m.score(xs) - req.goal)


def dice_diverse(req: CfRequest, k_cfs=4, **kw) -> np.ndarray:
    """Smallest-change member of :func:`diverse_counterfactuals` that meets the goal."""
    if k_cfs == 1:
        return wachter_gradient(req, **{k: v for k, v in kw.items() if k in ("lambdas", "iters")})
    xs, errs = diverse_counterfactuals(req, k_cfs, **kw)
    change = np.abs(xs - req.x_f).sum(axis=1)
    ok = errs <= req.tolerance
    if not ok.any():
        warnings.warn(ConvergenceWarning(
            f"no diverse member within tolerance (best error {errs.min():.3g})", float(errs.min())))
        return xs[int(np.argmin(errs))]
    order = np.lexsort((np.arange(len(xs)), change + np.where(ok, 0.0, np.inf)))
    return xs[order[0]]


class BaselineRecommender:
    """Adapts a generator to the batch ``recommend(x_f, goal)`` interface."""

    def __init__(self, name, model, tolerance=1e-3, **kw):
        if name not in GENERATORS:
            raise ConfigurationError(f"unknown baseline {name!r}; choose from {sorted(GENERATORS)}")
        self.name = name
        self.label = DICE_LABEL if name == "dice" else name
        self.model = model
        self.tolerance = tolerance
        self.kw = kw

    def recommend(self, x_f, goal):
        x_f = np.atleast_2d(np.asarray(x_f, dtype=np.float64))
        out = np.empty_like(x_f)
        fn = GENERATORS[self.name]
        g = min(max(float(goal), 1e-9), 1.0 - 1e-9)
        for i, x in enumerate(x_f):
            if float(self.model.score(x)) >= goal:
                out[i] = x
                continue
            req = CfRequest(x, g, self.model, self.tolerance)
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ConvergenceWarning)
                    out[i] = fn(req, **self.kw)
            except InfeasibleGoal:
                out[i] = (self.model.weights > 0).astype(float)
        return out


GENERATORS = {"ustun": ustun_exact, "wachter": wachter_gradient, "dice": dice_diverse}
