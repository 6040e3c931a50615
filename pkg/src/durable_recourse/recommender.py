"""The counterfactual recommender: maps (features, goal score) to a target vector.

Trained with SAC in a single-candidate world where the candidate reapplies
every step, alongside an online estimate of per-feature difficulty.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import checkpoint
from .behavior import BehaviorParams, attainability_array, success_probability_array
from .errors import ConfigurationError, DivergenceError, ShapeError
from .metrics import RewardParams, recommender_reward, true_cost
from .rlcore import GaussianPolicy, SacConfig, SacLearner, select_action
from .scorer import ScoreModel

log = logging.getLogger(__name__)

ATTEMPT_TOL = 1e-9


@dataclass
class DifficultyEstimator:
    """Online per-feature difficulty estimates with a harmonic learning-rate decay."""

    estimates: np.ndarray
    visits: np.ndarray
    beta: float
    base_rate: float = 0.05

    @classmethod
    def fresh(cls, z, beta, base_rate=0.05, init=0.5):
        return cls(np.full(z, float(init)), np.zeros(z, dtype=np.int64), float(beta), base_rate)

    def rates(self):
        return self.base_rate / (1.0 + self.visits)

    def update(self, attempted, outcomes, attain):
        """Apply one round of observed outcomes in place.

        ``attempted`` masks the features that were asked to change,
        ``outcomes`` holds 1 for a success and 0 for a failure and
        ``attain`` the attainability of each change. Features with
        infinite attainability are skipped.
        """
        attain = np.asarray(attain, dtype=np.float64)
        # a move onto zero has infinite attainability and always succeeds,
        # so it carries no information about difficulty
        attempted = np.asarray(attempted, dtype=bool) & np.isfinite(attain)
        if not attempted.any():
            return self
        y = np.asarray(outcomes, dtype=np.float64)[attempted]
        a = attain[attempted]
        d = self.estimates[attempted]
        p = np.where(d > 0.0, -np.expm1(-self.beta * a / np.maximum(d, 1e-300)), 1.0)
        err = (p - y) * a
        self.estimates[attempted] = np.clip(d + self.rates()[attempted] * err, 0.0, 1.0)
        self.visits[attempted] += 1
        return self

    def error(self, d_true):
        """Summed absolute estimation error against the true difficulties."""
        return float(np.abs(np.asarray(d_true) - self.estimates).sum())


def estimator_update(est: DifficultyEstimator, attempted, outcomes, attain) -> DifficultyEstimator:
    return est.update(attempted, outcomes, attain)


def estimated_cost(x_f, x_cf, est: DifficultyEstimator):
    x_f = np.asarray(x_f, dtype=np.float64)
    x_cf = np.asarray(x_cf, dtype=np.float64)
    if x_f.shape != x_cf.shape or x_f.shape[-1] != est.estimates.size:
        raise ShapeError(f"shape mismatch: {x_f.shape} vs {x_cf.shape}")
    return np.abs(x_cf - x_f) @ est.estimates


@dataclass
class RecommenderEpisodeConfig:
    max_steps: int = 10
    goal_margin: float = 0.02
    goal_cap: float = 0.99
    warmup_episodes: int = 1000
    full_episodes: int = 4000
    max_change: float = 0.15
    deadzone: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be >= 1")
        if not 0.0 <= self.deadzone < 1.0:
            raise ConfigurationError("deadzone must lie in [0, 1)")
        if not 0 < self.goal_margin < self.goal_cap < 1:
            raise ConfigurationError("need 0 < goal_margin < goal_cap < 1")


def recommender_sac_config(seed=0, **overrides):
    """SAC settings used for the recommender unless the caller overrides them."""
    base = dict(gamma=0.0, actor_lr=1e-3, critic_lr=1e-3, tau=0.01, temperature=0.05,
                batch_size=128, warmup_steps=2000, hidden=(64, 64), buffer_capacity=100_000,
                reward_scale=0.1, updates_per_step=4, rng_seed=seed)
    base.update(overrides)
    return SacConfig(**base)


def _logit(p):
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    return np.log(p) - np.log1p(-p)


def recommender_obs(model: ScoreModel, x, goal):
    """Policy input for a batch of candidates sharing one goal."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    s = model.score(x)
    gap = np.clip((_logit(goal) - _logit(s)) / 5.0, -2.0, 2.0)
    n = x.shape[0]
    return np.column_stack([x, np.full(n, goal), s, gap])


def action_to_counterfactual(x_f, action, max_change=1.0, deadzone=0.0):
    """Map a policy action in ``[-1, 1]^z`` to a counterfactual in the unit box.

    Components with ``|a| <= deadzone`` leave the feature unchanged; the rest
    of the range scales linearly up to ``max_change``.
    """
    a = np.asarray(action, dtype=np.float64)
    mag = np.maximum(np.abs(a) - deadzone, 0.0) / (1.0 - deadzone)
    return np.clip(x_f + max_change * np.sign(a) * mag, 0.0, 1.0)


class PolicyRecommender:
    """Deterministic-mode wrapper exposing ``recommend(x_f, goal)``.

    Candidates already at or above ``goal`` get the identity recommendation.
    """

    label = "ours"

    def __init__(self, policy: GaussianPolicy, model: ScoreModel, max_change=1.0,
                 estimator: DifficultyEstimator | None = None, meta=None, deadzone=0.0):
        self.policy = policy
        self.model = model
        self.max_change = max_change
        self.deadzone = deadzone
        self.estimator = estimator
        self.meta = dict(meta or {})

    def counterfactual(self, x_f, action):
        return action_to_counterfactual(x_f, action, self.max_change, self.deadzone)

    def recommend(self, x_f, goal, mode="deterministic", rng=None):
        x_f = np.atleast_2d(np.asarray(x_f, dtype=np.float64))
        if x_f.shape[0] == 0:
            return x_f.copy()
        obs = recommender_obs(self.model, x_f, goal)
        if mode == "deterministic":
            act = select_action(self.policy, obs, "deterministic")
        else:
            act, _ = select_action(self.policy, obs, "stochastic", rng=rng)
        out = self.counterfactual(x_f, act)
        above = self.model.score(x_f) >= goal
        out[above] = x_f[above]
        if not np.all(np.isfinite(out)):
            raise DivergenceError("recommender produced a non-finite counterfactual")
        return out

    def save(self, path):
        z = self.model.num_features
        header = {"kind": "recommender", "obs_dim": self.policy.obs_dim,
                  "act_dim": self.policy.act_dim, "hidden": list(self.policy.net.sizes[1:-1]),
                  "max_change": self.max_change, "deadzone": self.deadzone, "meta": self.meta,
                  "z": z}
        arrays = {"policy": self.policy.net.flat(), "low": self.policy.low,
                  "high": self.policy.high, "scorer_weights": self.model.weights,
                  "scorer_bias": np.array([self.model.bias])}
        if self.estimator is not None:
            header["beta"] = self.estimator.beta
            header["base_rate"] = self.estimator.base_rate
            arrays["d_hat"] = self.estimator.estimates
            arrays["visits"] = self.estimator.visits.astype(np.float64)
        checkpoint.save(path, "recommender", header, arrays)

    @classmethod
    def load(cls, path, model: ScoreModel):
        header, arrays = checkpoint.load(path, expect_kind="recommender")
        if not np.array_equal(arrays["scorer_weights"], model.weights):
            raise ConfigurationError(f"{path} was trained against a different score model")
        policy = GaussianPolicy(header["obs_dim"], header["act_dim"], tuple(header["hidden"]),
                                arrays["low"], arrays["high"])
        policy.net.load_flat(arrays["policy"])
        est = None
        if "d_hat" in arrays:
            est = DifficultyEstimator(arrays["d_hat"], arrays["visits"].astype(np.int64),
                                      header["beta"], header["base_rate"])
        return cls(policy, model, header["max_change"], est, header.get("meta"),
                   header.get("deadzone", 0.0))


class SingleCandidateWorld:
    """One candidate chasing a goal score; reapplies after every attempt."""

    def __init__(self, model: ScoreModel, behavior: BehaviorParams, config: RecommenderEpisodeConfig,
                 rng, success_override=None):
        self.model = model
        self.behavior = behavior
        self.config = config
        self.rng = rng
        self.success_override = success_override
        self.d = behavior.d

    def sample_start(self):
        cfg = self.config
        while True:
            x = self.model.marginals.sample(1, self.rng)[0]
            s = float(self.model.score(x))
            if s + cfg.goal_margin < cfg.goal_cap:
                return x, float(self.rng.uniform(s + cfg.goal_margin, cfg.goal_cap))

    def attempt(self, x, x_cf):
        """Per-feature success draws; returns ``(new_x, attempted, outcomes, attain)``."""
        attempted = np.abs(x_cf - x) > ATTEMPT_TOL
        attain = attainability_array(x, x_cf)
        if self.success_override is None:
            p = success_probability_array(x, x_cf, self.d, self.behavior.beta)[0]
        else:
            p = np.full(x.size, float(self.success_override))
        hit = attempted & (self.rng.random(x.size) < p)
        new_x = np.where(hit, x_cf, x)
        return new_x, attempted, hit.astype(np.float64), attain


@dataclass
class EpisodeTrace:
    goal: float
    start_score: float
    errors: list = field(default_factory=list)
    est_costs: list = field(default_factory=list)
    true_costs: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    reached: bool = False

    @property
    def length(self):
        return len(self.errors)


def run_recommender_episode(recommender, world: SingleCandidateWorld, est: DifficultyEstimator,
                            reward_params=RewardParams(), phase="full", learner=None,
                            start=None, update_estimator=True):
    """Roll out one episode.

    With a ``learner`` the policy acts stochastically through it and every
    transition is stored (and trained on); otherwise ``recommender`` acts
    deterministically.
    """
    model, cfg = world.model, world.config
    x, goal = start if start is not None else world.sample_start()
    x = np.array(x, dtype=np.float64)
    trace = EpisodeTrace(goal=goal, start_score=float(model.score(x)))
    for _ in range(cfg.max_steps):
        obs = recommender_obs(model, x, goal)[0]
        if learner is not None:
            action = learner.act(obs)
            x_cf = action_to_counterfactual(x, action, cfg.max_change, cfg.deadzone)
        else:
            x_cf = recommender.recommend(x[None, :], goal)[0]
        if not np.all(np.isfinite(x_cf)):
            raise DivergenceError("non-finite recommendation")
        err = abs(float(model.score(x_cf)) - goal)
        c_hat = float(estimated_cost(x, x_cf, est))
        r = recommender_reward(err, c_hat, reward_params, phase)
        trace.errors.append(err)
        trace.est_costs.append(c_hat)
        trace.true_costs.append(float(true_cost(x, x_cf, world.d)))
        trace.rewards.append(r)
        new_x, attempted, outcomes, attain = world.attempt(x, x_cf)
        if update_estimator:
            est.update(attempted, outcomes, attain)
        x = new_x
        done = float(model.score(x)) >= goal
        if learner is not None:
            next_obs = recommender_obs(model, x, goal)[0]
            learner.observe(obs, action, r, next_obs, done)
        if done:
            trace.reached = True
            break
    return trace


def train_recommender(model: ScoreModel, config=None, sac=None, behavior=None,
                      reward_params=None, diagnostics_path=None, progress=None):
    """Two-phase training: error-only warm-up, then error plus estimated cost.

    Returns ``(PolicyRecommender, DifficultyEstimator, rows)`` where ``rows``
    holds per-episode diagnostics.
    """
    config = config or RecommenderEpisodeConfig()
    behavior = behavior or BehaviorParams()
    reward_params = reward_params or RewardParams()
    sac = sac or recommender_sac_config(config.rng_seed)
    z = model.num_features
    if len(behavior.difficulties) != z:
        raise ConfigurationError("difficulty vector length does not match the score model")
    learner = SacLearner(z + 3, z, -1.0, 1.0, sac)
    est = DifficultyEstimator.fresh(z, behavior.beta)
    world = SingleCandidateWorld(model, behavior, config, np.random.default_rng(config.rng_seed))
    rows = []
    total = config.warmup_episodes + config.full_episodes
    for ep in range(total):
        phase = "warmup" if ep < config.warmup_episodes else "full"
        try:
            tr = run_recommender_episode(None, world, est, reward_params, phase, learner=learner)
        except DivergenceError as exc:
            exc.diagnostics["episode"] = ep
            raise DivergenceError(f"recommender training diverged at episode {ep}: {exc}",
                                  exc.diagnostics) from exc
        rows.append({"episode": ep, "phase": phase, "steps": tr.length,
                     "mean_error": float(np.mean(tr.errors)),
                     "mean_est_cost": float(np.mean(tr.est_costs)),
                     "e_diff": est.error(behavior.d)})
        if progress is not None:
            progress(ep, rows[-1])
    meta = {"warmup_episodes": config.warmup_episodes, "full_episodes": config.full_episodes,
            "beta": behavior.beta, "seed": config.rng_seed, "sac": sac.to_dict()}
    rec = PolicyRecommender(learner.policy, model, config.max_change, est, meta, config.deadzone)
    if diagnostics_path is not None:
        write_diagnostics(rows, diagnostics_path)
    return rec, est, rows


def write_diagnostics(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", "phase", "steps", "mean_error", "mean_est_cost", "e_diff"])
        for r in rows:
            w.writerow([r["episode"], r["phase"], r["steps"], repr(r["mean_error"]),
                        repr(r["mean_est_cost"]), repr(r["e_diff"])])


def evaluation_candidates(model: ScoreModel, n, seed=10_000, config=None):
    """Seeded ``(x0, goal)`` pairs drawn like the training starts."""
    config = config or RecommenderEpisodeConfig()
    world = SingleCandidateWorld(model, BehaviorParams(), config, np.random.default_rng(seed))
    starts = [world.sample_start() for _ in range(n)]
    return np.array([s[0] for s in starts]), np.array([s[1] for s in starts])


def evaluate_recommender(recommender, model: ScoreModel, d, runs=10, per_run=100, seed=10_000,
                         config=None):
    """Mean error and true cost of first recommendations on seeded candidates.

    Run ``r`` uses candidates seeded by ``(seed, r)``, so every recommender
    is scored on the same starts and goals.
    """
    errors, costs = [], []
    for r in range(runs):
        xs, goals = evaluation_candidates(model, per_run, [seed, r], config)
        for x, g in zip(xs, goals):
            x_cf = recommender.recommend(x[None, :], g)[0]
            errors.append(abs(float(model.score(x_cf)) - g))
            costs.append(float(true_cost(x, x_cf, d)))
    return {"mean_error": float(np.mean(errors)), "mean_true_cost": float(np.mean(costs)),
            "n": len(errors)}
