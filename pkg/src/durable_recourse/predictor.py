"""The goal predictor: picks one target score per step for all rejected candidates.

The learned predictor sees a fixed-width, score-sorted encoding of the
current applicants plus the recently rejected candidates, and is trained
with SAC while the recommender stays frozen.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import checkpoint
from .environment import EnvConfig, Observation, RecourseEnv
from .errors import ConfigurationError, DivergenceError, ShapeError
from .metrics import RewardParams, StepMetrics, predictor_reward, recommender_reward, true_cost
from .rlcore import GaussianPolicy, SacConfig, SacLearner, select_action
from .scorer import ScoreModel

log = logging.getLogger(__name__)

SLOT_EXTRA = 5      # score, elapsed/T, applications, last goal, validity
APPLICATION_SCALE = 10.0
DEFAULT_GOAL = 0.5


@dataclass(frozen=True)
class EncodingConfig:
    z: int
    w_max: int
    T: int

    @classmethod
    def for_env(cls, env_config: EnvConfig, z):
        return cls(z=z, w_max=env_config.N0 + env_config.m * env_config.T, T=env_config.T)

    @property
    def slot_width(self):
        return self.z + SLOT_EXTRA

    @property
    def width(self):
        return self.w_max * self.slot_width

    @property
    def policy_width(self):
        # slots, presence mask, current threshold
        return self.width + self.w_max + 1


def _slots(obs: Observation, model: ScoreModel, T):
    """One ``(score, id, record)`` per applicant and per window entry."""
    out = []
    for i, cid in enumerate(obs.ids):
        apps = int(obs.applications[i]) if obs.applications is not None else 1
        goal = float(obs.last_goals[i]) if obs.last_goals is not None else np.nan
        has_goal = np.isfinite(goal)
        rec = np.concatenate([obs.features[i], [obs.scores[i], 0.0, apps / APPLICATION_SCALE,
                                                goal if has_goal else 0.0, float(has_goal)]])
        out.append((float(obs.scores[i]), int(cid), rec))
    for w in obs.window:
        s = float(model.score(w.features))
        r = w.last_recommendation
        valid = r is not None and obs.t - r.issued_at <= T
        rec = np.concatenate([w.features, [s, (obs.t - w.last_application) / T,
                                           w.num_applications / APPLICATION_SCALE,
                                           r.goal if r is not None else 0.0, float(valid)]])
        out.append((s, int(w.id), rec))
    return out


def encode_observation(obs: Observation, model: ScoreModel, enc: EncodingConfig):
    """Fixed-width encoding ``(vector, mask)``.

    Slots are sorted by score (descending, lower id first on ties). If
    there are more than ``w_max`` of them the lowest-scoring ones are
    dropped and a warning is logged.
    """
    slots = _slots(obs, model, enc.T)
    slots.sort(key=lambda s: (-s[0], s[1]))
    if len(slots) > enc.w_max:
        log.warning("observation overflow at t=%d: dropping %d of %d slots", obs.t,
                    len(slots) - enc.w_max, len(slots))
        slots = slots[:enc.w_max]
    vec = np.zeros((enc.w_max, enc.slot_width))
    mask = np.zeros(enc.w_max)
    for j, (_, _, rec) in enumerate(slots):
        if rec.size != enc.slot_width:
            raise ShapeError(f"slot width {rec.size}, expected {enc.slot_width}")
        vec[j] = rec
        mask[j] = 1.0
    return vec.ravel(), mask


def policy_input(obs: Observation, model: ScoreModel, enc: EncodingConfig):
    vec, mask = encode_observation(obs, model, enc)
    th = obs.threshold if np.isfinite(obs.threshold) else DEFAULT_GOAL
    return np.concatenate([vec, mask, [th]])


def apply_goal(obs: Observation, goal, recommender):
    """Recommendations ``{id: (x_cf, goal)}`` for every rejected applicant."""
    goal = float(goal)
    if not 0.0 <= goal <= 1.0:
        raise ConfigurationError(f"goal must lie in [0, 1], got {goal}")
    if not obs.rejected_ids:
        return {}
    pos = {int(cid): i for i, cid in enumerate(obs.ids)}
    x = obs.features[[pos[i] for i in obs.rejected_ids]]
    x_cf = recommender.recommend(x, goal)
    if not np.all(np.isfinite(x_cf)):
        raise DivergenceError("recommender produced a non-finite counterfactual")
    return {cid: (row, goal) for cid, row in zip(obs.rejected_ids, x_cf)}


class TrivialPredictor:
    """Sets the goal to the threshold of the current round."""

    label = "trivial"

    def goal(self, obs: Observation):
        return float(obs.threshold) if np.isfinite(obs.threshold) else DEFAULT_GOAL


class OffsetPredictor:
    """Sets the goal a fixed distance above the current threshold.

    A one-parameter family of hand-made goal policies; sweeping the offset
    traces reliability from the trivial predictor (offset 0) upward.
    """

    label = "offset"

    def __init__(self, offset):
        self.offset = float(offset)

    def goal(self, obs: Observation):
        th = float(obs.threshold) if np.isfinite(obs.threshold) else DEFAULT_GOAL
        return float(np.clip(th + self.offset, 0.0, 1.0))


def trivial_predictor(obs: Observation):
    return TrivialPredictor().goal(obs)


class TrainedPredictor:
    label = "trained"

    def __init__(self, policy: GaussianPolicy, model: ScoreModel, enc: EncodingConfig, meta=None):
        if policy.obs_dim != enc.policy_width:
            raise ShapeError(f"policy input {policy.obs_dim} != encoding {enc.policy_width}")
        self.policy = policy
        self.model = model
        self.enc = enc
        self.meta = dict(meta or {})

    def goal(self, obs: Observation):
        g = select_action(self.policy, policy_input(obs, self.model, self.enc), "deterministic")
        return float(np.clip(g[0], 0.0, 1.0))

    def save(self, path):
        header = {"kind": "predictor", "z": self.enc.z, "w_max": self.enc.w_max, "T": self.enc.T,
                  "hidden": list(self.policy.net.sizes[1:-1]), "meta": self.meta}
        checkpoint.save(path, "predictor", header, {"policy": self.policy.net.flat()})

    @classmethod
    def load(cls, path, model: ScoreModel):
        header, arrays = checkpoint.load(path, expect_kind="predictor")
        enc = EncodingConfig(header["z"], header["w_max"], header["T"])
        if enc.z != model.num_features:
            raise ConfigurationError(f"{path} expects {enc.z} features")
        policy = GaussianPolicy(enc.policy_width, 1, tuple(header["hidden"]), 0.0, 1.0)
        policy.net.load_flat(arrays["policy"])
        return cls(policy, model, enc, header.get("meta"))


def _step_metrics(env, obs, actions, events, reward_params):
    model, d = env.model, env.d
    errs, costs, r_rec = [], [], []
    pos = {int(cid): i for i, cid in enumerate(obs.ids)}
    for cid, (x_cf, goal) in actions.items():
        x = obs.features[pos[cid]]
        e = abs(float(model.score(x_cf)) - goal) if float(model.score(x)) < goal else 0.0
        c = float(true_cost(x, x_cf, d))
        errs.append(e)
        costs.append(c)
        r_rec.append(recommender_reward(e, c, reward_params, "full"))
    return StepMetrics(step=events.step, gini=events.gini, rr=events.rr, rf=events.rf,
                       n_rejected=len(obs.rejected_ids), threshold=events.threshold,
                       reward_recommender=float(np.mean(r_rec)) if r_rec else 0.0,
                       reward_predictor=predictor_reward(events.rr, events.rf, reward_params),
                       mean_error=float(np.mean(errs)) if errs else None,
                       mean_cost=float(np.mean(costs)) if costs else None)


def run_episode(env: RecourseEnv, predictor, recommender, seed, reward_params=None,
                learner: SacLearner | None = None, enc: EncodingConfig | None = None):
    """Play one episode; returns a list of :class:`StepMetrics`.

    With a ``learner`` the goals come from its stochastic policy and every
    transition is stored; ``predictor`` is ignored in that case.
    """
    reward_params = reward_params or RewardParams()
    _, obs = env.reset(seed=seed)
    rows = []
    while not env.done:
        if learner is not None:
            s = policy_input(obs, env.model, enc)
            g = float(np.clip(learner.act(s)[0], 0.0, 1.0))
        else:
            g = predictor.goal(obs)
        actions = apply_goal(obs, g, recommender)
        _, nxt, events = env.step(actions)
        m = _step_metrics(env, obs, actions, events, reward_params)
        rows.append(m)
        if learner is not None:
            learner.observe(s, np.array([g]), m.reward_predictor,
                            policy_input(nxt, env.model, enc), env.done)
        obs = nxt
    return rows


def predictor_sac_config(seed=0, **overrides):
    base = dict(gamma=0.9, actor_lr=3e-4, critic_lr=1e-3, tau=0.01, temperature=0.05,
                batch_size=128, warmup_steps=1000, hidden=(64, 64), buffer_capacity=200_000,
                reward_scale=0.1, rng_seed=seed)
    base.update(overrides)
    return SacConfig(**base)


def train_predictor(model: ScoreModel, env_config: EnvConfig, recommender, episodes,
                    reward_params=None, sac: SacConfig | None = None, progress=None):
    """Train the goal predictor with the recommender frozen.

    Each episode starts from a fresh population seeded by
    ``(env_config.rng_seed, episode)``. Returns ``(TrainedPredictor, rows)``
    where ``rows`` holds the cumulative reward of every episode.
    """
    reward_params = reward_params or RewardParams()
    sac = sac or predictor_sac_config(env_config.rng_seed)
    enc = EncodingConfig.for_env(env_config, model.num_features)
    learner = SacLearner(enc.policy_width, 1, 0.0, 1.0, sac)
    env = RecourseEnv(model, env_config)
    rows = []
    for ep in range(int(episodes)):
        seed = np.random.SeedSequence([env_config.rng_seed, ep]).generate_state(2)
        try:
            steps = run_episode(env, None, recommender, seed, reward_params, learner, enc)
        except DivergenceError as exc:
            raise DivergenceError(f"predictor training diverged in episode {ep}: {exc}",
                                  {**exc.diagnostics, "episode": ep}) from exc
        rr = [s.rr for s in steps if s.rr is not None]
        rf = [s.rf for s in steps if s.rf is not None]
        rows.append({"episode": ep, "reward": float(sum(s.reward_predictor for s in steps)),
                     "mean_rr": float(np.mean(rr)) if rr else None,
                     "mean_rf": float(np.mean(rf)) if rf else None})
        if progress is not None:
            progress(ep, rows[-1])
    meta = {"episodes": int(episodes), "alpha": reward_params.alpha, "tau": reward_params.tau,
            "T": env_config.T, "beta": env_config.behavior.beta, "seed": env_config.rng_seed,
            "sac": sac.to_dict()}
    return TrainedPredictor(learner.policy, model, enc, meta), rows
