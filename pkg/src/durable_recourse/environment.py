"""The competitive recourse simulation.

Timeline of one call to :meth:`RecourseEnv.step` at time ``t``:

1. applicants accepted at ``t`` leave for good;
2. every applicant rejected at ``t`` receives its recommendation and draws
   dropout once; every waiting candidate (new or old) makes one success draw
   per feature it has not implemented yet;
3. time advances, ``m`` entrants arrive, waiting candidates reapply
   (with certainty once ``T`` steps have passed since their last
   application) and the new applicant pool is thresholded.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .behavior import BehaviorParams, dropout_probability_array, reapply_probability_array
from .errors import ConfigurationError, ContractViolation, UndefinedMetric
from .metrics import gini_index, recourse_feasibility, recourse_reliability
from .scorer import ScoreModel

log = logging.getLogger(__name__)

WAITING, APPLYING, ACCEPTED, DROPPED = "waiting", "applying", "accepted", "dropped"
UNCHANGED_TOL = 1e-9


@dataclass(frozen=True)
class EnvConfig:
    N0: int = 20
    k: int = 9
    m: int = 10
    T: int = 1
    episode_length: int = 100
    behavior: BehaviorParams = field(default_factory=BehaviorParams)
    rng_seed: int = 0
    # Test hooks: pin every success / dropout probability to a constant.
    success_override: float | None = None
    dropout_override: float | None = None

    def validate(self, z=None):
        if self.N0 < 0 or self.m < 0 or self.k < 1:
            raise ConfigurationError("need N0 >= 0, m >= 0, k >= 1")
        if not self.k < self.N0 + self.m:
            raise ConfigurationError(f"k={self.k} must be < N0 + m = {self.N0 + self.m}")
        if self.T < 1:
            raise ConfigurationError("T must be >= 1")
        if self.episode_length < 0:
            raise ConfigurationError("episode_length must be >= 0")
        if z is not None and len(self.behavior.difficulties) != z:
            raise ConfigurationError(
                f"{len(self.behavior.difficulties)} difficulties for a {z}-feature model")
        return self


@dataclass
class Recommendation:
    x_cf: np.ndarray
    goal: float
    issued_at: int


@dataclass
class Candidate:
    id: int
    features: np.ndarray
    last_application: int
    num_applications: int = 1
    status: str = APPLYING
    recommendation: Recommendation | None = None
    last_recommendation: Recommendation | None = None
    implemented: np.ndarray | None = None
    last_rejected_at: int | None = None
    rejected_features: np.ndarray | None = None


@dataclass
class WindowEntry:
    id: int
    features: np.ndarray
    last_application: int
    num_applications: int
    last_recommendation: Recommendation | None


@dataclass
class Observation:
    t: int
    ids: np.ndarray
    features: np.ndarray
    scores: np.ndarray
    threshold: float
    rejected_ids: list
    window: list
    # per applicant: applications so far and the goal of its last
    # recommendation (nan when it never had one)
    applications: np.ndarray | None = None
    last_goals: np.ndarray | None = None


@dataclass
class StepEvents:
    step: int
    accepted: list
    rejected: list
    dropouts: list
    implemented: list
    reapplied: list
    entrants: list
    succ: list
    window_rejected: list
    gini: float | None
    rr: float | None
    rf: float | None
    threshold: float
    undersubscribed: bool = False
    clamped: list = field(default_factory=list)


@dataclass
class EnvState:
    t: int
    candidates: dict
    applicant_ids: list
    accepted_ids: list
    rejected_ids: list
    threshold: float
    next_id: int
    log: list = field(default_factory=list)

    def live(self):
        return [c for c in self.candidates.values() if c.status in (WAITING, APPLYING)]


def select_threshold(scores, ids, k):
    """Accept the ``k`` highest scores (lower id wins ties).

    Returns ``(threshold, accepted_ids, undersubscribed)``. With fewer than
    ``k`` applicants everyone is accepted and the threshold is the lowest
    score.
    """
    scores = np.asarray(scores, dtype=np.float64)
    ids = np.asarray(ids, dtype=np.int64)
    n = scores.size
    if n == 0:
        return float("nan"), [], k > 0
    if n <= k:
        if n < k:
            log.warning("under-subscribed round: %d applicants for %d slots", n, k)
        return float(scores.min()), [int(i) for i in ids], n < k
    idx = kernels.topk(scores, ids, k)
    return float(scores[idx[-1]]), [int(ids[i]) for i in idx], False


class RecourseEnv:
    """One seeded instance of the simulation; single writer."""

    def __init__(self, model: ScoreModel, config: EnvConfig):
        if model.marginals is None:
            raise ConfigurationError("score model carries no feature marginals")
        self.model = model
        self.config = config.validate(model.num_features)
        self.d = config.behavior.d
        self.rng = None
        self.state = None

    # -- helpers ---------------------------------------------------------
    def _emit(self, kind, cid=None, **payload):
        self.state.log.append({"step": self.state.t, "kind": kind, "candidate": cid,
                               "payload": payload})

    def _new_candidates(self, n):
        xs = self.model.marginals.sample(n, self.rng)
        out = []
        for x in xs:
            c = Candidate(id=self.state.next_id, features=x, last_application=self.state.t)
            self.state.next_id += 1
            self.state.candidates[c.id] = c
            out.append(c)
        return out

    def _threshold_round(self, applicants):
        st = self.state
        applicants = sorted(applicants, key=lambda c: c.id)
        ids = [c.id for c in applicants]
        x = np.array([c.features for c in applicants]).reshape(len(ids), -1)
        scores = self.model.score(x) if ids else np.zeros(0)
        th, acc, under = select_threshold(scores, ids, self.config.k)
        acc_set = set(acc)
        for c, s in zip(applicants, scores):
            c.status = APPLYING
            c.last_application = st.t
            self._emit("apply", c.id, score=float(s), applications=c.num_applications)
        st.applicant_ids = ids
        st.accepted_ids = sorted(acc)
        st.rejected_ids = [i for i in ids if i not in acc_set]
        st.threshold = th
        for c in applicants:
            if c.id not in acc_set:
                c.last_rejected_at = st.t
                c.rejected_features = c.features.copy()
        self._emit("threshold", None, threshold=th, accepted=st.accepted_ids,
                   rejected=st.rejected_ids)
        if under:
            self._emit("undersubscribed", None, applicants=len(ids), k=self.config.k)
        return under

    # -- public API ------------------------------------------------------
    def reset(self, seed=None):
        cfg = self.config
        self.rng = np.random.default_rng(cfg.rng_seed if seed is None else seed)
        self.state = EnvState(t=0, candidates={}, applicant_ids=[], accepted_ids=[],
                              rejected_ids=[], threshold=float("nan"), next_id=0)
        for c in self._new_candidates(cfg.N0):
            self._emit("enter", c.id)
        self._threshold_round([self.state.candidates[i] for i in range(cfg.N0)])
        return self.state, self.observe()

    @property
    def done(self):
        return self.state is not None and self.state.t >= self.config.episode_length

    def step(self, action):
        """Advance one step.

        ``action`` maps each id rejected at the current step to
        ``(x_cf, goal)``.
        """
        st, cfg, beh = self.state, self.config, self.config.behavior
        if st is None:
            raise ContractViolation("step() before reset()")
        action = {int(k): v for k, v in action.items()}
        missing = set(st.rejected_ids) - set(action)
        extra = set(action) - set(st.rejected_ids)
        if missing or extra:
            raise ContractViolation(
                f"action must cover exactly the rejected ids; missing {sorted(missing)}, "
                f"unexpected {sorted(extra)}")
        events = StepEvents(step=st.t + 1, accepted=[], rejected=[], dropouts=[], implemented=[],
                            reapplied=[], entrants=[], succ=[], window_rejected=[], gini=None,
                            rr=None, rf=None, threshold=float("nan"))

        # phase 1
        for cid in st.accepted_ids:
            st.candidates[cid].status = ACCEPTED
            self._emit("accept", cid)

        # phase 2: recommendations and a single dropout draw on receipt
        rejected = [st.candidates[i] for i in st.rejected_ids]
        goals_cf = []
        b, q = [], []
        for c in rejected:
            x_cf, goal = action[c.id]
            x_cf = np.asarray(x_cf, dtype=np.float64).copy()
            if x_cf.shape != c.features.shape:
                raise ContractViolation(f"recommendation for {c.id} has shape {x_cf.shape}")
            if np.any(x_cf < 0.0) or np.any(x_cf > 1.0) or not np.all(np.isfinite(x_cf)):
                x_cf = np.clip(np.nan_to_num(x_cf, nan=0.0), 0.0, 1.0)
                events.clamped.append(c.id)
                self._emit("clamp", c.id)
            unchanged = np.abs(x_cf - c.features) <= UNCHANGED_TOL
            x_cf[unchanged] = c.features[unchanged]
            rec = Recommendation(x_cf, float(goal), st.t)
            c.recommendation = rec
            c.last_recommendation = rec
            c.implemented = unchanged
            goals_cf.append(x_cf)
            b.append(max(0.0, float(goal) - float(self.model.score(c.features))))
            q.append(c.num_applications - 1)
            self._emit("recommend", c.id, goal=float(goal), x_cf=[float(v) for v in x_cf])
        if rejected:
            g_scores = self.model.score(np.array(goals_cf))
            try:
                events.gini = gini_index(g_scores)
            except UndefinedMetric:
                events.gini = None
            if cfg.dropout_override is None:
                p_drop = dropout_probability_array(b, q, beh)
            else:
                p_drop = np.full(len(rejected), float(cfg.dropout_override))
            draws = self.rng.random(len(rejected))
            for c, p, u in zip(rejected, p_drop, draws):
                if u < p:
                    c.status = DROPPED
                    c.recommendation = None
                    events.dropouts.append(c.id)
                    self._emit("dropout", c.id, p=float(p))
                else:
                    c.status = WAITING

        # implementation attempts by everyone still waiting
        waiting = sorted((c for c in st.candidates.values() if c.status == WAITING),
                         key=lambda c: c.id)
        if waiting:
            xf = np.array([c.features for c in waiting])
            xcf = np.array([c.recommendation.x_cf for c in waiting])
            mask = np.array([c.implemented for c in waiting])
            uni = self.rng.random(xf.shape)
            if cfg.success_override is None:
                new_x, new_mask, outcome = kernels.attempt_features(xf, xcf, mask, self.d,
                                                                    beh.beta, uni)
            else:
                hit = ~mask & (uni < cfg.success_override)
                new_x = np.where(hit, xcf, xf)
                new_mask = mask | hit
                outcome = np.where(mask, -1, hit.astype(np.int64))
            for c, x, mk, oc in zip(waiting, new_x, new_mask, outcome):
                gained = np.flatnonzero(oc == 1)
                c.features = x
                c.implemented = mk
                if gained.size:
                    self._emit("implement", c.id, features=[int(i) for i in gained],
                               complete=bool(mk.all()))
                    if mk.all():
                        events.implemented.append(c.id)

        # phase 3: time advances, entrants arrive, waiting candidates may reapply
        st.t += 1
        window = [c.id for c in st.candidates.values()
                  if c.last_rejected_at is not None
                  and c.last_rejected_at == c.last_application
                  and st.t - cfg.T <= c.last_rejected_at <= st.t - 1
                  and c.status in (WAITING, DROPPED)]
        entrants = self._new_candidates(cfg.m)
        for c in entrants:
            self._emit("enter", c.id)
        waiting = sorted((c for c in st.candidates.values() if c.status == WAITING),
                         key=lambda c: c.id)
        reapplicants = []
        if waiting:
            scores = self.model.score(np.array([c.features for c in waiting]))
            b = np.array([max(0.0, c.recommendation.goal - s) for c, s in zip(waiting, scores)])
            u = np.array([(st.t - c.last_application) / cfg.T for c in waiting])
            p = reapply_probability_array(b, np.minimum(u, 1.0), beh)
            draws = self.rng.random(len(waiting))
            for c, pr, r in zip(waiting, p, draws):
                if r < pr:
                    reapplicants.append(c)
        succ = []
        for c in reapplicants:
            if c.implemented.all():
                succ.append(c.id)
            c.num_applications += 1
            c.recommendation = None
            self._emit("reapply", c.id, implemented=bool(c.implemented.all()))
        under = self._threshold_round(entrants + reapplicants)

        events.accepted = list(st.accepted_ids)
        events.rejected = list(st.rejected_ids)
        events.reapplied = sorted(c.id for c in reapplicants)
        events.entrants = [c.id for c in entrants]
        events.succ = sorted(succ)
        events.window_rejected = sorted(window)
        events.rr = recourse_reliability(succ, st.accepted_ids)
        events.rf = recourse_feasibility(succ, window)
        events.threshold = st.threshold
        events.undersubscribed = under
        return st, self.observe(), events

    def observe(self):
        st, T = self.state, self.config.T
        apps = [st.candidates[i] for i in st.applicant_ids]
        x = np.array([c.features for c in apps]).reshape(len(apps), self.model.num_features)
        accepted_now = set(st.accepted_ids)
        window = []
        for c in sorted(st.candidates.values(), key=lambda c: c.id):
            if c.status == ACCEPTED or c.id in accepted_now or c.last_rejected_at is None:
                continue
            if st.t - T <= c.last_rejected_at <= st.t - 1:
                window.append(WindowEntry(c.id, c.rejected_features.copy(), c.last_rejected_at,
                                          c.num_applications, c.last_recommendation))
        return Observation(t=st.t, ids=np.array(st.applicant_ids, dtype=np.int64), features=x,
                           scores=self.model.score(x) if len(apps) else np.zeros(0),
                           threshold=st.threshold, rejected_ids=list(st.rejected_ids),
                           window=window,
                           applications=np.array([c.num_applications for c in apps],
                                                 dtype=np.int64),
                           last_goals=np.array([c.last_recommendation.goal
                                                if c.last_recommendation else np.nan
                                                for c in apps]))

    def write_log(self, path):
        """Write the event log as JSON lines."""
        with open(path, "w") as fh:
            for ev in self.state.log:
                fh.write(json.dumps(ev, sort_keys=True) + "\n")
