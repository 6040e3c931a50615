"""Evaluation runs, Pareto sweeps over (alpha, tau) and the horizon study."""

from __future__ import annotations

import csv
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..baselines import BaselineRecommender
from ..environment import RecourseEnv
from ..errors import ConfigurationError, DivergenceError
from ..predictor import TrainedPredictor, TrivialPredictor, run_episode, train_predictor, \
    predictor_sac_config
from ..recommender import PolicyRecommender, RecommenderEpisodeConfig, recommender_sac_config, \
    train_recommender
from ..scorer import ScoreModel
from .config import ExperimentConfig

log = logging.getLogger(__name__)

STEP_COLUMNS = ["episode", "step", "gini", "rr", "rf", "n_rejected", "threshold",
                "reward_recommender", "reward_predictor", "mean_error", "mean_cost"]
SUMMARY_METRICS = ("rr", "rf", "gini", "mean_cost", "mean_error", "reward_predictor")
TRAINING_COLUMNS = ["episode", "reward", "mean_rr", "mean_rf"]
POINT_COLUMNS = ["index", "alpha", "tau", "status", "mean_rr", "std_rr", "mean_rf", "std_rf",
                 "on_front", "checkpoint"]


def fmt(v):
    """Stable text form for CSV cells: ``repr`` for floats, empty for missing."""
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(r.get(h)) for h in header])


def require(path: Path, what):
    if not Path(path).exists():
        raise ConfigurationError(f"{what} checkpoint not found: {path}")
    return path


def load_model(cfg: ExperimentConfig) -> ScoreModel:
    return ScoreModel.load(require(cfg.scorer_path(), "scorer"))


def make_recommender(cfg: ExperimentConfig, model, choice=None):
    choice = choice or cfg.recommender.choice
    if choice == "ours":
        return PolicyRecommender.load(require(cfg.recommender_path(), "recommender"), model)
    return BaselineRecommender(choice, model)


def make_predictor(cfg: ExperimentConfig, model, choice=None):
    choice = choice or cfg.predictor.choice
    if choice == "trivial":
        return TrivialPredictor()
    return TrainedPredictor.load(require(cfg.predictor_path(), "predictor"), model)


def train_recommender_from_config(cfg: ExperimentConfig, model, progress=None):
    """Two-phase recommender training with the budgets and SAC settings of ``cfg``."""
    rc = RecommenderEpisodeConfig(warmup_episodes=cfg.budget("warmup_episodes"),
                                  full_episodes=cfg.budget("full_episodes"),
                                  max_change=cfg.recommender.max_change,
                                  deadzone=cfg.recommender.deadzone, rng_seed=cfg.seed)
    sac = recommender_sac_config(cfg.seed, **cfg.recommender.sac)
    return train_recommender(model, rc, sac, cfg.behavior(), cfg.reward_params(),
                             progress=progress)


def episode_seed(base, episode):
    return np.random.SeedSequence([int(base), int(episode)]).generate_state(2)


def evaluate(cfg: ExperimentConfig, model, recommender, predictor, T=None, beta=None,
             episodes=None, reward_params=None):
    """Run seeded evaluation episodes; returns per-step rows (dicts)."""
    env_cfg = cfg.env_config(T=T)
    if beta is not None:
        env_cfg = replace(env_cfg, behavior=replace(env_cfg.behavior, beta=beta))
    env = RecourseEnv(model, env_cfg)
    reward_params = reward_params or cfg.reward_params()
    n = cfg.evaluation.episodes if episodes is None else episodes
    rows = []
    for ep in range(n):
        for m in run_episode(env, predictor, recommender, episode_seed(cfg.evaluation.seed, ep),
                             reward_params):
            row = m.row()
            row["episode"] = ep
            rows.append({k: (None if v == "" else v) for k, v in row.items()})
    return rows


def summarize(rows, episodes):
    """Mean and std over episodes of each episode's mean (undefined steps skipped)."""
    out = {"episodes": episodes}
    for key in SUMMARY_METRICS:
        per_ep = []
        for ep in range(episodes):
            vals = [r[key] for r in rows if r["episode"] == ep and r[key] is not None]
            if vals:
                per_ep.append(float(np.mean(vals)))
        out[f"mean_{key}"] = float(np.mean(per_ep)) if per_ep else None
        out[f"std_{key}"] = float(np.std(per_ep)) if per_ep else None
    return out


def summary_columns():
    cols = ["episodes"]
    for key in SUMMARY_METRICS:
        cols += [f"mean_{key}", f"std_{key}"]
    return cols


def run_evaluation(cfg: ExperimentConfig, model=None, recommender=None, predictor=None,
                   steps_path=None, summary_path=None, **kw):
    """Evaluate and write the per-step CSV and a one-row summary CSV."""
    model = model or load_model(cfg)
    recommender = recommender or make_recommender(cfg, model)
    predictor = predictor or make_predictor(cfg, model)
    episodes = kw.get("episodes", cfg.evaluation.episodes)
    rows = evaluate(cfg, model, recommender, predictor, **kw)
    summary = summarize(rows, episodes)
    if steps_path is not None:
        write_csv(steps_path, STEP_COLUMNS, rows)
    if summary_path is not None:
        write_csv(summary_path, summary_columns(), [summary])
    return rows, summary


# -- Pareto sweep -------------------------------------------------------------

@dataclass
class ParetoPoint:
    index: int
    alpha: float
    tau: float
    status: str
    mean_rr: float | None = None
    std_rr: float | None = None
    mean_rf: float | None = None
    std_rf: float | None = None
    on_front: bool = False
    checkpoint: str = ""

    def row(self):
        return {k: (int(v) if isinstance(v, bool) else v) for k, v in self.__dict__.items()}


def dominates(a, b):
    """``a`` dominates ``b`` when it is no worse in both and better in one."""
    return a[0] >= b[0] and a[1] >= b[1] and (a[0] > b[0] or a[1] > b[1])


def pareto_front(points):
    """Indices of the non-dominated ``(rr, rf)`` pairs, sorted by rr."""
    pts = [tuple(p) for p in points]
    order = sorted(range(len(pts)), key=lambda i: (-pts[i][0], -pts[i][1], i))
    front, best_rf = [], -np.inf
    for i in order:
        if pts[i][1] > best_rf:
            front.append(i)
            best_rf = pts[i][1]
        elif pts[i][1] == best_rf and front and pts[front[-1]] == pts[i]:
            front.append(i)     # exact duplicates do not dominate each other
    return sorted(front, key=lambda i: (pts[i][0], i))


def _train_point(args):
    cfg, idx, alpha, tau, T, model, recommender = args
    env_cfg = cfg.env_config(T=T, seed=cfg.seed + 7919 * (idx + 1))
    sac = predictor_sac_config(cfg.seed + idx, **cfg.predictor.sac)
    pred, hist = train_predictor(model, env_cfg, recommender, cfg.budget("predictor_episodes"),
                                 cfg.reward_params(alpha, tau), sac)
    rows = evaluate(cfg, model, recommender, pred, T=T, reward_params=cfg.reward_params(alpha, tau))
    return pred, hist, summarize(rows, cfg.evaluation.episodes)


def run_pareto_sweep(cfg: ExperimentConfig, model=None, recommender=None, T=None, out_dir=None,
                     grid=None):
    """Train one predictor per ``(alpha, tau)``, evaluate it and mark the front.

    Each point writes into its own ``point{i}`` directory; the points CSV is
    written once at the end. A point whose training diverges is kept with
    status ``failed``.
    """
    model = model or load_model(cfg)
    recommender = recommender or make_recommender(cfg, model)
    grid = cfg.sweep.grid if grid is None else grid
    out_dir = Path(out_dir or cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, i, float(a), float(t), T, model, recommender) for i, (a, t) in enumerate(grid)]
    results = []
    if cfg.sweep.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(cfg.sweep.workers) as pool:
            futures = [pool.submit(_train_point, t) for t in tasks]
            for f in futures:
                try:
                    results.append(f.result())
                except DivergenceError as exc:
                    results.append(exc)
    else:
        for t in tasks:
            try:
                results.append(_train_point(t))
            except DivergenceError as exc:
                results.append(exc)
    points = []
    for (_, i, a, t, _, _, _), res in zip(tasks, results):
        if isinstance(res, Exception):
            log.error("sweep point %d (alpha=%g, tau=%g) failed: %s", i, a, t, res)
            points.append(ParetoPoint(i, a, t, "failed"))
            continue
        pred, hist, summ = res
        point_dir = out_dir / f"point{i}"
        point_dir.mkdir(exist_ok=True)
        pred.save(point_dir / "predictor.rarn")
        write_csv(point_dir / "predictor_training.csv", TRAINING_COLUMNS, hist)
        points.append(ParetoPoint(i, a, t, "ok", summ["mean_rr"], summ["std_rr"],
                                  summ["mean_rf"], summ["std_rf"],
                                  checkpoint=f"point{i}/predictor.rarn"))
    ok = [p for p in points if p.status == "ok" and p.mean_rr is not None and p.mean_rf is not None]
    for j in pareto_front([(p.mean_rr, p.mean_rf) for p in ok]):
        ok[j].on_front = True
    write_csv(out_dir / "sweep_points.csv", POINT_COLUMNS, [p.row() for p in points])
    return points


# -- horizon study -------------------------------------------------------------

@dataclass
class HorizonRow:
    T: int
    alpha: float | None
    tau: float | None
    rr: float | None
    rf: float | None
    gap: float | None
    matched: bool


def select_closest(points, target):
    """The ok point minimizing ``|rr - target|`` (first wins ties); ``None`` if none."""
    best, best_gap = None, np.inf
    for p in points:
        if p.status != "ok" or p.mean_rr is None:
            continue
        gap = abs(p.mean_rr - target)
        if gap < best_gap:
            best, best_gap = p, gap
    return best


def horizon_rows(sweeps, target, tolerance):
    """``sweeps`` maps T to its list of :class:`ParetoPoint`."""
    rows = []
    for T in sorted(sweeps):
        p = select_closest(sweeps[T], target)
        if p is None:
            rows.append(HorizonRow(T, None, None, None, None, None, False))
            continue
        gap = abs(p.mean_rr - target)
        if gap > tolerance:
            log.warning("T=%d: closest point has RR=%.3f, %.3f from the target", T, p.mean_rr, gap)
        rows.append(HorizonRow(T, p.alpha, p.tau, p.mean_rr, p.mean_rf, gap, gap <= tolerance))
    matched = [r for r in rows if r.matched]
    for a, b in zip(matched, matched[1:]):
        if b.rf > a.rf:
            warnings.warn(f"feasibility rose from T={a.T} ({a.rf:.3f}) to T={b.T} ({b.rf:.3f})")
    return rows


def run_horizon_study(cfg: ExperimentConfig, model=None, recommender=None, out_dir=None):
    model = model or load_model(cfg)
    recommender = recommender or make_recommender(cfg, model)
    out_dir = Path(out_dir or cfg.out_dir)
    sweeps = {}
    for T in cfg.horizon.T_values:
        sweeps[int(T)] = run_pareto_sweep(cfg, model, recommender, T=int(T),
                                          out_dir=out_dir / f"horizon_T{int(T)}")
    rows = horizon_rows(sweeps, cfg.horizon.target_rr, cfg.horizon.tolerance)
    write_csv(out_dir / "horizon.csv", ["T", "alpha", "tau", "rr", "rf", "gap", "matched"],
              [{**r.__dict__, "matched": int(r.matched)} for r in rows])
    return rows
