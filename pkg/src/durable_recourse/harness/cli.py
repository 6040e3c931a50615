"""Command-line entry point: ``durable-recourse <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..errors import CheckpointFormatError, ConfigurationError, DivergenceError
from ..predictor import predictor_sac_config, train_predictor
from ..recommender import write_diagnostics
from ..scorer import FeatureMarginals, LabeledDataset, ScoreModel, generate_dataset, \
    read_dataset_csv, train_score_model
from . import experiments as ex
from .config import dump_config, load_config, scenarios
from .report import ReportParseError, emit_report

log = logging.getLogger("durable_recourse")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3


def _data_paths(cfg):
    return cfg.path("data.csv"), cfg.path("data_meta.json")


def cmd_gen_data(cfg, args):
    data = generate_dataset(cfg.dataset_spec())
    csv_path, meta_path = _data_paths(cfg)
    data.to_csv(csv_path)
    meta = {"generating_weights": data.generating_weights.tolist(),
            **{k: v.tolist() for k, v in data.marginals.arrays().items()}}
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    return [csv_path, meta_path]


def cmd_train_scorer(cfg, args):
    csv_path, meta_path = _data_paths(cfg)
    for p in (csv_path, meta_path):
        if not p.exists():
            raise ConfigurationError(f"dataset not found: {p} (run gen-data first)")
    x, y = read_dataset_csv(csv_path)
    meta = json.loads(meta_path.read_text())
    marg = FeatureMarginals(*(np.array(meta[k]) for k in ("means", "stds", "lo", "hi")))
    data = LabeledDataset(x, y, np.array(meta["generating_weights"]), marg)
    model = train_score_model(data, epochs=cfg.scorer.epochs, lr=cfg.scorer.lr)
    model.save(cfg.scorer_path())
    return [cfg.scorer_path()]


def cmd_train_recommender(cfg, args):
    model = ex.load_model(cfg)
    rec, est, rows = ex.train_recommender_from_config(cfg, model)
    rec.save(cfg.recommender_path())
    diag = cfg.path("recommender_diagnostics.csv")
    write_diagnostics(rows, diag)
    log.info("difficulty estimate error %.4f", est.error(cfg.behavior().d))
    return [cfg.recommender_path(), diag]


def cmd_train_predictor(cfg, args):
    model = ex.load_model(cfg)
    recommender = ex.make_recommender(cfg, model)
    sac = predictor_sac_config(cfg.seed, **cfg.predictor.sac)
    pred, rows = train_predictor(model, cfg.env_config(), recommender,
                                 cfg.budget("predictor_episodes"), cfg.reward_params(), sac)
    pred.save(cfg.predictor_path())
    hist = cfg.path("predictor_training.csv")
    ex.write_csv(hist, ex.TRAINING_COLUMNS, rows)
    return [cfg.predictor_path(), hist]


def cmd_evaluate(cfg, args):
    steps, summ = cfg.path("eval_steps.csv"), cfg.path("eval_summary.csv")
    _, summary = ex.run_evaluation(cfg, steps_path=steps, summary_path=summ)
    log.info("RR %s RF %s", summary["mean_rr"], summary["mean_rf"])
    return [steps, summ]


def cmd_sweep(cfg, args):
    ex.run_pareto_sweep(cfg)
    return [cfg.path("sweep_points.csv")]


def cmd_horizon_study(cfg, args):
    ex.run_horizon_study(cfg)
    return [cfg.path("horizon.csv")]


def cmd_report(cfg, args):
    return emit_report(cfg.out_dir)


COMMANDS = {
    "gen-data": (cmd_gen_data, "generate the synthetic labeled dataset"),
    "train-scorer": (cmd_train_scorer, "fit the logistic score model"),
    "train-recommender": (cmd_train_recommender, "train the counterfactual recommender"),
    "train-predictor": (cmd_train_predictor, "train the goal predictor"),
    "evaluate": (cmd_evaluate, "run evaluation episodes"),
    "sweep": (cmd_sweep, "train and evaluate predictors over an (alpha, tau) grid"),
    "horizon-study": (cmd_horizon_study, "matched-reliability feasibility across T"),
    "report": (cmd_report, "render charts and a markdown summary"),
}


def build_parser():
    p = argparse.ArgumentParser(prog="durable-recourse", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--config", help="YAML experiment file or a packaged scenario name "
                       f"({', '.join(scenarios())})")
        s.add_argument("--seed", type=int, help="master seed (overrides the file)")
        s.add_argument("--out", help="output directory (overrides the file)")
        s.add_argument("--paper-scale", action="store_true", default=None,
                       help="use the full training budgets")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config value, e.g. env.T=5")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    fn, _ = COMMANDS[args.command]
    try:
        cfg = load_config(args.config, {"seed": args.seed, "out": args.out,
                                        "paper_scale": args.paper_scale}, args.set)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        dump_config(cfg, cfg.path(f"config_{args.command}.yaml"))
        written = fn(cfg, args)
    except (ConfigurationError, CheckpointFormatError, ReportParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    for path in written:
        print(Path(path))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
