import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from durable_recourse.errors import ConfigurationError
from durable_recourse.harness import cli
from durable_recourse.harness.config import load_config
from durable_recourse.harness.experiments import (ParetoPoint, dominates, horizon_rows,
                                                  pareto_front, run_evaluation, run_pareto_sweep,
                                                  select_closest)
from durable_recourse.harness.report import (ReportParseError, convergence_chart, emit_report,
                                             pareto_chart, read_table, smooth)


@pytest.fixture
def cfg(tmp_path, model):
    c = load_config(None, {"out": str(tmp_path)}, ["evaluation.episodes=2", "env.episode_length=8",
                                                    "recommender.choice=ustun",
                                                    "predictor.choice=trivial"])
    model.save(c.scorer_path())
    return c


def test_config_defaults_and_overrides(tmp_path):
    c = load_config()
    assert c.budget("warmup_episodes") == 1000 and c.budget("predictor_episodes") == 1500
    c = load_config(None, {"paper_scale": True})
    assert c.budget("full_episodes") == 20000 and c.budget("predictor_episodes") == 7000
    p = tmp_path / "c.yaml"
    p.write_text("env:\n  T: 3\nreward:\n  alpha: 2\n")
    c = load_config(p, {"seed": 9}, ["env.T=4"])
    assert c.env.T == 4 and c.reward.alpha == 2.0 and c.seed == 9


@pytest.mark.parametrize("text", ["env:\n  bogus: 1\n", "env:\n  T: 0\n", "env:\n  T: x\n",
                                  "recommender:\n  choice: other\n", "- 1\n", "reward:\n  psi: 20\n"])
def test_config_errors(tmp_path, text):
    p = tmp_path / "c.yaml"
    p.write_text(text)
    with pytest.raises(ConfigurationError):
        load_config(p)


def brute_front(pts):
    return sorted(i for i, p in enumerate(pts)
                  if not any(dominates(q, p) for j, q in enumerate(pts) if j != i))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([0.1, 0.3, 0.5, 0.9]),
                          st.sampled_from([0.2, 0.4, 0.6, 0.8])), min_size=1, max_size=12))
def test_pareto_front_matches_brute_force(pts):
    assert sorted(pareto_front(pts)) == brute_front(pts)


def test_single_point_front():
    assert pareto_front([(0.4, 0.3)]) == [0]


def _pt(i, rr, status="ok"):
    return ParetoPoint(i, 1.0, 1.0, status, rr, 0.0, 0.5, 0.0)


def test_select_closest_linear_scan():
    pts = [_pt(0, 0.5), _pt(1, 0.93), _pt(2, 0.97), _pt(3, 0.95, "failed"), _pt(4, 0.2)]
    assert select_closest(pts, 0.95).index == 1
    rng = np.random.default_rng(0)
    for _ in range(50):
        pts = [_pt(i, float(r)) for i, r in enumerate(rng.random(7))]
        best = min(pts, key=lambda p: (abs(p.mean_rr - 0.95), p.index))
        assert select_closest(pts, 0.95) is best
    assert select_closest([_pt(0, None, "failed")], 0.95) is None


def test_horizon_rows_gap_and_trend(caplog):
    a = ParetoPoint(0, 1, 1, "ok", 0.95, 0, 0.6, 0)
    b = ParetoPoint(0, 1, 1, "ok", 0.96, 0, 0.7, 0)
    with pytest.warns(UserWarning, match="feasibility rose"):
        rows = horizon_rows({1: [a], 5: [b]}, 0.95, 0.05)
    assert [r.matched for r in rows] == [True, True]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rows = horizon_rows({1: [ParetoPoint(0, 1, 1, "ok", 0.5, 0, 0.6, 0)]}, 0.95, 0.05)
    assert len(rows) == 1 and not rows[0].matched and rows[0].gap == pytest.approx(0.45)


def test_evaluation_outputs(cfg, tmp_path):
    rows, summ = run_evaluation(cfg, steps_path=tmp_path / "s.csv", summary_path=tmp_path / "m.csv")
    assert len(rows) == 16
    table = read_table(tmp_path / "s.csv", numeric=("episode", "rr", "rf", "gini"))
    for key in ("rr", "rf", "gini"):
        per_ep = []
        for ep in (0.0, 1.0):
            v = [r[key] for r in table if r["episode"] == ep and r[key] is not None]
            if v:
                per_ep.append(np.mean(v))
        assert summ[f"mean_{key}"] == pytest.approx(np.mean(per_ep), abs=1e-12)
    first = (tmp_path / "s.csv").read_bytes()
    run_evaluation(cfg, steps_path=tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_bytes() == first


def test_zero_episode_evaluation(cfg, tmp_path):
    cfg.evaluation.episodes = 0
    run_evaluation(cfg, steps_path=tmp_path / "s.csv", episodes=0)
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 1


def test_sweep_and_report(cfg, tmp_path, monkeypatch):
    cfg.predictor.episodes = 1
    cfg.predictor.sac = {"warmup_steps": 2, "batch_size": 2}
    from durable_recourse import predictor as pred_mod
    real = pred_mod.train_predictor
    calls = []

    def flaky(*a, **kw):
        calls.append(1)
        if len(calls) == 2:
            from durable_recourse.errors import DivergenceError
            raise DivergenceError("boom")
        return real(*a, **kw)

    monkeypatch.setattr("durable_recourse.harness.experiments.train_predictor", flaky)
    pts = run_pareto_sweep(cfg, grid=[[1, 5], [5, 5], [10, 2]])
    assert [p.status for p in pts] == ["ok", "failed", "ok"]
    assert (tmp_path / "point0" / "predictor.rarn").exists()
    assert not (tmp_path / "point1").exists()
    first = emit_report(tmp_path)
    svg = (tmp_path / "pareto.svg").read_bytes()
    md = (tmp_path / "report.md").read_text()
    assert "failed" in md
    emit_report(tmp_path)
    assert (tmp_path / "pareto.svg").read_bytes() == svg
    assert {p.name for p in first} >= {"pareto.svg", "convergence.svg", "report.md"}


def test_empty_charts(tmp_path):
    pareto_chart({"none": ([], [])}, tmp_path / "a.svg")
    convergence_chart({}, tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_text().startswith("<?xml")


def test_smooth_window():
    np.testing.assert_allclose(smooth([1, 2, 3, 4], window=2), [1, 1.5, 2.5, 3.5])
    v = np.arange(30.0)
    assert smooth(v)[29] == pytest.approx(np.mean(v[20:]))


def test_malformed_csv_reports_line(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n3\n")
    with pytest.raises(ReportParseError) as info:
        read_table(p, numeric=("a",))
    assert info.value.line == 3
    p.write_text("a,b\n1,x\n")
    with pytest.raises(ReportParseError, match=":2:"):
        read_table(p, numeric=("b",))


def test_cli_exit_codes(tmp_path, capsys, monkeypatch):
    out = str(tmp_path)
    assert cli.main(["gen-data", "--out", out, "--set", "data.num_examples=300"]) == 0
    assert cli.main(["train-scorer", "--out", out, "--set", "scorer.epochs=20"]) == 0
    assert cli.main(["evaluate", "--out", out]) == 2        # no recommender checkpoint
    assert "recommender checkpoint not found" in capsys.readouterr().err
    assert cli.main(["evaluate", "--out", out, "--set", "recommender.choice=ustun",
                     "--set", "predictor.choice=trivial", "--set", "env.episode_length=3",
                     "--set", "evaluation.episodes=1"]) == 0
    assert (tmp_path / "eval_summary.csv").exists()
    assert cli.main(["evaluate", "--out", out, "--set", "env.T=0"]) == 2
    from durable_recourse.errors import DivergenceError

    def diverge(*a, **kw):
        raise DivergenceError("non-finite loss")

    monkeypatch.setattr(cli, "train_score_model", diverge)
    assert cli.main(["train-scorer", "--out", out]) == 3
    assert cli.main(["report", "--out", out]) == 0


def test_packaged_scenarios_load():
    from durable_recourse.harness.config import scenarios
    names = scenarios()
    assert {"default", "hard_beta", "long_horizon", "baseline"} <= set(names)
    assert load_config("hard_beta").env.beta == 0.01
    assert load_config("long_horizon").env.T == 5
    with pytest.raises(ConfigurationError):
        load_config("no_such_scenario")
