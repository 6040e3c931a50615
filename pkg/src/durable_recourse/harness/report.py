"""Static SVG charts and a markdown summary built from run CSVs."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..errors import RecourseError  # noqa: E402

SMOOTH_WINDOW = 10
plt.rcParams["svg.hashsalt"] = "durable-recourse"
plt.rcParams["svg.fonttype"] = "none"


class ReportParseError(RecourseError, ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


def read_table(path, numeric=()):
    """Read a CSV into a list of dicts, converting ``numeric`` columns to float.

    Empty cells become ``None``. Raises :class:`ReportParseError` naming the
    offending line.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ReportParseError(path, 1, "empty file, expected a header") from None
        missing = [c for c in numeric if c not in header]
        if missing:
            raise ReportParseError(path, 1, f"missing column(s) {', '.join(missing)}")
        rows = []
        for line, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise ReportParseError(path, line, f"expected {len(header)} fields, got {len(rec)}")
            row = dict(zip(header, rec))
            for c in numeric:
                v = row[c]
                if v == "":
                    row[c] = None
                    continue
                try:
                    row[c] = float(v)
                except ValueError:
                    raise ReportParseError(path, line, f"column {c!r}: not a number: {v!r}") from None
            rows.append(row)
    return rows


def smooth(values, window=SMOOTH_WINDOW):
    """Trailing mean over up to ``window`` previous values (inclusive)."""
    v = np.asarray(values, dtype=np.float64)
    out = np.empty_like(v)
    c = np.concatenate([[0.0], np.cumsum(v)])
    for i in range(v.size):
        lo = max(0, i + 1 - window)
        out[i] = (c[i + 1] - c[lo]) / (i + 1 - lo)
    return out


def _save(fig, path):
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    Path(path).write_text(buf.getvalue())


def pareto_chart(series, path, title="Pareto fronts"):
    """``series`` maps a label to ``(points, front)``, both lists of ``(rr, rf)`` pairs."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for label, (points, front) in series.items():
        if points:
            rr, rf = zip(*points)
            ax.scatter(rf, rr, s=14, alpha=0.5)
        if front:
            rr, rf = zip(*sorted(front))
            ax.plot(rf, rr, marker="o", label=label)
    ax.set_xlabel("recourse feasibility (RF)")
    ax.set_ylabel("recourse reliability (RR)")
    ax.set_title(title)
    if any(f for _, f in series.values()):
        ax.legend(loc="best", fontsize=8)
    _save(fig, path)


def convergence_chart(curves, path):
    """``curves`` maps a label to per-episode cumulative rewards."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for label, rewards in curves.items():
        if len(rewards):
            ax.plot(np.arange(len(rewards)), smooth(rewards), label=label)
    ax.set_xlabel("episode")
    ax.set_ylabel(f"cumulative reward ({SMOOTH_WINDOW}-episode mean)")
    if any(len(r) for r in curves.values()):
        ax.legend(loc="best", fontsize=8)
    _save(fig, path)


def horizon_chart(rows, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    pts = [(r["T"], r["rf"]) for r in rows if r["rf"] is not None]
    if pts:
        t, rf = zip(*pts)
        ax.plot(t, rf, marker="o")
    ax.set_xlabel("validity horizon T")
    ax.set_ylabel("RF at matched RR")
    _save(fig, path)


def _points_series(path):
    rows = read_table(path, numeric=("mean_rr", "mean_rf", "on_front"))
    ok = [r for r in rows if r["status"] == "ok" and r["mean_rr"] is not None]
    points = [(r["mean_rr"], r["mean_rf"]) for r in ok]
    front = [(r["mean_rr"], r["mean_rf"]) for r in ok if r["on_front"] == 1.0]
    return points, front, rows


def emit_report(out_dir):
    """Build every chart the artifacts in ``out_dir`` allow plus ``report.md``.

    Returns the list of files written.
    """
    out = Path(out_dir)
    written = []
    lines = ["# Run report", ""]

    summ = out / "eval_summary.csv"
    if summ.exists():
        rows = read_table(summ, numeric=("mean_rr", "mean_rf", "mean_gini", "mean_mean_cost",
                                          "mean_mean_error"))
        lines += ["## Evaluation", "", "| metric | mean | std |", "|---|---|---|"]
        for key in ("rr", "rf", "gini", "mean_cost", "mean_error", "reward_predictor"):
            r = rows[0] if rows else {}
            lines.append(f"| {key} | {r.get(f'mean_{key}', '')} | {r.get(f'std_{key}', '')} |")
        lines.append("")

    sweeps = {}
    if (out / "sweep_points.csv").exists():
        sweeps["sweep"] = out / "sweep_points.csv"
    for d in sorted(out.glob("horizon_T*")):
        if (d / "sweep_points.csv").exists():
            sweeps[d.name.replace("horizon_", "")] = d / "sweep_points.csv"
    if sweeps:
        series, table = {}, []
        for label, p in sweeps.items():
            points, front, rows = _points_series(p)
            series[label] = (points, front)
            table += [(label, r) for r in rows]
        pareto_chart(series, out / "pareto.svg")
        written.append(out / "pareto.svg")
        lines += ["## Sweep points", "", "| sweep | alpha | tau | status | RR | RF | front |",
                  "|---|---|---|---|---|---|---|"]
        for label, r in table:
            lines.append(f"| {label} | {r['alpha']} | {r['tau']} | {r['status']} | "
                         f"{r['mean_rr'] if r['mean_rr'] is not None else ''} | "
                         f"{r['mean_rf'] if r['mean_rf'] is not None else ''} | "
                         f"{'yes' if r['on_front'] == 1.0 else ''} |")
        lines += ["", "![pareto](pareto.svg)", ""]

    curves = {}
    for p in sorted(out.rglob("*_training.csv")):
        rows = read_table(p, numeric=("reward",))
        curves[str(p.relative_to(out).with_suffix(""))] = [r["reward"] for r in rows]
    if curves:
        convergence_chart(curves, out / "convergence.svg")
        written.append(out / "convergence.svg")
        lines += ["## Predictor training", "", "![convergence](convergence.svg)", ""]

    if (out / "horizon.csv").exists():
        rows = read_table(out / "horizon.csv", numeric=("T", "rr", "rf", "gap", "matched"))
        horizon_chart(rows, out / "horizon.svg")
        written.append(out / "horizon.svg")
        lines += ["## Horizon study", "", "| T | RR | RF | gap | matched |", "|---|---|---|---|---|"]
        for r in rows:
            lines.append(f"| {int(r['T'])} | {r['rr']} | {r['rf']} | {r['gap']} | "
                         f"{'yes' if r['matched'] == 1.0 else 'no'} |")
        lines += ["", "![horizon](horizon.svg)", ""]

    (out / "report.md").write_text("\n".join(lines) + "\n")
    written.append(out / "report.md")
    return written
