"""Report files, benchmark tables and SVG plots.

Reports and tables split deterministic content from wall-clock timing: a run
writes ``<stem>.json`` plus ``<stem>.timing.json``, a benchmark writes
``bench.csv`` plus ``bench.timing.csv``. Identical inputs and seeds give
byte-identical deterministic files.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from .errors import ConfigError, InvalidArgument, ParseError, SchemaError
from .model import FeatureTrajectory, generalize
from .scenario import Scenario, generate_demonstrations
from .strategies import ExecutionReport, StrategyConfig, run_strategy

log = logging.getLogger(__name__)

BENCH_SCHEMA = "cgda.bench/1"
BENCH_COLUMNS = (
    "label", "strategy", "runs",
    "evaluations_mean", "evaluations_std",
    "discrepancy_mean", "discrepancy_std",
    "success_metric", "success_mean", "success_std",
)
TIMING_COLUMNS = ("label", "rit_mean", "rit_std")
_LABEL = re.compile(r"[A-Za-z0-9_.-]+")


def timing_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".timing" + path.suffix)


def _dumps(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def save_report(report: ExecutionReport, path) -> Path:
    """Write the report and its sibling timing file; returns the timing path."""
    path = Path(path)
    path.write_text(_dumps(report.to_dict()), encoding="utf-8")
    tpath = timing_path(path)
    tpath.write_text(_dumps(report.timing_dict()), encoding="utf-8")
    return tpath


def _read_json(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), path, exc.lineno) from exc
    if not isinstance(data, dict):
        raise ParseError("expected a JSON object", path)
    return data


def load_report(path) -> ExecutionReport:
    data = _read_json(path)
    tpath = timing_path(path)
    timing = _read_json(tpath) if tpath.exists() else None
    if timing is not None and timing.get("schema") != data.get("schema"):
        raise SchemaError(f"{tpath}: timing schema {timing.get('schema')!r} does not match report")
    if timing is not None:
        timing.pop("schema", None)
        timing.pop("mean_rit", None)
    try:
        return ExecutionReport.from_dict(data, timing)
    except TypeError as exc:
        raise ParseError(f"malformed report: {exc}", path) from exc


# ---------------------------------------------------------------- benchmark


def success_metric(report: ExecutionReport) -> tuple[str, float]:
    """Action-specific score: painted percent, or peak-force error in newtons."""
    names = report.action.get("feature_names", [])
    if "painted" in names:
        return "painted_percent", 100.0 * report.final_features[names.index("painted")]
    if report.peak_force is not None and "force_z" in names:
        target = float(np.max(report.action["values"][names.index("force_z")]))
        return "peak_force_error", abs(report.peak_force - target)
    return "final_discrepancy", report.final_discrepancy


@dataclass
class BenchRow:
    label: str
    strategy: str
    runs: int
    evaluations_mean: float
    evaluations_std: float
    discrepancy_mean: float
    discrepancy_std: float
    success_metric: str
    success_mean: float
    success_std: float
    rit_mean: float = float("nan")
    rit_std: float = float("nan")

    @classmethod
    def from_reports(cls, label: str, reports: Sequence[ExecutionReport]) -> "BenchRow":
        if not reports:
            raise InvalidArgument(f"no completed runs for {label!r}")
        metric = success_metric(reports[0])[0]

        def stats(xs):
            # population std so a single repeat reports 0
            a = np.asarray(xs, dtype=float)
            return float(a.mean()), float(a.std())

        ev = stats([r.total_evaluations for r in reports])
        f = stats([r.final_discrepancy for r in reports])
        s = stats([success_metric(r)[1] for r in reports])
        rit = stats([r.mean_rit for r in reports])
        return cls(label, reports[0].strategy, len(reports), *ev, *f, metric, *s, *rit)


@dataclass
class BenchTable:
    rows: list[BenchRow]
    repeats: int

    def row(self, label: str) -> BenchRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def to_csv(self, path) -> Path:
        """Write ``path`` (deterministic columns) and its ``.timing`` sibling (RIT)."""
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {BENCH_SCHEMA} repeats={self.repeats}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BENCH_COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(getattr(r, c)) for c in BENCH_COLUMNS])
        tpath = timing_path(path)
        with tpath.open("w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {BENCH_SCHEMA} repeats={self.repeats}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TIMING_COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(getattr(r, c)) for c in TIMING_COLUMNS])
        return tpath

    @classmethod
    def from_csv(cls, path) -> "BenchTable":
        path = Path(path)
        header, rows = _read_csv(path, BENCH_COLUMNS)
        repeats = int(header.get("repeats", 0))
        table = []
        for lineno, rec in rows:
            try:
                table.append(BenchRow(
                    label=rec["label"], strategy=rec["strategy"], runs=int(rec["runs"]),
                    success_metric=rec["success_metric"],
                    **{c: float(rec[c]) for c in BENCH_COLUMNS
                       if c not in ("label", "strategy", "runs", "success_metric")},
                ))
            except ValueError as exc:
                raise ParseError(str(exc), path, lineno) from exc
        tpath = timing_path(path)
        if tpath.exists():
            _, trows = _read_csv(tpath, TIMING_COLUMNS)
            by_label = {rec["label"]: rec for _, rec in trows}
            for r in table:
                if r.label in by_label:
                    r.rit_mean = float(by_label[r.label]["rit_mean"])
                    r.rit_std = float(by_label[r.label]["rit_std"])
        return cls(table, repeats)

    def format(self) -> str:
        metric = self.rows[0].success_metric if self.rows else "success"
        head = f"{'strategy':<12}{'evaluations':>20}{'discrepancy':>22}{'RIT [s]':>22}{metric:>24}"
        lines = [head]
        for r in self.rows:
            lines.append(
                f"{r.label:<12}"
                f"{r.evaluations_mean:>11.1f} ± {r.evaluations_std:<6.1f}"
                f"{r.discrepancy_mean:>12.4g} ± {r.discrepancy_std:<7.3g}"
                f"{r.rit_mean:>12.4g} ± {r.rit_std:<7.3g}"
                f"{r.success_mean:>14.4g} ± {r.success_std:<7.3g}"
            )
        return "\n".join(lines)


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def _read_csv(path: Path, columns) -> tuple[dict, list]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ParseError(str(exc), path) from exc
    if not lines or not lines[0].startswith("# "):
        raise SchemaError(f"{path}: missing schema line")
    first = lines[0][2:].split()
    if first[0] != BENCH_SCHEMA:
        raise SchemaError(f"{path}: schema {first[0]!r}, expected {BENCH_SCHEMA!r}")
    header = dict(kv.split("=", 1) for kv in first[1:] if "=" in kv)
    reader = csv.DictReader(lines[1:])
    if tuple(reader.fieldnames or ()) != tuple(columns):
        raise ParseError(f"columns {reader.fieldnames}, expected {list(columns)}", path, 2)
    return header, [(k + 3, rec) for k, rec in enumerate(reader)]


@dataclass(frozen=True)
class BenchEntry:
    label: str
    strategy: StrategyConfig


@dataclass(frozen=True)
class BenchConfig:
    scenario: Scenario
    entries: tuple[BenchEntry, ...]
    base_seed: int = 0
    action_path: Optional[Path] = None

    @classmethod
    def load(cls, path) -> "BenchConfig":
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ParseError(str(exc), path, mark.line + 1 if mark else None) from exc
        if not isinstance(data, dict) or "scenario" not in data:
            raise ConfigError(f"{path}: bench config needs a 'scenario' entry")
        unknown = set(data) - {"scenario", "action", "base_seed", "strategies"}
        if unknown:
            raise ConfigError(f"{path}: unknown bench keys {sorted(unknown)}")
        scenario = Scenario.load(path.parent / data["scenario"])
        entries = []
        for item in data.get("strategies") or ["fte", "iet", "oet"]:
            item = {"name": item} if isinstance(item, str) else dict(item)
            label = str(item.pop("label", item.get("name")))
            if not _LABEL.fullmatch(label) or "--" in label:
                raise ConfigError(f"{path}: bad strategy label {label!r} (letters, digits, '_', '.', '-')")
            block = {**scenario.strategy.to_dict(), **item}
            entries.append(BenchEntry(label, StrategyConfig.from_dict(block, scenario.strategy.evolution)))
        labels = [e.label for e in entries]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"{path}: duplicate strategy labels {labels}")
        action = data.get("action")
        return cls(scenario, tuple(entries), int(data.get("base_seed", 0)),
                   path.parent / action if action else None)

    def action(self) -> FeatureTrajectory:
        if self.action_path is not None:
            return FeatureTrajectory.load(self.action_path)
        sc = self.scenario
        return generalize(generate_demonstrations(sc), sc.t_min, sc.feature_units)


def run_bench(cfg: BenchConfig, repeats: int, out_dir=None) -> tuple[BenchTable, dict]:
    """Run every configured strategy ``repeats`` times with seeds ``base_seed + k``.

    Runs are serial so wall-clock RIT is not distorted by contention. Returns
    the table and the reports keyed by label.
    """
    if repeats < 1:
        raise InvalidArgument("repeats must be >= 1")
    action = cfg.action()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        (out / "runs").mkdir(parents=True, exist_ok=True)
        action.save(out / "action.json")
    reports: dict[str, list[ExecutionReport]] = {}
    for entry in cfg.entries:
        for k in range(repeats):
            seed = cfg.base_seed + k
            scfg = dataclasses.replace(entry.strategy, seed=seed)
            rep = run_strategy(action, cfg.scenario.make_world(), scfg, cfg.scenario.schedule())
            log.info("bench %s seed %d: %d evaluations, f=%.4g", entry.label, seed,
                     rep.total_evaluations, rep.final_discrepancy)
            reports.setdefault(entry.label, []).append(rep)
            if out is not None:
                save_report(rep, out / "runs" / f"{entry.label}-seed{seed}.json")
    table = BenchTable([BenchRow.from_reports(e.label, reports[e.label]) for e in cfg.entries], repeats)
    if out is not None:
        table.to_csv(out / "bench.csv")
        first = {label: reps[0] for label, reps in reports.items()}
        (out / "goals.svg").write_text(goal_plot(action, first), encoding="utf-8")
    return table, reports


# ---------------------------------------------------------------- plots

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
_W, _PANEL_H, _LEFT, _RIGHT, _TOP, _GAP = 640, 180, 70, 150, 40, 50


def _trace_matrix(report: ExecutionReport) -> np.ndarray:
    if not report.feature_trace:
        raise InvalidArgument("report has an empty feature trace; nothing to plot")
    return np.array([f["values"] for f in report.feature_trace], dtype=float).T


def _scale(names) -> tuple[list[float], list[str]]:
    factors, labels = [], []
    for name in names:
        if name == "painted":
            factors.append(100.0)
            labels.append("painted [%]")
        else:
            factors.append(1.0)
            labels.append(name)
    return factors, labels


def goal_plot(action: FeatureTrajectory | dict, traces: dict, title: str = "") -> str:
    """SVG of feature traces against the action's intermediate goals.

    ``traces`` maps a label to an :class:`ExecutionReport`. The x axis is
    progress through the run: goal ``j`` sits at ``(j + 1) / n`` and trace
    sample ``k`` of ``K`` at ``(k + 1) / K``. One panel per feature; painted
    fraction is shown in percent. The plotted numbers are repeated as CSV in
    a leading comment.
    """
    if isinstance(action, dict):
        action = FeatureTrajectory.from_dict(action)
    if not traces:
        raise InvalidArgument("nothing to plot")
    mats = {label: _trace_matrix(rep) for label, rep in traces.items()}
    for label, mat in mats.items():
        if mat.shape[0] != action.m:
            raise InvalidArgument(f"trace {label!r} has {mat.shape[0]} features, action has {action.m}")
    factors, ylabels = _scale(action.feature_names)
    n, m = action.n, action.m
    plot_w = _W - _LEFT - _RIGHT
    height = _TOP + m * (_PANEL_H + _GAP)

    rows = ["kind,label,index,x,feature,value"]
    for j in range(n):
        for i in range(m):
            rows.append(f"goal,X,{j},{(j + 1) / n!r},{action.feature_names[i]},{float(action.values[i, j] * factors[i])!r}")
    for label, mat in mats.items():
        K = mat.shape[1]
        for k in range(K):
            for i in range(m):
                rows.append(f"trace,{label},{k},{(k + 1) / K!r},{action.feature_names[i]},{float(mat[i, k] * factors[i])!r}")

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{height}" '
        f'viewBox="0 0 {_W} {height}" font-family="sans-serif" font-size="11">',
        "<!-- data\n" + "\n".join(rows) + "\n-->",
        f'<rect width="{_W}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{_W / 2}" y="18" text-anchor="middle" font-size="13">{_esc(title)}</text>')

    boxes = []
    for i in range(m):
        y0 = _TOP + i * (_PANEL_H + _GAP)
        vals = [action.values[i] * factors[i]] + [mat[i] * factors[i] for mat in mats.values()]
        lo = min(float(np.min(v)) for v in vals)
        hi = max(float(np.max(v)) for v in vals)
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.05 * (hi - lo)
        boxes.append((y0, lo - pad, hi + pad))
        out.append(f'<rect x="{_LEFT}" y="{y0}" width="{plot_w}" height="{_PANEL_H}" fill="none" stroke="#888"/>')
        out.append(f'<text x="{_LEFT - 8}" y="{y0 + 10}" text-anchor="end">{hi:.3g}</text>')
        out.append(f'<text x="{_LEFT - 8}" y="{y0 + _PANEL_H}" text-anchor="end">{lo:.3g}</text>')
        out.append(
            f'<text transform="translate({_LEFT - 45},{y0 + _PANEL_H / 2}) rotate(-90)" '
            f'text-anchor="middle">{_esc(ylabels[i])}</text>'
        )
        out.append(f'<text x="{_LEFT + plot_w / 2}" y="{y0 + _PANEL_H + 28}" text-anchor="middle">progress</text>')

    def px(x):
        return _LEFT + x * plot_w

    def py(i, v):
        y0, lo, hi = boxes[i]
        return y0 + _PANEL_H * (1.0 - (v - lo) / (hi - lo))

    # the generalized action: dashed path per panel, one marker group per goal
    for i in range(m):
        pts = " ".join(f"{px((j + 1) / n):.2f},{py(i, action.values[i, j] * factors[i]):.2f}" for j in range(n))
        out.append(f'<polyline class="goal-path" points="{pts}" fill="none" stroke="black" stroke-dasharray="4 3"/>')
    for j in range(n):
        circles = "".join(
            f'<circle cx="{px((j + 1) / n):.2f}" cy="{py(i, action.values[i, j] * factors[i]):.2f}" r="4" '
            f'fill="white" stroke="black"/>'
            for i in range(m)
        )
        out.append(f'<g class="goal-marker" data-goal="{j}">{circles}</g>')

    for c, (label, mat) in enumerate(mats.items()):
        color = _COLORS[c % len(_COLORS)]
        K = mat.shape[1]
        for i in range(m):
            pts = " ".join(f"{px((k + 1) / K):.2f},{py(i, mat[i, k] * factors[i]):.2f}" for k in range(K))
            out.append(f'<polyline class="trace" data-label="{_esc(label)}" points="{pts}" fill="none" stroke="{color}"/>')
            out.append(f'<circle class="trace-end" cx="{px(1.0):.2f}" cy="{py(i, mat[i, -1] * factors[i]):.2f}" r="3" fill="{color}"/>')
        ly = _TOP + 14 * c + 10
        out.append(f'<line x1="{_W - _RIGHT + 12}" y1="{ly}" x2="{_W - _RIGHT + 32}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_W - _RIGHT + 38}" y="{ly + 4}">{_esc(label)}</text>')
    ly = _TOP + 14 * len(mats) + 10
    out.append(f'<circle cx="{_W - _RIGHT + 22}" cy="{ly}" r="4" fill="white" stroke="black"/>')
    out.append(f'<text x="{_W - _RIGHT + 38}" y="{ly + 4}">goals</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_report(report: ExecutionReport) -> str:
    if not report.action:
        raise InvalidArgument("report carries no action; cannot draw goals")
    title = f"{report.strategy.upper()} seed {report.seed}"
    return goal_plot(report.action, {report.strategy: report}, title)


def svg_data(svg: str) -> list[dict]:
    """Parse the CSV block embedded in a plot back into records."""
    start = svg.find("<!-- data\n")
    end = svg.find("\n-->", start)
    if start < 0 or end < 0:
        raise ParseError("plot has no embedded data block")
    return list(csv.DictReader(svg[start + len("<!-- data\n"):end].splitlines()))


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
