"""Aggregation of stored runs into frontiers, plots, and exports.

A report is computed entirely from result files plus the dataset's ground
truth; deleting and regenerating a report never changes any number in it.
Batch-mode runs are kept in their own section throughout and never share a
plot with single-query runs.
"""

from __future__ import annotations

import colorsys
import csv
import hashlib
import html
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "annbench"
matplotlib.rcParams["svg.fonttype"] = "none"

import matplotlib.pyplot as plt  # noqa: E402  (needs the backend set first)

import numpy as np  # noqa: E402

from .errors import UsageError  # noqa: E402
from .metrics import HIGHER, compute_metric, get_metric  # noqa: E402
from .results import SINGLE, iter_result_paths, read_result  # noqa: E402

CSV_COLUMNS = ("x", "y", "algorithm", "instance", "group", "result_file",
               "on_frontier")


@dataclass
class RunPoint:
    """One run's position in metric space, traceable to its result file."""

    x: float
    y: float
    algorithm: str
    instance: str
    query_params: list
    result_file: str
    on_frontier: bool = False

    @property
    def group(self) -> str:
        return json.dumps(self.query_params)


def pareto_frontier(points, x_orient=HIGHER, y_orient=HIGHER) -> list[int]:
    """Indices of the maximal non-dominated subset, ordered by x.

    A point dominates another when it is at least as good on both oriented
    axes and strictly better on one. Exact coordinate duplicates never
    dominate each other, so duplicated optima all survive.
    """
    pts = np.asarray([(p[0], p[1]) for p in points], dtype=np.float64)
    if len(pts) == 0:
        return []
    if not np.isfinite(pts).all():
        raise UsageError("frontier coordinates must be finite")
    oriented = pts.copy()
    if x_orient != HIGHER:
        oriented[:, 0] = -oriented[:, 0]
    if y_orient != HIGHER:
        oriented[:, 1] = -oriented[:, 1]

    order = np.lexsort((-oriented[:, 1], -oriented[:, 0]))
    keep = []
    best_y = -np.inf
    i = 0
    while i < len(order):
        j = i
        while (j < len(order)
               and oriented[order[j], 0] == oriented[order[i], 0]):
            j += 1
        block = order[i:j]                      # one equal-x group
        group_max = oriented[block, 1].max()
        if group_max > best_y:
            keep.extend(int(b) for b in block
                        if oriented[b, 1] == group_max)
            best_y = group_max
        i = j
    keep.sort(key=lambda idx: (pts[idx, 0], pts[idx, 1]))
    return keep


def collect_points(workdir, dataset: str, k: int, mode: str, x_name: str,
                   y_name: str, gt, warn=None) -> list[RunPoint]:
    """Compute (x, y) for every stored run of one dataset/k/mode slice.

    Runs whose coordinates come out non-finite (a zero-time QPS, a missing
    index size) are reported through `warn` and left out rather than
    poisoning the frontier.
    """
    get_metric(x_name), get_metric(y_name)
    points = []
    for path in iter_result_paths(workdir, dataset=dataset, k=k, mode=mode):
        rec = read_result(path)
        coords = []
        for name in (x_name, y_name):
            value = compute_metric(name, gt, rec, warn=warn)
            coords.append(np.nan if value is None else float(value))
        x, y = coords
        if not (np.isfinite(x) and np.isfinite(y)):
            if warn is not None:
                warn(f"skipping {path}: {x_name}={x}, {y_name}={y}")
            continue
        points.append(RunPoint(
            x=x, y=y, algorithm=rec.algorithm, instance=rec.label,
            query_params=rec.query_params, result_file=str(path)))
    points.sort(key=lambda p: (p.algorithm, p.x, p.y, p.result_file))
    return points


def mark_frontiers(points: list[RunPoint], x_orient, y_orient) -> dict:
    """Flag each algorithm's non-dominated runs; returns the frontier
    points per algorithm, in x order."""
    by_alg: dict[str, list[RunPoint]] = {}
    for p in points:
        by_alg.setdefault(p.algorithm, []).append(p)
    frontiers = {}
    for alg, pts in sorted(by_alg.items()):
        idx = pareto_frontier([(p.x, p.y) for p in pts], x_orient, y_orient)
        for i in idx:
            pts[i].on_frontier = True
        frontiers[alg] = [pts[i] for i in idx]
    return frontiers


def algorithm_color(name: str):
    """Deterministic color from the algorithm name, stable across plots."""
    digest = hashlib.md5(name.encode()).digest()
    hue = digest[0] / 256.0
    return colorsys.hsv_to_rgb(hue, 0.72, 0.70)


_MARKERS = "osD^vPX*"


def algorithm_marker(name: str) -> str:
    digest = hashlib.md5(name.encode()).digest()
    return _MARKERS[digest[1] % len(_MARKERS)]


def _axis_label(name: str) -> str:
    m = get_metric(name)
    arrow = "↑" if m.orientation == HIGHER else "↓"
    return f"{name} ({arrow} better)"


def plot_frontiers(frontiers: dict, points, x_name, y_name, out_path,
                   log_y=True, scatter=False, title="") -> Path:
    """SVG with one frontier polyline per algorithm; scatter=True adds
    every individual run as a faint point."""
    fig, ax = plt.subplots(figsize=(8, 5.5))
    try:
        if scatter:
            for p in points:
                ax.plot([p.x], [p.y], algorithm_marker(p.algorithm),
                        color=algorithm_color(p.algorithm), alpha=0.35,
                        markersize=4)
        for alg, front in frontiers.items():
            xs = [p.x for p in front]
            ys = [p.y for p in front]
            ax.plot(xs, ys, marker=algorithm_marker(alg),
                    color=algorithm_color(alg), label=alg, linewidth=1.6)
        if log_y:
            ax.set_yscale("log")
        ax.set_xlabel(_axis_label(x_name))
        ax.set_ylabel(_axis_label(y_name))
        if title:
            ax.set_title(title)
        ax.grid(True, which="both", alpha=0.25)
        if frontiers:
            ax.legend(loc="best", fontsize=8)
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out_path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return out_path


def write_points_csv(points: list[RunPoint], out_path) -> Path:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for p in points:
            w.writerow([repr(p.x), repr(p.y), p.algorithm, p.instance,
                        p.group, p.result_file, int(p.on_frontier)])
    return out_path


def read_points_csv(path) -> list[RunPoint]:
    points = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            points.append(RunPoint(
                x=float(row["x"]), y=float(row["y"]),
                algorithm=row["algorithm"], instance=row["instance"],
                query_params=json.loads(row["group"]),
                result_file=row["result_file"],
                on_frontier=row["on_frontier"] == "1"))
    return points


def _tex_escape(s: str) -> str:
    for ch in "\\&%$#_{}":
        s = s.replace(ch, "\\" + ch)
    return s


def write_pgfplots(frontiers: dict, x_name, y_name, out_path,
                   log_y=True) -> Path:
    """Standalone axis environment; paste into any tikzpicture."""
    lines = ["% generated by annbench report", "\\begin{axis}["]
    lines.append(f"    xlabel={{{_tex_escape(x_name)}}},")
    lines.append(f"    ylabel={{{_tex_escape(y_name)}}},")
    if log_y:
        lines.append("    ymode=log,")
    lines.append("    legend pos=outer north east]")
    for alg, front in frontiers.items():
        coords = " ".join(f"({p.x!r},{p.y!r})" for p in front)
        lines.append(f"\\addplot coordinates {{{coords}}};")
        lines.append(f"\\addlegendentry{{{_tex_escape(alg)}}}")
    lines.append("\\end{axis}")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("\n".join(lines) + "\n")
    return out_path


def render(workdir, dataset: str, k: int, gt, x_name="recall", y_name="qps",
           mode=SINGLE, log_y=True, scatter=False, warn=None) -> dict:
    """Produce every artifact for one dataset/k/mode slice.

    Returns {"svg", "scatter_svg", "csv", "tex", "points"}; paths land
    under <workdir>/reports/<dataset>/<k>/<mode>/.
    """
    x_metric, y_metric = get_metric(x_name), get_metric(y_name)
    points = collect_points(workdir, dataset, k, mode, x_name, y_name, gt,
                            warn=warn)
    frontiers = mark_frontiers(points, x_metric.orientation,
                               y_metric.orientation)
    outdir = Path(workdir) / "reports" / dataset / str(k) / mode
    stem = f"{x_name}-vs-{y_name}"
    title = f"{dataset} (k={k}, {mode})"
    artifacts = {
        "svg": plot_frontiers(frontiers, points, x_name, y_name,
                              outdir / f"{stem}.svg", log_y=log_y,
                              title=title),
        "csv": write_points_csv(points, outdir / f"{stem}.csv"),
        "tex": write_pgfplots(frontiers, x_name, y_name,
                              outdir / f"{stem}.tex", log_y=log_y),
        "points": points,
    }
    if scatter:
        artifacts["scatter_svg"] = plot_frontiers(
            frontiers, points, x_name, y_name,
            outdir / f"{stem}-scatter.svg", log_y=log_y, scatter=True,
            title=title + ", all runs")
    return artifacts


def _discover_slices(workdir):
    base = Path(workdir) / "results"
    if not base.is_dir():
        return
    for ds_dir in sorted(base.iterdir()):
        if not ds_dir.is_dir():
            continue
        for k_dir in sorted(ds_dir.iterdir()):
            if not (k_dir.is_dir() and k_dir.name.isdigit()):
                continue
            for mode_dir in sorted(k_dir.iterdir()):
                if mode_dir.is_dir() and any(mode_dir.rglob("*.res")):
                    yield ds_dir.name, int(k_dir.name), mode_dir.name


def _html_table(points: list[RunPoint]) -> str:
    rows = ["<table>", "<tr>" + "".join(
        f"<th>{html.escape(c)}</th>" for c in CSV_COLUMNS) + "</tr>"]
    for p in points:
        cells = [f"{p.x:.6g}", f"{p.y:.6g}", p.algorithm, p.instance,
                 p.group, p.result_file, "yes" if p.on_frontier else ""]
        rows.append("<tr>" + "".join(
            f"<td>{html.escape(str(c))}</td>" for c in cells) + "</tr>")
    rows.append("</table>")
    return "\n".join(rows)


def render_site(workdir, gt_lookup, x_name="recall", y_name="qps",
                log_y=True, warn=None) -> Path:
    """One static HTML page covering every dataset/k/mode with results.

    `gt_lookup(dataset)` must return that dataset's ground-truth distance
    matrix. Batch slices get their own sections after the single-query
    ones, mirroring the separation rule of the plots.
    """
    sections = []
    slices = sorted(_discover_slices(workdir),
                    key=lambda s: (s[0], s[1], s[2] != SINGLE))
    for dataset, k, mode in slices:
        gt = gt_lookup(dataset)
        artifacts = render(workdir, dataset, k, gt, x_name=x_name,
                           y_name=y_name, mode=mode, log_y=log_y, warn=warn)
        svg = Path(artifacts["svg"]).read_text()
        svg = svg[svg.index("<svg"):]
        badge = " — batch mode" if mode != SINGLE else ""
        sections.append(
            f"<section>\n<h2>{html.escape(dataset)}, k={k}"
            f"{html.escape(badge)}</h2>\n{svg}\n"
            f"{_html_table(artifacts['points'])}\n</section>")
    body = "\n".join(sections) if sections else "<p>No results yet.</p>"
    page = (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
        "<title>annbench report</title>\n<style>\n"
        "body { font-family: sans-serif; margin: 2rem; }\n"
        "table { border-collapse: collapse; font-size: 0.85rem; }\n"
        "td, th { border: 1px solid #999; padding: 2px 8px; }\n"
        "section { margin-bottom: 3rem; }\n"
        "</style></head><body>\n<h1>annbench report</h1>\n"
        f"{body}\n</body></html>\n")
    out = Path(workdir) / "reports" / "index.html"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(page)
    return out
