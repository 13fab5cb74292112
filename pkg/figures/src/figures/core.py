"""CSV-to-figure rendering.

The simulator writes CSV files whose first line is a ``# config_hash=...``
comment. This module reads those files, aggregates means and standard errors
per sweep point, and renders one of four figure kinds. Rendering is pure in
(CSV bytes, spec): styles are pinned and no timestamps enter the output.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

KINDS = ("adaptive_tests", "fn_rate", "fp_rate", "formula_vs_sim")

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 120,
    "font.size": 10,
    "svg.hashsalt": "communitygt-figures",
    "lines.markersize": 4,
}


class FigureError(ValueError):
    """Bad figure spec or CSV input."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[str, ...]
    output: str
    x_label: str = ""
    y_label: str = ""
    title: str = ""
    # optional row filter, e.g. {"decoder": "comp"} or {"alpha": "0.5"};
    # values compare as strings against the raw CSV cells
    filter: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FigureError(f"unknown figure kind: {self.kind!r}")
        if not self.inputs:
            raise FigureError("at least one input CSV is required")
        if not self.output:
            raise FigureError("output path is required")

    @classmethod
    def from_json(cls, path: str) -> "FigureSpec":
        with open(path) as fh:
            raw = json.load(fh)
        inputs = raw.get("inputs") or ([raw["input"]] if "input" in raw else [])
        try:
            return cls(
                kind=raw.get("kind", ""),
                inputs=tuple(inputs),
                output=raw.get("output", ""),
                x_label=raw.get("x_label", ""),
                y_label=raw.get("y_label", ""),
                title=raw.get("title", ""),
                filter=dict(raw.get("filter", {})),
            )
        except KeyError as exc:
            raise FigureError(f"missing spec field: {exc}") from exc


def load_rows(path: str) -> tuple[str, list[dict]]:
    """Parse one simulator CSV: (config hash, rows as string dicts)."""
    with open(path) as fh:
        first = fh.readline().strip()
        if not first.startswith("# config_hash="):
            raise FigureError(f"{path}: missing config-hash comment line")
        cfg_hash = first.split("=", 1)[1]
        rows = list(csv.DictReader(fh))
    if not rows:
        raise FigureError(f"{path}: no data rows")
    return cfg_hash, rows


def _require_columns(rows: list[dict], columns: list[str], path: str) -> None:
    missing = [c for c in columns if c not in rows[0]]
    if missing:
        raise FigureError(f"{path}: missing columns {missing}")


def _apply_filter(rows: list[dict], flt: dict) -> list[dict]:
    out = [r for r in rows if all(r.get(k) == str(v) for k, v in flt.items())]
    if not out:
        raise FigureError(f"filter {flt} matched no rows")
    return out


def _mean_se(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def _series(rows: list[dict], key_col: str, x_col: str, value) -> dict:
    """group rows into {series: [(x, mean, se), ...]} sorted by x"""
    grouped: dict[tuple[str, float], list[float]] = {}
    for r in rows:
        k = (r[key_col], float(r[x_col]))
        grouped.setdefault(k, []).append(value(r))
    out: dict[str, list[tuple[float, float, float]]] = {}
    for (name, x), vals in sorted(grouped.items()):
        out.setdefault(name, []).append((x, *_mean_se(vals)))
    return out


def _plot_series(ax, series: dict) -> None:
    for name in sorted(series):
        pts = series[name]
        xs = [p[0] for p in pts]
        means = [p[1] for p in pts]
        ses = [p[2] for p in pts]
        ax.errorbar(xs, means, yerr=ses, marker="o", capsize=3, label=name)
    ax.legend()


def _render_adaptive_tests(ax, spec: FigureSpec) -> None:
    rows: list[dict] = []
    for path in spec.inputs:
        _, file_rows = load_rows(path)
        _require_columns(file_rows, ["algorithm", "sweep_value", "tests_used"], path)
        rows.extend(file_rows)
    rows = _apply_filter(rows, spec.filter)
    _plot_series(ax, _series(rows, "algorithm", "sweep_value", lambda r: float(r["tests_used"])))


def _render_error_rate(ax, spec: FigureSpec, count_col: str) -> None:
    rows = []
    for path in spec.inputs:
        _, file_rows = load_rows(path)
        _require_columns(file_rows, ["design", "decoder", "T", count_col, "n"], path)
        rows.extend(file_rows)
    rows = _apply_filter(rows, spec.filter)
    for r in rows:
        r["_pipeline"] = f"{r['design']}+{r['decoder']}"
    _plot_series(
        ax,
        _series(rows, "_pipeline", "T", lambda r: float(r[count_col]) / float(r["n"])),
    )


def _render_formula_vs_sim(ax, spec: FigureSpec) -> None:
    rows = []
    for path in spec.inputs:
        _, file_rows = load_rows(path)
        _require_columns(
            file_rows,
            ["formula", "sweep", "formula_value", "empirical_mean", "std_error"],
            path,
        )
        rows.extend(file_rows)
    rows = _apply_filter(rows, spec.filter)
    rows.sort(key=lambda r: (r["formula"], float(r["sweep"])))
    max_gap_se = 0.0
    for name in sorted({r["formula"] for r in rows}):
        sub = [r for r in rows if r["formula"] == name]
        xs = [float(r["sweep"]) for r in sub]
        formula = [float(r["formula_value"]) for r in sub]
        means = [float(r["empirical_mean"]) for r in sub]
        ses = [float(r["std_error"]) for r in sub]
        ax.plot(xs, formula, marker="s", linestyle="--", label=f"{name} (formula)")
        ax.errorbar(xs, means, yerr=ses, marker="o", capsize=3,
                    label=f"{name} (simulated)")
        for f, m, se in zip(formula, means, ses):
            if se > 0:
                max_gap_se = max(max_gap_se, abs(f - m) / se)
    ax.legend()
    ax.annotate(
        f"max |formula - simulated| = {max_gap_se:.2f} SE",
        xy=(0.02, 0.02),
        xycoords="axes fraction",
        fontsize=8,
    )


def render(spec: FigureSpec) -> str:
    """Render the figure described by ``spec``; returns the output path."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        try:
            if spec.kind == "adaptive_tests":
                _render_adaptive_tests(ax, spec)
            elif spec.kind == "fn_rate":
                _render_error_rate(ax, spec, "fn_count")
            elif spec.kind == "fp_rate":
                _render_error_rate(ax, spec, "fp_count")
            else:
                _render_formula_vs_sim(ax, spec)
            ax.set_xlabel(spec.x_label)
            ax.set_ylabel(spec.y_label)
            if spec.title:
                ax.set_title(spec.title)
            fig.tight_layout()
            # empty metadata keeps image bytes independent of library version
            # details that would otherwise be embedded
            fig.savefig(spec.output, metadata=_empty_metadata(spec.output))
        finally:
            plt.close(fig)
    return spec.output


def _empty_metadata(path: str) -> dict:
    if path.endswith(".png"):
        return {"Software": None}
    if path.endswith(".svg"):
        return {"Date": None, "Creator": None}
    return {}
