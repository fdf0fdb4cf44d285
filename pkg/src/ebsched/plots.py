"""Static figures from bench CSV output."""

from __future__ import annotations

import csv
import io
import os
import warnings
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .bench import CSV_COLUMNS  # noqa: E402

AXIS_LABELS = {
    "U": "Number of users ($U$)",
    "B": "Number of BSs ($B$)",
    "C": "Number of channels ($C$)",
    "T": "Frame length ($T$)",
    "lam": r"Energy arrival rate ($\lambda$)",
}
TITLES = {
    "fig3": r"Served users by ALG-SCSB$_1$ for different $\lambda$",
    "fig4": r"Served users by ALG-SCSB$_1$ for different $T$",
    "fig5": r"ALG-SCMB vs OPT-SCMB for different $\lambda$",
    "fig6": r"ALG-SCMB vs OPT-SCMB for different $T$",
    "fig6b": r"ALG-SCMB vs OPT-SCMB for different $B$",
    "fig7": r"ALG-MCMB vs OPT-MCMB for different $B$",
    "fig8": r"ALG-MCMB for different $B$ and $C$ ($U=100$)",
}
LEGEND = {"ORACLE": "OPT", "MILP": "OPT"}


class CsvFormatError(ValueError):
    def __init__(self, row: int, msg: str):
        super().__init__(f"row {row}: {msg}")
        self.row = row


def parse_csv(text: str) -> list[dict]:
    """Parse bench CSV text; rows are numbered from 1 at the header."""
    reader = csv.reader(io.StringIO(text))
    rows = []
    header = None
    for n, rec in enumerate(reader, start=1):
        if not rec or all(not f.strip() for f in rec):
            continue
        if header is None:
            if tuple(rec) != CSV_COLUMNS:
                raise CsvFormatError(n, f"expected header {','.join(CSV_COLUMNS)}")
            header = rec
            continue
        if len(rec) != len(CSV_COLUMNS):
            raise CsvFormatError(n, f"expected {len(CSV_COLUMNS)} fields, got {len(rec)}")
        d = dict(zip(CSV_COLUMNS, rec))
        try:
            d["axis_value"] = float(d["axis_value"])
            d["mean"] = float(d["mean"])
            d["stderr"] = float(d["stderr"])
            d["realizations"] = int(d["realizations"])
            d["wall_ms"] = float(d["wall_ms"]) if d["wall_ms"] else None
        except ValueError as e:
            raise CsvFormatError(n, str(e)) from None
        if d["mean"] < 0 or d["stderr"] < 0 or d["realizations"] < 1:
            raise CsvFormatError(n, "negative mean/stderr or no realizations")
        rows.append(d)
    return rows


def _series_label(algorithm: str, extra: str, varying: list[str]) -> str:
    name = algorithm if algorithm in LEGEND else f"ALG-{algorithm}"
    name = LEGEND.get(algorithm, name)
    parts = dict(p.split("=", 1) for p in extra.split(";") if "=" in p)
    tag = ", ".join(f"{'λ' if k == 'lam' else k}={parts[k]}" for k in varying if k in parts)
    return f"{name} ({tag})" if tag else name


def emit_plots(text: str, out_dir: str, fmt: str = "svg") -> list[str]:
    """Write one figure per figure id found in the CSV; returns the file paths.

    SVG output is byte-stable for a fixed input.
    """
    rows = parse_csv(text)
    if not rows:
        warnings.warn("CSV has no data rows; no figures written", stacklevel=2)
        return []
    os.makedirs(out_dir, exist_ok=True)
    by_fig: dict[str, list[dict]] = defaultdict(list)
    for r in rows:
        by_fig[r["figure"]].append(r)
    paths = []
    with plt.rc_context({"svg.hashsalt": "ebsched", "svg.fonttype": "none"}):
        for fig_id in sorted(by_fig):
            paths.append(_one_figure(fig_id, by_fig[fig_id], out_dir, fmt))
    return paths


def _one_figure(fig_id: str, rows: list[dict], out_dir: str, fmt: str) -> str:
    curves: dict[tuple[str, str], list[dict]] = defaultdict(list)
    for r in rows:
        curves[(r["extra_axes"], r["algorithm"])].append(r)
    values = defaultdict(set)
    for extra, _ in curves:
        for p in extra.split(";"):
            if "=" in p:
                k, v = p.split("=", 1)
                values[k].add(v)
    varying = sorted(k for k, vs in values.items() if len(vs) > 1)
    axis = rows[0]["axis_name"]

    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for (extra, alg) in sorted(curves):
        pts = sorted(curves[(extra, alg)], key=lambda r: r["axis_value"])
        xs = [p["axis_value"] for p in pts]
        ys = [p["mean"] for p in pts]
        es = [p["stderr"] for p in pts]
        style = "-o" if alg in LEGEND else "--s"
        ax.errorbar(xs, ys, yerr=es, fmt=style, markersize=4, capsize=2,
                    label=_series_label(alg, extra, varying))
    ax.set_xlabel(AXIS_LABELS.get(axis, axis))
    ax.set_ylabel("Avg. number of served users")
    ax.set_title(TITLES.get(fig_id, fig_id))
    ax.grid(True, which="both", alpha=0.4)
    if axis == "lam":
        ax.set_xscale("log", base=2)
    ax.legend(fontsize="small")
    fig.tight_layout()
    path = os.path.join(out_dir, f"{fig_id}.{fmt}")
    meta = {"Date": None} if fmt == "svg" else {"Software": None}
    fig.savefig(path, format=fmt, metadata=meta)
    plt.close(fig)
    return path
