"""Monte-Carlo experiment runner: sweeps, averaging and CSV output."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .common import schedule_scsb2
from .model import GenerationParams, Instance, generate_instance
from .multi import schedule_mcmb, schedule_mcsb, schedule_scmb
from .oracle import OracleLimits, solve_exact, solve_milp
from .scsb import ENERGY_MODES, PER_PAIR, schedule_scsb1

WORKERS_ENV = "EBSCHED_WORKERS"
CSV_COLUMNS = ("figure", "axis_name", "axis_value", "extra_axes", "algorithm",
               "mean", "stderr", "realizations", "wall_ms")
AXES = ("U", "B", "C", "T", "lam")
HEURISTICS = ("SCSB1", "SCSB2", "SCMB", "MCSB", "MCMB")
ORACLES = ("ORACLE", "MILP")
ALGORITHMS = HEURISTICS + ORACLES


class ConfigError(ValueError):
    """An experiment configuration that cannot be run."""


@dataclass
class ExperimentConfig:
    """One figure: a swept axis, one or more curves, and the algorithms to run.

    ``base`` fixes every axis in :data:`AXES`; each entry of ``series``
    overrides some of them to form one curve, and ``axis_name`` is swept
    over ``axis_values`` on every curve.
    """

    figure: str
    axis_name: str
    axis_values: list
    base: dict = field(default_factory=lambda: {"U": 10, "B": 1, "C": 1, "T": 10, "lam": 0.5})
    series: list = field(default_factory=lambda: [{}])
    algorithms: list = field(default_factory=lambda: ["SCSB1"])
    realizations: int = 1000
    seed: int = 0
    energy_mode: str = PER_PAIR
    deadline_mode: str = "uniform"
    slot_duration: float = 1.0
    timing: bool = True
    oracle_limits: OracleLimits = field(default_factory=lambda: OracleLimits(20, 4, 2, 10))
    out_csv: str | None = None
    out_dir: str | None = None

    def cells(self) -> list[dict]:
        """Every parameter point of the sweep, curves first then axis values."""
        out = []
        for over in self.series:
            for v in self.axis_values:
                pt = dict(self.base)
                pt.update(over)
                pt[self.axis_name] = v
                out.append(pt)
        return out

    def validate(self) -> None:
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if self.axis_name not in AXES:
            raise ConfigError(f"axis_name must be one of {AXES}, got {self.axis_name!r}")
        if not self.axis_values:
            raise ConfigError("axis_values is empty")
        missing = [a for a in AXES if a not in self.base]
        if missing:
            raise ConfigError(f"base is missing axes {missing}")
        for over in self.series:
            bad = set(over) - set(AXES)
            if bad:
                raise ConfigError(f"unknown series keys {sorted(bad)}")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown or not self.algorithms:
            raise ConfigError(f"unknown algorithms {unknown}; choose from {ALGORITHMS}")
        if self.energy_mode not in ENERGY_MODES:
            raise ConfigError(f"energy mode must be one of {ENERGY_MODES}")
        for pt in self.cells():
            U, B, C, T = (int(pt[k]) for k in ("U", "B", "C", "T"))
            if U < 0 or B < 1 or C < 1 or T < 1 or pt["lam"] < 0:
                raise ConfigError(f"invalid cell {pt}")
            if "ORACLE" in self.algorithms and not self.oracle_limits.admits(U, B, C, T):
                raise ConfigError(f"ORACLE requested for cell {_fmt_point(pt)} beyond {self.oracle_limits}")
            if any(a in ORACLES for a in self.algorithms) and C > 1 and self.energy_mode != PER_PAIR:
                raise ConfigError("oracles count energy per (slot, channel); use the 'pair' energy mode")
            if "SCMB" in self.algorithms and C != 1:
                raise ConfigError("SCMB needs C=1")
            if "SCSB2" in self.algorithms and self.deadline_mode != "common":
                raise ConfigError("SCSB2 needs deadline_mode='common'")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["oracle_limits"] = asdict(self.oracle_limits)
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        if "oracle_limits" in doc:
            doc["oracle_limits"] = OracleLimits(**doc["oracle_limits"])
        try:
            return cls(**doc)
        except TypeError as e:
            raise ConfigError(str(e)) from None


@dataclass(frozen=True)
class ResultRow:
    figure: str
    axis_name: str
    axis_value: float
    extra_axes: str
    algorithm: str
    mean: float
    stderr: float
    realizations: int
    wall_ms: float | None

    def as_csv(self) -> list[str]:
        return [self.figure, self.axis_name, _num(self.axis_value), self.extra_axes, self.algorithm,
                f"{self.mean:.6f}", f"{self.stderr:.6f}", str(self.realizations),
                "" if self.wall_ms is None else f"{self.wall_ms:.3f}"]


def _num(v) -> str:
    f = float(v)
    return str(int(f)) if f.is_integer() else repr(f)


def _fmt_point(pt: dict, skip: str | None = None) -> str:
    return ";".join(f"{k}={_num(pt[k])}" for k in AXES if k != skip)


def cell_seed(base_seed: int, point: dict, deadline_mode: str, realization: int) -> int:
    """Seed of one realization, a hash of the base seed, the parameter point and the index."""
    key = f"{base_seed}|{_fmt_point(point)}|{deadline_mode}|{realization}"
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")


def _runner(name: str, energy_mode: str) -> Callable[[Instance], int]:
    return {
        "SCSB1": lambda i: schedule_scsb1(i).served_count,
        "SCSB2": lambda i: schedule_scsb2(i).served_count,
        "SCMB": lambda i: schedule_scmb(i).served_total,
        "MCSB": lambda i: schedule_mcsb(i, energy_mode=energy_mode).served_count,
        "MCMB": lambda i: schedule_mcmb(i, energy_mode=energy_mode).served_total,
        "ORACLE": lambda i: solve_exact(i).optimum,
        "MILP": solve_milp,
    }[name]


def _run_chunk(args) -> list[dict[str, tuple[int, float]]]:
    """Run realizations ``lo..hi-1`` of one cell; picklable for worker processes."""
    point, lo, hi, cfg_doc = args
    cfg = ExperimentConfig.from_dict(cfg_doc)
    params = GenerationParams(slot_duration=cfg.slot_duration, poisson_rate=float(point["lam"]),
                              deadline_mode=cfg.deadline_mode)
    dims = tuple(int(point[k]) for k in ("U", "B", "C", "T"))
    runners = {a: _runner(a, cfg.energy_mode) for a in cfg.algorithms}
    out = []
    for r in range(lo, hi):
        rng = np.random.default_rng(cell_seed(cfg.seed, point, cfg.deadline_mode, r))
        inst = generate_instance(params, dims, rng)
        res = {}
        for a, fn in runners.items():
            t0 = time.perf_counter()
            served = fn(inst)
            res[a] = (served, (time.perf_counter() - t0) * 1e3)
        out.append(res)
    return out


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def _chunks(n: int, parts: int) -> list[tuple[int, int]]:
    size = max(1, math.ceil(n / parts))
    return [(lo, min(n, lo + size)) for lo in range(0, n, size)]


def run_rows(cfg: ExperimentConfig, workers: int | None = None) -> list[ResultRow]:
    cfg.validate()
    workers = worker_count() if workers is None else max(1, workers)
    doc = cfg.to_dict()
    jobs = []
    for pt in cfg.cells():
        for lo, hi in _chunks(cfg.realizations, workers * 4 if workers > 1 else 1):
            jobs.append((pt, lo, hi, doc))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(j) for j in jobs]

    per_cell: dict[str, list] = {}
    for (pt, _, _, _), res in zip(jobs, results):
        per_cell.setdefault(_fmt_point(pt), []).extend(res)
    rows = []
    for pt in cfg.cells():
        res = per_cell[_fmt_point(pt)]
        for a in cfg.algorithms:
            counts = [r[a][0] for r in res]
            n = len(counts)
            mean = math.fsum(counts) / n
            var = math.fsum((c - mean) ** 2 for c in counts) / (n - 1) if n > 1 else 0.0
            wall = math.fsum(r[a][1] for r in res) if cfg.timing else None
            rows.append(ResultRow(cfg.figure, cfg.axis_name, float(pt[cfg.axis_name]),
                                  _fmt_point(pt, skip=cfg.axis_name), a, mean, math.sqrt(var / n), n, wall))
    rows.sort(key=lambda r: (r.figure, r.extra_axes, r.axis_value, r.algorithm))
    return rows


def rows_to_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.as_csv())
    return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> str:
    """Run the sweep and return the CSV text; also written to ``cfg.out_csv`` if set."""
    text = rows_to_csv(run_rows(cfg, workers))
    if cfg.out_csv:
        with open(cfg.out_csv, "w", newline="") as fh:
            fh.write(text)
    return text


# -- figure presets --------------------------------------------------------

_U_SMALL = [5, 10, 15, 20, 25, 30, 35, 40, 45, 50]
_U_MULTI = [20, 25, 30, 35, 40, 45, 50]


def preset(figure: str, realizations: int = 1000, seed: int = 0) -> ExperimentConfig:
    """Default sweep for one of the reference figures."""
    base1 = {"U": 10, "B": 1, "C": 1, "T": 10, "lam": 0.5}
    baseB = {"U": 20, "B": 10, "C": 1, "T": 10, "lam": 0.5}
    table = {
        "fig3": dict(axis_name="U", axis_values=_U_SMALL, base=base1,
                     series=[{"lam": 0.5}, {"lam": 1.0}, {"lam": 2.0}], algorithms=["SCSB1"]),
        "fig4": dict(axis_name="U", axis_values=_U_SMALL, base=base1,
                     series=[{"T": 10}, {"T": 15}, {"T": 20}], algorithms=["SCSB1"]),
        "fig5": dict(axis_name="U", axis_values=_U_MULTI, base=baseB,
                     series=[{"lam": 0.5}, {"lam": 1.0}], algorithms=["SCMB", "MILP"]),
        "fig6": dict(axis_name="U", axis_values=_U_MULTI, base=baseB,
                     series=[{"T": 10}, {"T": 15}], algorithms=["SCMB", "MILP"]),
        "fig6b": dict(axis_name="U", axis_values=_U_MULTI, base=baseB,
                      series=[{"B": 5}, {"B": 10}, {"B": 15}], algorithms=["SCMB", "MILP"]),
        "fig7": dict(axis_name="U", axis_values=[2, 4, 6, 8, 10, 12, 14, 16, 18, 20],
                     base={"U": 20, "B": 1, "C": 2, "T": 10, "lam": 0.5},
                     series=[{"B": 1}, {"B": 4}], algorithms=["MCMB", "MILP"]),
        "fig8": dict(axis_name="lam", axis_values=[0.5, 1.0, 2.0, 4.0, 8.0],
                     base={"U": 100, "B": 6, "C": 1, "T": 10, "lam": 0.5},
                     series=[{"B": b, "C": c} for b in (6, 10) for c in (1, 2, 10)], algorithms=["MCMB"]),
    }
    if figure not in table:
        raise ConfigError(f"unknown figure {figure!r}; presets: {sorted(table)}")
    return ExperimentConfig(figure=figure, realizations=realizations, seed=seed, **table[figure])


PRESETS = ("fig3", "fig4", "fig5", "fig6", "fig6b", "fig7", "fig8")


def load_config(path: str) -> list[ExperimentConfig]:
    """A JSON file holding one config object or a list of them.

    An object of the form ``{"preset": "fig3", ...}`` starts from that
    preset and overrides the remaining keys.
    """
    with open(path) as fh:
        doc = json.load(fh)
    docs = doc if isinstance(doc, list) else [doc]
    out = []
    for d in docs:
        d = dict(d)
        name = d.pop("preset", None)
        if name is not None:
            cfg = preset(name)
            if "oracle_limits" in d:
                d["oracle_limits"] = OracleLimits(**d["oracle_limits"])
            try:
                cfg = replace(cfg, **d)
            except TypeError as e:
                raise ConfigError(str(e)) from None
        else:
            cfg = ExperimentConfig.from_dict(d)
        out.append(cfg)
    return out
