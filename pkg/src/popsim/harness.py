"""Seeded experiment sweeps, summary statistics and CSV/JSON output.

An :class:`ExperimentSpec` names a protocol, a list of population sizes and a
trial count. Every trial gets its own seed ``derive_seed(seed_base, n, t)``,
so a spec fully determines the emitted bytes.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from . import __version__
from .engine import CONVERGED_CORRECT, Configuration, RunResult, run
from .protocol import ProtocolParams
from .registry import MINIMAL, get
from .rng import ALGORITHM, derive_seed

log = logging.getLogger(__name__)

CSV_HEADER = ("protocol", "n", "trials", "success_rate", "mean_time", "median_time", "p95_time",
              "mean_restarts", "normalized_time")
FORMATS = ("csv", "json")


@dataclass
class ExperimentSpec:
    protocol: str
    n_values: list[int]
    trials: int = 30
    seed_base: int = 0
    imbalance: Any = MINIMAL
    constants: dict[str, int] = field(default_factory=dict)
    horizon_factor: float = 1.0
    reference_n: int | None = None
    out: str | None = None
    format: str = "csv"
    instrument: bool = False
    # "stable" or, for the leader protocol, "selection" (stop once selection is over)
    stop: str = "stable"

    def __post_init__(self):
        get(self.protocol)
        self.n_values = [int(n) for n in self.n_values]
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not 0 <= self.seed_base < 1 << 64:
            raise ValueError("seed_base must be a 64-bit unsigned integer")
        if self.format not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}, got {self.format!r}")
        if self.horizon_factor <= 0:
            raise ValueError("horizon_factor must be positive")
        if self.stop not in ("stable", "selection"):
            raise ValueError(f"unknown stop rule {self.stop!r}")
        if self.stop == "selection" and self.protocol != "bcer-leader":
            raise ValueError("stop='selection' only applies to bcer-leader")
        if self.reference_n is not None and self.n_values and self.reference_n not in self.n_values:
            raise ValueError(f"reference_n={self.reference_n} is not among n_values")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown ExperimentSpec keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def params(self, n: int) -> ProtocolParams:
        return ProtocolParams(n=n).with_overrides(**self.constants)


@dataclass
class StatsRow:
    protocol: str
    n: int
    trials: int
    success_rate: float
    mean_time: float
    median_time: float
    p95_time: float
    mean_restarts: float
    normalized_time: float = math.nan


@dataclass
class Sweep:
    """Everything a sweep produced: per-(n, trial) results and aggregated rows."""

    spec: ExperimentSpec
    runs: dict[int, list[RunResult]]
    rows: list[StatsRow]

    @property
    def all_succeeded(self) -> bool:
        return all(r.outcome == CONVERGED_CORRECT for rs in self.runs.values() for r in rs)

    @property
    def invariant_trips(self) -> dict[str, int]:
        """Total count per ``*_violations`` counter, only for nonzero ones."""
        out: dict[str, int] = {}
        for rs in self.runs.values():
            for r in rs:
                for k, v in r.aux.items():
                    if k.endswith("_violations") and v:
                        out[k] = out.get(k, 0) + int(v)
        return out

    @property
    def ok(self) -> bool:
        return self.all_succeeded and not self.invariant_trips


def run_trial(spec: ExperimentSpec, n: int, trial: int) -> RunResult:
    entry = get(spec.protocol)
    params = spec.params(n)
    proto = entry.build(params) if spec.stop == "stable" else entry.build(params, stop=spec.stop)
    scenario = entry.scenario(n, spec.imbalance)
    horizon = max(1, math.ceil(entry.horizon(params) * spec.horizon_factor))
    config = Configuration.initial(proto, scenario, derive_seed(spec.seed_base, n, trial))
    return run(config, proto, horizon, fast=proto.fast_run is not None, instrument=spec.instrument)


def sweep_runs(spec: ExperimentSpec) -> dict[int, list[RunResult]]:
    if spec.imbalance not in (None, MINIMAL) and not get(spec.protocol).is_majority:
        raise ValueError(f"imbalance only applies to majority protocols, not {spec.protocol}")
    runs: dict[int, list[RunResult]] = {}
    for n in spec.n_values:
        runs[n] = [run_trial(spec, n, t) for t in range(spec.trials)]
        ok = sum(r.outcome == CONVERGED_CORRECT for r in runs[n])
        log.info("%s n=%d: %d/%d converged correctly", spec.protocol, n, ok, spec.trials)
    return runs


def run_time(r: RunResult) -> float | None:
    return None if r.convergence_step is None else float(r.parallel_time)


def whp_time(r: RunResult) -> float | None:
    """Parallel time of the leader's early-stop event (unique finished candidate)."""
    s = r.aux.get("whp_step", -1)
    return None if s is None or s < 0 else 2.0 * s / r.n


def aggregate(spec: ExperimentSpec, runs: dict[int, list[RunResult]], time_of=run_time) -> list[StatsRow]:
    rows = []
    for n, rs in runs.items():
        good = [r for r in rs if r.outcome == CONVERGED_CORRECT]
        times = np.array([t for t in map(time_of, good) if t is not None], dtype=float)
        if times.size:
            mean, median, p95 = float(times.mean()), float(np.median(times)), float(np.percentile(times, 95))
        else:
            mean = median = p95 = math.nan
        restarts = float(np.mean([r.aux.get("restarts", 0) for r in rs]))
        rows.append(StatsRow(spec.protocol, n, len(rs), len(good) / len(rs), mean, median, p95, restarts))
    if rows:
        ref_n = spec.reference_n if spec.reference_n is not None else min(r.n for r in rows)
        ref = next(r for r in rows if r.n == ref_n).mean_time
        for r in rows:
            r.normalized_time = 1.0 if r.n == ref_n else r.mean_time / ref
    return rows


def run_sweep(spec: ExperimentSpec) -> list[StatsRow]:
    return aggregate(spec, sweep_runs(spec))


def sweep(spec: ExperimentSpec) -> Sweep:
    runs = sweep_runs(spec)
    return Sweep(spec, runs, aggregate(spec, runs))


# ---------------------------------------------------------------------------
# output

def metadata(spec: ExperimentSpec) -> dict[str, Any]:
    """Everything needed to reproduce a file; deliberately free of timestamps."""
    base = ProtocolParams(n=2).with_overrides(**spec.constants)
    return {
        "generator": f"popsim {__version__}",
        "rng": ALGORITHM,
        "protocol": spec.protocol,
        "seed_base": spec.seed_base,
        "trials": spec.trials,
        "imbalance": spec.imbalance,
        "constants": {"c": base.c, "C": base.C, **base.leader.as_dict()},
        "overrides": dict(sorted(spec.constants.items())),
        "horizon_factor": spec.horizon_factor,
        "reference_n": spec.reference_n if spec.reference_n is not None
        else (min(spec.n_values) if spec.n_values else None),
        "stop": spec.stop,
        "time_unit": "parallel time = 2 * interactions / n",
    }


def _num(x: float) -> str:
    # repr keeps every digit of a float and is stable across runs
    return repr(float(x)) if isinstance(x, float) else str(x)


def _json_safe(x: Any) -> Any:
    return None if isinstance(x, float) and not math.isfinite(x) else x


def render(rows: Iterable[StatsRow], fmt: str, meta: dict[str, Any]) -> str:
    rows = list(rows)
    if fmt == "csv":
        buf = io.StringIO()
        buf.write("# metadata " + json.dumps(meta, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([_num(getattr(r, k)) for k in CSV_HEADER])
        return buf.getvalue()
    if fmt == "json":
        body = {"metadata": meta,
                "rows": [{k: _json_safe(v) for k, v in asdict(r).items()} for r in rows]}
        return json.dumps(body, indent=2, sort_keys=False) + "\n"
    raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")


def emit(rows: Iterable[StatsRow], fmt: str, path: str | Path, meta: dict[str, Any] | None = None) -> Path:
    path = Path(path)
    text = render(rows, fmt, meta or {})
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror or e}") from e
    return path
