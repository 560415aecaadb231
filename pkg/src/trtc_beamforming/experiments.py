"""Scenario runner, Monte-Carlo sweeps, runtime benchmark and CSV output.

Trial ``t`` of a sweep uses seed ``rng_seed + t`` for every swept value and
every scheme; with the keyed random streams of :mod:`system_model` this
gives common random numbers across the sweep.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np

from .baselines import projected_gradient_oracle, solve_sum_power_baseline
from .optimizer import IterationTrace, initial_beams, run
from .rates import RateReport, rate_report
from .subproblem import solve_ball_qp
from .system_model import ConfigError, SystemConfig, drop_users, generate_channels

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = [
    "SWEEP_PARAMS",
    "CSV_COLUMNS",
    "TRIAL_COLUMNS",
    "SweepSpec",
    "SchemeResult",
    "load_config",
    "parse_overrides",
    "build_config",
    "scenario_channels",
    "run_scenario",
    "run_sweep",
    "write_rows",
    "bench_runtime",
    "write_trace_csv",
]

log = logging.getLogger(__name__)

# swept parameter name -> raw config key
SWEEP_PARAMS = {
    "unit_power_dBm": "unit_power_dbm",
    "users_per_cell": "num_users_per_cell",
    "cell_radius": "cell_radius",
    "num_cells": "num_cells",
    "pathloss_exponent": "pathloss_exponent",
    "num_units": "num_units",
}
SCHEMES = ("trtc", "baseline")

CSV_COLUMNS = [
    "sweep_param",
    "value",
    "scheme",
    "trial_count",
    "mean_sumrate_bps_hz",
    "std_sumrate",
    "mean_iters",
    "mean_ms_per_solve",
]
TRIAL_COLUMNS = ["sweep_param", "value", "scheme", "trial", "seed", "sumrate_bps_hz", "iters", "ms_per_solve"]


def load_config(path) -> dict:
    """Read a scenario file; ``.toml`` or ``.json`` chosen by extension."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".toml":
            raw = tomllib.loads(data.decode("utf-8"))
        elif path.suffix.lower() == ".json":
            raw = json.loads(data)
        else:
            raise ConfigError("config", f"unsupported extension {path.suffix!r} (use .toml or .json)")
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a table / object")
    return raw


def parse_overrides(items: Iterable[str]) -> dict:
    """``["key=value", ...]`` -> dict; values are parsed as JSON when possible."""
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError("--set", f"expected key=value, got {item!r}")
        try:
            out[key.strip()] = json.loads(value)
        except ValueError:
            out[key.strip()] = value
    return out


def build_config(raw: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> SystemConfig:
    merged = dict(raw)
    merged.update(overrides or {})
    return SystemConfig.from_dict(merged)


def scenario_channels(cfg: SystemConfig, seed: int):
    drop = drop_users(cfg, seed)
    return drop, generate_channels(cfg, drop, seed)


@dataclass
class SchemeResult:
    report: RateReport
    trace: IterationTrace
    seconds: float


def run_scenario(cfg: SystemConfig, seed: int, schemes: Sequence[str] = ("trtc",)) -> dict:
    """Drop users, draw channels and solve every requested scheme from a common init."""
    for s in schemes:
        if s not in SCHEMES:
            raise ConfigError("schemes", f"unknown scheme {s!r}")
    _, channels = scenario_channels(cfg, seed)
    init = initial_beams(channels, cfg)
    out = {}
    for scheme in schemes:
        t0 = time.perf_counter()
        if scheme == "trtc":
            beams, trace = run(channels, cfg, init=init)
            constraint = "unit"
        else:
            beams, trace = solve_sum_power_baseline(channels, cfg, init=init)
            constraint = "sum"
        elapsed = time.perf_counter() - t0
        out[scheme] = SchemeResult(rate_report(channels, beams, cfg, constraint=constraint), trace, elapsed)
    return out


@dataclass
class SweepSpec:
    param: str
    values: Sequence[Any]
    trials: int = 100
    schemes: Sequence[str] = ("trtc",)
    output: Optional[str] = None

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ConfigError("sweep_param", f"must be one of {sorted(SWEEP_PARAMS)}, got {self.param!r}")
        if len(self.values) == 0:
            raise ConfigError("values", "value list is empty")
        if self.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError("schemes", f"unknown scheme {s!r}")


def _trial(args):
    raw, param, value, trial, schemes = args
    cfg = build_config(raw, {SWEEP_PARAMS[param]: value})
    seed = cfg.rng_seed + trial
    res = run_scenario(cfg, seed, schemes)
    return [
        {
            "sweep_param": param,
            "value": value,
            "scheme": scheme,
            "trial": trial,
            "seed": seed,
            "sumrate_bps_hz": r.report.objective_bits,
            "iters": r.trace.iterations,
            "ms_per_solve": 1e3 * r.seconds,
        }
        for scheme, r in res.items()
    ]


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_rows(rows: Sequence[Mapping[str, Any]], columns: Sequence[str], path) -> None:
    path = Path(path)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    try:
        path.write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def run_sweep(spec: SweepSpec, raw_cfg: Mapping[str, Any], workers: int = 1,
              record_timing: bool = True, trials_output=None):
    """Run every (value, trial, scheme) and write one summary row per (value, scheme).

    Returns ``(summary_rows, trial_rows)``. With ``record_timing=False``
    the timing columns are written as 0 so that output bytes depend on
    ``(config, seed)`` only.
    """
    raw_cfg = dict(raw_cfg)
    build_config(raw_cfg)  # validate before spending time
    tasks = [(raw_cfg, spec.param, v, t, tuple(spec.schemes)) for v in spec.values for t in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial, tasks))
    else:
        results = [_trial(task) for task in tasks]
    trial_rows = [row for rows in results for row in rows]
    if not record_timing:
        for row in trial_rows:
            row["ms_per_solve"] = 0.0

    summary = []
    for v in spec.values:
        for scheme in spec.schemes:
            sel = [r for r in trial_rows if r["value"] == v and r["scheme"] == scheme]
            rates = np.array([r["sumrate_bps_hz"] for r in sel])
            summary.append(
                {
                    "sweep_param": spec.param,
                    "value": v,
                    "scheme": scheme,
                    "trial_count": len(sel),
                    "mean_sumrate_bps_hz": float(np.mean(rates)),
                    "std_sumrate": float(np.std(rates, ddof=1)) if len(sel) > 1 else 0.0,
                    "mean_iters": float(np.mean([r["iters"] for r in sel])),
                    "mean_ms_per_solve": float(np.mean([r["ms_per_solve"] for r in sel])),
                }
            )
            log.info("%s=%s %s: mean sum-rate %.4f bit/s/Hz over %d trials",
                     spec.param, v, scheme, summary[-1]["mean_sumrate_bps_hz"], len(sel))
    if spec.output:
        write_rows(summary, CSV_COLUMNS, spec.output)
    if trials_output:
        write_rows(trial_rows, TRIAL_COLUMNS, trials_output)
    return summary, trial_rows


def bench_runtime(cfg: SystemConfig, trials: int = 10, seed: Optional[int] = None,
                  outer_iters: int = 2) -> dict:
    """Median wall-clock of the closed-form and the oracle subproblem path.

    Each trial runs the optimizer for ``outer_iters`` sweeps, records every
    ball-QP instance it meets, then times solving that same instance list
    with :func:`solve_ball_qp` and with :func:`projected_gradient_oracle`.
    """
    if trials < 3:
        raise ConfigError("trials", "bench_runtime needs at least 3 trials")
    seed = cfg.rng_seed if seed is None else seed
    run_cfg = cfg.replace(max_outer_iters=outer_iters, convergence_tol=0.0)
    closed, oracle, counts = [], [], []
    for t in range(trials):
        _, channels = scenario_channels(cfg, seed + t)
        _, trace = run(channels, run_cfg, record_qp_instances=True)
        inst = trace.qp_instances
        t0 = time.perf_counter()
        for abar, b8, radius in inst:
            solve_ball_qp(abar, b8, radius)
        t1 = time.perf_counter()
        for abar, b8, radius in inst:
            projected_gradient_oracle(abar, b8, radius)
        t2 = time.perf_counter()
        closed.append(t1 - t0)
        oracle.append(t2 - t1)
        counts.append(len(inst))
    med_c = float(np.median(closed))
    med_o = float(np.median(oracle))
    return {
        "num_units": cfg.N,
        "trials": trials,
        "instances_per_trial": int(np.median(counts)),
        "median_closed_form_s": med_c,
        "median_oracle_s": med_o,
        "speedup": med_o / med_c if med_c > 0 else math.inf,
    }


def write_trace_csv(trace: IterationTrace, path) -> None:
    rows = list(trace.rows())
    write_rows(rows, list(rows[0].keys()), path)
