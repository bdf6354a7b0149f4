"""Configuration files, parameter sweeps, and table emission.

Configs are flat ``key = value`` text files; unknown keys are rejected and
missing keys fall back to the library defaults. Sweep and design tables are
written as CSV (header row first) or JSON lines; both carry
``schema_version`` so downstream readers can pin the layout (current
version: 1).
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .design import (
    SparsityDesign,
    calibrate_measurements,
    measurements_for_sparsity,
    min_sparsity_level,
)
from .errors import ConfigError, DomainError
from .simulate import MetricsSummary, SystemConfig, run_scenario

SCHEMA_VERSION = 1

_INT_KEYS = {"n_users", "buffer_capacity", "packet_bits", "n_slots", "seed"}
_FLOAT_KEYS = {
    "bandwidth", "frame_duration", "noise_psd", "arrival_rate", "epsilon",
    "request_noise_std", "self_interference_std",
}
_STR_KEYS = {"duplex", "scheme", "detection"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS

#: Sweepable parameter names (aliases on the left map to config fields).
SWEEP_PARAMETERS = {
    "arrival_rate": "arrival_rate",
    "lambda": "arrival_rate",
    "frame_duration": "frame_duration",
    "t_f": "frame_duration",
    "request_prob": "request_prob",
    "alpha": "request_prob",
    "n_slots": "n_slots",
    "d": "n_slots",
    "bandwidth": "bandwidth",
    "w": "bandwidth",
}


def parse_config(path) -> SystemConfig:
    """Read a flat key-value configuration file.

    Blank lines and ``#`` comments are ignored. Unknown keys, malformed
    lines (with their line number), and out-of-range values (with the key
    name) all raise ConfigError. An empty file yields the full default
    configuration.
    """
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in _ALL_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                if key in _INT_KEYS:
                    values[key] = int(val)
                elif key in _FLOAT_KEYS:
                    values[key] = float(val)
                else:
                    values[key] = val
            except ValueError:
                raise ConfigError(
                    f"{path}:{lineno}: bad value {val!r} for key {key!r}"
                ) from None
    try:
        return SystemConfig(**values)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def write_config(cfg: SystemConfig, path) -> None:
    """Write a configuration so that parse_config reads it back unchanged."""
    with open(path, "w", encoding="utf-8") as fh:
        for f in fields(cfg):
            fh.write(f"{f.name} = {getattr(cfg, f.name)}\n")


@dataclass(frozen=True)
class SweepSpec:
    """A one-parameter sweep: values x seeds scenarios over a base config."""

    parameter: str
    values: tuple
    base: SystemConfig
    n_frames: int
    n_seeds: int = 1
    base_seed: int = 0

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise DomainError(
                f"parameter must be one of {sorted(set(SWEEP_PARAMETERS))}"
            )
        if len(self.values) == 0:
            raise DomainError("values must be non-empty")
        diffs = np.diff(np.asarray(self.values, dtype=float))
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise DomainError("values must be strictly monotone")
        if self.n_seeds < 1:
            raise DomainError("n_seeds must be >= 1")
        if self.n_frames < 1:
            raise DomainError("n_frames must be >= 1")


def seed_for(base_seed: int, value_index: int, seed_index: int) -> int:
    """Counter-based seed splitter; rows are independent and reproducible."""
    ss = np.random.SeedSequence(
        entropy=base_seed, spawn_key=(value_index, seed_index)
    )
    return int(ss.generate_state(1, np.uint32)[0])


def design_for_request_prob(cfg: SystemConfig, alpha: float) -> SparsityDesign:
    """Operating point with the request probability pinned externally."""
    s = max(min_sparsity_level(cfg.n_users, alpha, cfg.epsilon), 1)
    m = min(measurements_for_sparsity(s, "heuristic"), cfg.n_users)
    if m <= s:
        m = s + 1
    return SparsityDesign(cfg.n_users, s, alpha, cfg.epsilon, m, alpha)


def _scenario_for(spec: SweepSpec, value, seed: int) -> tuple[SystemConfig, SparsityDesign | None]:
    field_name = SWEEP_PARAMETERS[spec.parameter]
    if field_name == "request_prob":
        cfg = replace(spec.base, seed=seed)
        return cfg, design_for_request_prob(cfg, float(value))
    if field_name == "n_slots":
        cfg = replace(spec.base, n_slots=int(value), seed=seed)
    else:
        cfg = replace(spec.base, **{field_name: float(value)}, seed=seed)
    return cfg, None


_METRIC_FIELDS = [f.name for f in fields(MetricsSummary)]


def run_sweep(spec: SweepSpec) -> list[dict]:
    """Run every (value, seed) scenario and append per-value aggregates.

    One ``kind="row"`` record per scenario; after each value's rows, a
    ``kind="mean"`` and (for n_seeds > 1) a ``kind="std"`` record aggregate
    every metric field. A failing scenario produces a row with
    ``status="failed"`` and its message, and the sweep continues.
    """
    records = []
    for vi, value in enumerate(spec.values):
        value_rows = []
        for si in range(spec.n_seeds):
            seed = seed_for(spec.base_seed, vi, si)
            record = {
                "schema_version": SCHEMA_VERSION,
                "parameter": spec.parameter,
                "value": value,
                "seed_index": si,
                "seed": seed,
                "kind": "row",
                "status": "ok",
                "error": "",
            }
            try:
                cfg, design = _scenario_for(spec, value, seed)
                summary = run_scenario(cfg, spec.n_frames, design=design)
                record.update({k: getattr(summary, k) for k in _METRIC_FIELDS})
                value_rows.append(summary)
            except Exception as exc:  # noqa: BLE001 - sweep must survive rows
                record["status"] = "failed"
                record["error"] = str(exc)
                record.update({k: math.nan for k in _METRIC_FIELDS})
            records.append(record)
        if value_rows:
            for kind, agg in _aggregates(value_rows):
                rec = {
                    "schema_version": SCHEMA_VERSION,
                    "parameter": spec.parameter,
                    "value": value,
                    "seed_index": -1,
                    "seed": -1,
                    "kind": kind,
                    "status": "ok",
                    "error": "",
                }
                rec.update(agg)
                records.append(rec)
    return records


def _aggregates(summaries):
    cols = {k: [getattr(s, k) for s in summaries] for k in _METRIC_FIELDS}
    yield "mean", {k: statistics.fmean(v) for k, v in cols.items()}
    if len(summaries) > 1:
        yield "std", {k: statistics.stdev(v) for k, v in cols.items()}


def emit_design_table(
    n_users: int,
    epsilon: float,
    alpha_grid,
    target_fail: float = 1e-3,
    trials: int = 1000,
    seed: int = 0,
) -> list[dict]:
    """Design table: request probability against sparsity and measurements.

    For each gate probability the worst-case sparsity level is computed,
    then the heuristic and the Monte Carlo calibrated measurement counts.
    A calibration that cannot meet the target error even with one
    measurement per user reports M = n_users and ``saturated`` true.
    """
    rows = []
    for alpha in alpha_grid:
        s = max(min_sparsity_level(n_users, float(alpha), epsilon), 1)
        m_heur = measurements_for_sparsity(s, "heuristic")
        if s >= n_users:
            cal_m, saturated = n_users, True
        else:
            cal = calibrate_measurements(
                s, n_users, target_fail=target_fail, trials=trials, seed=seed
            )
            cal_m, saturated = cal.n_measurements, cal.saturated
        rows.append(
            {
                "schema_version": SCHEMA_VERSION,
                "request_prob": float(alpha),
                "sparsity_level": s,
                "m_heuristic": m_heur,
                "m_monte_carlo": cal_m,
                "saturated": saturated,
                "ratio_monte_carlo": cal_m / s,
            }
        )
    return rows


def format_records(records: list[dict], fmt: str = "csv") -> str:
    """Render records deterministically as CSV or JSON lines."""
    if not records:
        return ""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(records[0].keys()),
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(records)
        return buf.getvalue()
    if fmt == "jsonl":
        return "".join(json.dumps(r, sort_keys=False) + "\n" for r in records)
    raise DomainError(f"format must be 'csv' or 'jsonl', got {fmt!r}")


def write_records(records: list[dict], path, fmt: str = "csv") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_records(records, fmt))
