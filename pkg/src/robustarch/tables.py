"""
Table definitions (JSON), table execution and CSV / text rendering.

A table file looks like::

    {
      "schema_version": 1,
      "name": "table2",
      "title": "Rejection frequencies under TAR models",
      "kind": "size",
      "dgps": ["2-1", "2-2"],
      "models": ["AR(2)", "T3(2)"],
      "sample_sizes": [100, 250, 500],
      "replications": 2000,
      "level": 0.05,
      "base_seed": 20190601,
      "arch_lag": 1
    }

``kind`` is ``size``, ``power`` or ``size_corrected_power``; the last two
need a ``gamma1`` list. ``cv_grid`` optionally overrides the bandwidth
multipliers of ``NP_cv`` models.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from importlib import resources
import io
import json
import os
from pathlib import Path
import time

import jsonschema

from .dgp import preset
from .experiment import (
    CriticalValueTable,
    ExperimentConfig,
    RejectionTable,
    critical_value_table,
    rejection_table,
    simulate_lm_statistics,
    size_corrected_table,
)
from .mean_models import MeanModelSpec

__all__ = [
    "SCHEMA_VERSION",
    "TABLE_SCHEMA",
    "TableConfig",
    "TableRun",
    "load_table_config",
    "bundled_config_path",
    "run_table",
    "table_csv",
    "table_text",
    "critical_values_csv",
]

SCHEMA_VERSION = 1

TABLE_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "name", "kind", "dgps", "models", "sample_sizes"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string", "pattern": r"^[A-Za-z0-9_.-]+$"},
        "title": {"type": "string"},
        "kind": {"enum": ["size", "power", "size_corrected_power"]},
        "dgps": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "models": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "sample_sizes": {
            "type": "array",
            "items": {"type": "integer", "minimum": 20},
            "minItems": 1,
        },
        "gamma1": {
            "type": "array",
            "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "minItems": 1,
        },
        "replications": {"type": "integer", "minimum": 100},
        "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "base_seed": {"type": "integer", "minimum": 0},
        "arch_lag": {"type": "integer", "minimum": 1},
        "cv_grid": {
            "type": "array",
            "items": {"type": "number", "exclusiveMinimum": 0},
            "minItems": 1,
        },
    },
    "allOf": [
        {
            "if": {"properties": {"kind": {"enum": ["power", "size_corrected_power"]}}},
            "then": {"required": ["gamma1"]},
        }
    ],
}


@dataclass(frozen=True)
class TableConfig:
    name: str
    title: str
    kind: str
    experiment: ExperimentConfig
    gamma1: tuple[float, ...] = ()
    raw: dict = field(default_factory=dict, compare=False)


def _parse(raw: dict) -> TableConfig:
    jsonschema.validate(raw, TABLE_SCHEMA)
    grid = raw.get("cv_grid")
    models = []
    for label in raw["models"]:
        m = MeanModelSpec.from_label(label)
        if grid is not None and m.kind == "nw":
            m = MeanModelSpec.nw(m.lags, m.bandwidth_rule, grid)
        models.append(m)
    kwargs = {k: raw[k] for k in ("replications", "level", "base_seed") if k in raw}
    if "arch_lag" in raw:
        kwargs["arch_lag_p"] = raw["arch_lag"]
    exp = ExperimentConfig(
        dgps=tuple(preset(n) for n in raw["dgps"]),
        models=tuple(models),
        sample_sizes=tuple(raw["sample_sizes"]),
        **kwargs,
    )
    return TableConfig(
        name=raw["name"],
        title=raw.get("title", raw["name"]),
        kind=raw["kind"],
        experiment=exp,
        gamma1=tuple(float(g) for g in raw.get("gamma1", ())),
        raw=raw,
    )


def load_table_config(source) -> TableConfig:
    """
    Load and validate a table definition from a path or a dict.

    Raises ``jsonschema.ValidationError`` on schema violations and
    ``ValueError`` / ``KeyError`` on unknown DGPs or model labels.
    """
    if isinstance(source, dict):
        return _parse(source)
    with open(source) as fh:
        return _parse(json.load(fh))


def bundled_config_path(name: str) -> Path:
    """Path of a bundled table definition such as ``table1``."""
    ref = resources.files("robustarch") / "configs" / f"{name}.json"
    path = Path(str(ref))
    if not path.is_file():
        raise FileNotFoundError(f"no bundled config named {name!r}")
    return path


@dataclass
class TableRun:
    """Result blocks of one table, one :class:`RejectionTable` per gamma1."""

    config: TableConfig
    blocks: list[RejectionTable]
    critical_values: CriticalValueTable | None = None
    timings: dict = field(default_factory=dict)
    wall_time: float = 0.0


def run_table(
    config: TableConfig,
    workers: int = 1,
    replications: int | None = None,
    base_seed: int | None = None,
) -> TableRun:
    """Run every cell of a table definition."""
    exp = config.experiment
    if replications is not None or base_seed is not None:
        exp = replace(
            exp,
            replications=exp.replications if replications is None else int(replications),
            base_seed=exp.base_seed if base_seed is None else int(base_seed),
        )
        config = TableConfig(config.name, config.title, config.kind, exp, config.gamma1, config.raw)
    t0 = time.perf_counter()
    timings: dict = {}
    cvs = None
    if config.kind == "size":
        lm = simulate_lm_statistics(exp, gamma1=0.0, workers=workers)
        timings[0.0] = lm.timings
        blocks = [rejection_table(lm)]
    else:
        if config.kind == "size_corrected_power":
            null = simulate_lm_statistics(exp, gamma1=0.0, workers=workers)
            timings[0.0] = null.timings
            cvs = critical_value_table(null)
        blocks = []
        for g in config.gamma1:
            lm = simulate_lm_statistics(exp, gamma1=g, workers=workers)
            timings[g] = lm.timings
            blocks.append(rejection_table(lm) if cvs is None else size_corrected_table(lm, cvs))
    return TableRun(config, blocks, cvs, timings, time.perf_counter() - t0)


def _fmt(x: float) -> str:
    return repr(float(x))


def table_csv(run: TableRun) -> str:
    """
    Wide CSV: one row per ``(dgp, gamma1, T)``, one column per mean model.
    """
    exp = run.config.experiment
    models = [m.label for m in exp.models]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dgp", "gamma1", "T", *models])
    for block in run.blocks:
        for d in exp.dgps:
            for T in exp.sample_sizes:
                w.writerow(
                    [d.label, _fmt(block.gamma1), T]
                    + [_fmt(block.cells[(d.label, m, T)]) for m in models]
                )
    return buf.getvalue()


def critical_values_csv(cvs: CriticalValueTable, config: TableConfig) -> str:
    exp = config.experiment
    models = [m.label for m in exp.models]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dgp", "T", *models])
    for d in exp.dgps:
        for T in exp.sample_sizes:
            w.writerow([d.label, T] + [_fmt(cvs.cells[(d.label, m, T)]) for m in models])
    return buf.getvalue()


def table_text(run: TableRun) -> str:
    """Aligned rendering: DGP header rows, one row per sample size."""
    exp = run.config.experiment
    models = [m.label for m in exp.models]
    width = max(8, *(len(m) + 2 for m in models))
    stub = 10
    lines = [f"{run.config.title} ({run.blocks[0].replications_used} replications)"]
    header = " " * stub
    if run.config.kind != "size":
        group = "|".join(
            f"gamma1={b.gamma1:g}".center(width * len(models)) for b in run.blocks
        )
        lines.append(" " * stub + group)
    header += "|".join("".join(m.rjust(width) for m in models) for _ in run.blocks)
    lines.append(header)
    lines.append("-" * len(header))
    for d in exp.dgps:
        lines.append(d.label)
        for T in exp.sample_sizes:
            row = f"T={T}".ljust(stub)
            row += "|".join(
                "".join(f"{b.cells[(d.label, m, T)]:.3f}".rjust(width) for m in models)
                for b in run.blocks
            )
            lines.append(row)
    return "\n".join(lines) + "\n"


def manifest(run: TableRun, outputs: dict[str, str], version: str) -> dict:
    exp = run.config.experiment
    cells = []
    for block in run.blocks:
        for (dgp, model, T), f in block.cells.items():
            key = (dgp, model, T)
            cells.append(
                {
                    "dgp": dgp,
                    "model": model,
                    "T": T,
                    "gamma1": block.gamma1,
                    "frequency": f,
                    "monte_carlo_se": block.monte_carlo_se[key],
                    "rejections": block.rejections[key],
                    "valid": block.valid[key],
                    "failures": block.failures[key],
                    "critical_value": None
                    if run.critical_values is None
                    else run.critical_values.cells[key],
                }
            )
    timings = [
        {"gamma1": g, "dgp": dgp, "T": T, "seconds": s}
        for g, per in run.timings.items()
        for (dgp, T), s in per.items()
    ]
    raw = dict(run.config.raw)
    raw["replications"] = exp.replications
    raw["base_seed"] = exp.base_seed
    raw["level"] = exp.level
    raw["arch_lag"] = exp.arch_lag_p
    return {
        "tool": "robustarch",
        "version": version,
        "config": raw,
        "base_seed": exp.base_seed,
        "replications": exp.replications,
        "wall_time_seconds": run.wall_time,
        "cell_timings": timings,
        "cells": cells,
        "outputs": outputs,
    }


def write_outputs(run: TableRun, out_dir: str | os.PathLike, version: str) -> dict[str, str]:
    """Write CSV, text table, critical values (if any) and manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = run.config.name
    paths = {"csv": out / f"{name}.csv", "text": out / f"{name}.txt"}
    paths["csv"].write_text(table_csv(run))
    paths["text"].write_text(table_text(run))
    if run.critical_values is not None:
        paths["critical_values"] = out / f"{name}_critical_values.csv"
        paths["critical_values"].write_text(critical_values_csv(run.critical_values, run.config))
    paths["manifest"] = out / f"{name}_manifest.json"
    str_paths = {k: str(v) for k, v in paths.items()}
    paths["manifest"].write_text(json.dumps(manifest(run, str_paths, version), indent=2) + "\n")
    return str_paths
