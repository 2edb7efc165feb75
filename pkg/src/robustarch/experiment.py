"""
Monte Carlo engine for empirical size, nominal power and size-corrected
power of the ARCH LM test under different conditional-mean regressions.

Replication ``r`` of the ``(dgp, gamma1, T)`` cell draws from
``RngStream(base_seed, (cell_key, r))``, so every mean model in a cell sees the
same simulated series and results do not depend on how replications are
spread over worker processes.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import hashlib
import logging
import math
import time
from typing import Iterable, Sequence

import numpy as np

from .arch_test import lm_arch_test
from .dgp import ArchErrorSpec, DgpSpec, simulate
from .mean_models import MeanModelSpec, fit_mean_model
from .numerics import RngStream, chi2_survival

__all__ = [
    "DEFAULT_SEED",
    "MAX_FAILURE_RATE",
    "CellFailure",
    "ExperimentConfig",
    "LmStatistics",
    "RejectionTable",
    "CriticalValueTable",
    "cell_key",
    "simulate_lm_statistics",
    "rejection_table",
    "critical_value_table",
    "size_corrected_table",
    "run_size",
    "run_power",
    "empirical_critical_values",
    "run_size_corrected_power",
    "reference_tolerance",
]

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20190601
MAX_FAILURE_RATE = 0.01

CellIndex = tuple[str, str, int]


class CellFailure(RuntimeError):
    """Too many replications of a cell raised during fitting or testing."""


@dataclass(frozen=True)
class ExperimentConfig:
    """
    What to simulate.

    ``dgps`` carry their own error specification; :func:`run_size` requires
    ``gamma1 == 0`` and :func:`run_power` overrides it.
    """

    dgps: tuple[DgpSpec, ...]
    models: tuple[MeanModelSpec, ...]
    sample_sizes: tuple[int, ...] = (100, 250, 500)
    replications: int = 2000
    level: float = 0.05
    base_seed: int = DEFAULT_SEED
    arch_lag_p: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "dgps", tuple(self.dgps))
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "sample_sizes", tuple(int(t) for t in self.sample_sizes))
        if self.replications < 100:
            raise ValueError(f"replications must be >= 100, got {self.replications}")
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"level must lie in (0, 1), got {self.level}")
        if self.arch_lag_p < 1:
            raise ValueError("arch_lag_p must be >= 1")
        if not self.dgps or not self.models or not self.sample_sizes:
            raise ValueError("dgps, models and sample_sizes must be non-empty")
        labels = [d.label for d in self.dgps]
        if len(set(labels)) != len(labels):
            raise ValueError("DGP labels must be unique")

    def with_gamma1(self, gamma1: float, gamma0: float = 1.0) -> ExperimentConfig:
        err = ArchErrorSpec(gamma0, gamma1)
        return replace(self, dgps=tuple(d.with_error(err) for d in self.dgps))

    def cells(self) -> list[CellIndex]:
        return [
            (d.label, m.label, T)
            for d in self.dgps
            for T in self.sample_sizes
            for m in self.models
        ]


def cell_key(dgp_label: str, gamma1: float, T: int) -> int:
    """Stable 64-bit key for the random streams of one simulation cell."""
    text = f"{dgp_label}|{float(gamma1)!r}|{int(T)}"
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


@dataclass
class LmStatistics:
    """
    LM statistics for every replication of every cell.

    ``stats[(dgp, T)]`` has shape ``(replications, len(models))``; failed
    replications hold NaN.
    """

    config: ExperimentConfig
    gamma1: float
    stats: dict[tuple[str, int], np.ndarray]
    timings: dict[tuple[str, int], float] = field(default_factory=dict)

    def column(self, dgp: str, model: str, T: int) -> np.ndarray:
        j = [m.label for m in self.config.models].index(model)
        return self.stats[(dgp, T)][:, j]


def _replicate(dgp: DgpSpec, T: int, models, p: int, base_seed: int, key: int, r: int) -> np.ndarray:
    y = simulate(dgp, T, RngStream(base_seed, (key, r)))
    out = np.full(len(models), np.nan)
    for j, model in enumerate(models):
        try:
            fit = fit_mean_model(y, model)
            out[j] = lm_arch_test(fit.residuals, p).lm_stat
        except (ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
            logger.debug("replication %d of %s T=%d %s failed: %s", r, dgp.label, T, model.label, exc)
    return out


def _run_chunk(args) -> np.ndarray:
    dgp, T, models, p, base_seed, key, start, stop = args
    return np.vstack(
        [_replicate(dgp, T, models, p, base_seed, key, r) for r in range(start, stop)]
    )


def _chunks(n: int, workers: int) -> list[tuple[int, int]]:
    size = max(1, math.ceil(n / (4 * workers)))
    return [(s, min(s + size, n)) for s in range(0, n, size)]


def simulate_lm_statistics(
    config: ExperimentConfig,
    gamma1: float | None = None,
    workers: int = 1,
    replications: int | None = None,
) -> LmStatistics:
    """
    Simulate every ``(dgp, T)`` cell and record LM statistics for each model.

    Parameters
    ----------
    gamma1 : float, optional
        Overrides the ARCH coefficient of every DGP (``gamma0 = 1``).
    workers : int
        Worker processes; the output is identical for any value.
    replications : int, optional
        Overrides ``config.replications``.
    """
    if gamma1 is not None:
        config = config.with_gamma1(gamma1)
    reps = config.replications if replications is None else int(replications)
    g1 = {d.label: d.error.gamma1 for d in config.dgps}
    stats: dict[tuple[str, int], np.ndarray] = {}
    timings: dict[tuple[str, int], float] = {}
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for dgp in config.dgps:
            for T in config.sample_sizes:
                t0 = time.perf_counter()
                key = cell_key(dgp.label, dgp.error.gamma1, T)
                jobs = [
                    (dgp, T, config.models, config.arch_lag_p, config.base_seed, key, a, b)
                    for a, b in _chunks(reps, max(workers, 1))
                ]
                parts = list(pool.map(_run_chunk, jobs)) if pool else [_run_chunk(j) for j in jobs]
                stats[(dgp.label, T)] = np.vstack(parts)
                timings[(dgp.label, T)] = time.perf_counter() - t0
                logger.info(
                    "%s gamma1=%g T=%d: %d replications in %.1fs",
                    dgp.label, dgp.error.gamma1, T, reps, timings[(dgp.label, T)],
                )
    finally:
        if pool is not None:
            pool.shutdown()
    gammas = set(g1.values())
    gamma = gammas.pop() if len(gammas) == 1 else float("nan")
    return LmStatistics(config=config, gamma1=gamma, stats=stats, timings=timings)


@dataclass
class RejectionTable:
    """
    Rejection frequencies per ``(dgp, model, T)`` cell.

    ``cells[c] = rejections[c] / valid[c]`` exactly, and
    ``monte_carlo_se[c] = sqrt(f (1 - f) / valid[c])``.
    """

    cells: dict[CellIndex, float]
    rejections: dict[CellIndex, int]
    valid: dict[CellIndex, int]
    failures: dict[CellIndex, int]
    monte_carlo_se: dict[CellIndex, float]
    replications_used: int
    gamma1: float
    kind: str = "nominal"

    def __getitem__(self, cell: CellIndex) -> float:
        return self.cells[cell]

    def get(self, dgp: str, model: str, T: int) -> float:
        return self.cells[(_dgp_label(dgp), model, int(T))]

    def se(self, dgp: str, model: str, T: int) -> float:
        return self.monte_carlo_se[(_dgp_label(dgp), model, int(T))]


@dataclass
class CriticalValueTable:
    """Empirical ``1 - level`` quantile of the null LM statistics per cell."""

    cells: dict[CellIndex, float]
    level: float
    valid: dict[CellIndex, int]

    def get(self, dgp: str, model: str, T: int) -> float:
        return self.cells[(_dgp_label(dgp), model, int(T))]


def _dgp_label(name: str) -> str:
    return name if name.upper().startswith("DGP") else f"DGP{name}"


def _tabulate(
    lm: LmStatistics,
    decide,
    kind: str,
) -> RejectionTable:
    cfg = lm.config
    cells, rej, valid, fails, se = {}, {}, {}, {}, {}
    bad = []
    for d in cfg.dgps:
        for T in cfg.sample_sizes:
            block = lm.stats[(d.label, T)]
            for j, m in enumerate(cfg.models):
                key = (d.label, m.label, T)
                col = block[:, j]
                ok = np.isfinite(col)
                n_ok = int(ok.sum())
                n_fail = int(col.size - n_ok)
                if n_fail > MAX_FAILURE_RATE * col.size or n_ok == 0:
                    bad.append((key, n_fail, col.size))
                k = int(np.count_nonzero(decide(key, col[ok])))
                f = k / n_ok if n_ok else float("nan")
                cells[key], rej[key], valid[key], fails[key] = f, k, n_ok, n_fail
                se[key] = math.sqrt(f * (1.0 - f) / n_ok) if n_ok else float("nan")
    if bad:
        desc = "; ".join(f"{k}: {nf}/{n} failed" for k, nf, n in bad)
        raise CellFailure(f"cells exceeded the {MAX_FAILURE_RATE:.0%} failure budget: {desc}")
    return RejectionTable(
        cells=cells,
        rejections=rej,
        valid=valid,
        failures=fails,
        monte_carlo_se=se,
        replications_used=int(next(iter(lm.stats.values())).shape[0]),
        gamma1=lm.gamma1,
        kind=kind,
    )


def rejection_table(lm: LmStatistics, level: float | None = None) -> RejectionTable:
    """Fraction of replications with chi-square p-value below ``level``."""
    level = lm.config.level if level is None else level
    df = lm.config.arch_lag_p

    def decide(_key, col):
        return np.array([chi2_survival(x, df) < level for x in col], dtype=bool)

    return _tabulate(lm, decide, "nominal")


def critical_value_table(lm: LmStatistics, level: float | None = None) -> CriticalValueTable:
    """Empirical ``1 - level`` quantiles (linear interpolation) of ``lm``."""
    level = lm.config.level if level is None else level
    cells, valid = {}, {}
    for d in lm.config.dgps:
        for T in lm.config.sample_sizes:
            block = lm.stats[(d.label, T)]
            for j, m in enumerate(lm.config.models):
                col = block[:, j]
                col = col[np.isfinite(col)]
                if col.size == 0:
                    raise CellFailure(f"no valid null statistics for {(d.label, m.label, T)}")
                cells[(d.label, m.label, T)] = float(np.quantile(col, 1.0 - level, method="linear"))
                valid[(d.label, m.label, T)] = int(col.size)
    return CriticalValueTable(cells=cells, level=level, valid=valid)


def size_corrected_table(lm: LmStatistics, critical_values: CriticalValueTable) -> RejectionTable:
    """Fraction of replications whose statistic exceeds the cell's critical value."""
    missing = [
        (d.label, m.label, T)
        for d in lm.config.dgps
        for T in lm.config.sample_sizes
        for m in lm.config.models
        if (d.label, m.label, T) not in critical_values.cells
    ]
    if missing:
        raise KeyError(f"no critical value for cells {missing}")
    return _tabulate(lm, lambda key, col: col > critical_values.cells[key], "size_corrected")


def _require_null(config: ExperimentConfig) -> None:
    offending = [d.label for d in config.dgps if d.error.gamma1 != 0.0]
    if offending:
        raise ValueError(f"size experiments need gamma1 = 0; got ARCH errors for {offending}")


def run_size(config: ExperimentConfig, workers: int = 1) -> RejectionTable:
    """Empirical size under homoskedastic errors."""
    _require_null(config)
    return rejection_table(simulate_lm_statistics(config, workers=workers))


def run_power(config: ExperimentConfig, gamma1: float, workers: int = 1) -> RejectionTable:
    """Nominal power with ARCH(1) errors ``gamma0 = 1``, ``gamma1`` as given."""
    if gamma1 == 0.0:
        return run_size(config.with_gamma1(0.0), workers=workers)
    if gamma1 < 0.0:
        raise ValueError("gamma1 must be non-negative")
    return rejection_table(simulate_lm_statistics(config, gamma1=gamma1, workers=workers))


def empirical_critical_values(config: ExperimentConfig, workers: int = 1) -> CriticalValueTable:
    """Critical values from the same cells simulated with ``gamma1 = 0``."""
    _require_null(config)
    return critical_value_table(simulate_lm_statistics(config, workers=workers))


def run_size_corrected_power(
    config: ExperimentConfig,
    gamma1: float,
    critical_values: CriticalValueTable,
    workers: int = 1,
) -> RejectionTable:
    """Power against empirical null critical values."""
    lm = simulate_lm_statistics(config, gamma1=gamma1, workers=workers)
    return size_corrected_table(lm, critical_values)


def reference_tolerance(f_run: float, f_ref: float, n_run: int, n_ref: int = 10000) -> float:
    """
    Allowed gap between a rerun frequency and a published one:
    ``max(3 se_run + 3 se_ref, 0.015)``.
    """
    se_run = math.sqrt(f_run * (1.0 - f_run) / n_run)
    se_ref = math.sqrt(f_ref * (1.0 - f_ref) / n_ref)
    return max(3.0 * se_run + 3.0 * se_ref, 0.015)


def config_from_names(
    dgps: Iterable[str],
    models: Iterable[str],
    sample_sizes: Sequence[int],
    **kwargs,
) -> ExperimentConfig:
    """Build a config from preset names and model labels."""
    from .dgp import preset

    return ExperimentConfig(
        dgps=tuple(preset(n) for n in dgps),
        models=tuple(MeanModelSpec.from_label(m) for m in models),
        sample_sizes=tuple(sample_sizes),
        **kwargs,
    )
