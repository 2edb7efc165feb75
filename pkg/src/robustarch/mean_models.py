"""
Conditional-mean regressions whose residuals feed the ARCH test.

Three families are provided:

* ``AR(p)``: linear autoregression with intercept, fitted by OLS.
* ``Tk(q)``: OLS on every monomial of ``y[t-1], ..., y[t-q]`` up to degree
  ``k`` (a k-th order Taylor expansion of an unknown mean function).
* ``NP_pl(s)`` / ``NP_cv(s)``: Nadaraya-Watson regression on ``s`` lags with a
  product Gaussian kernel and either the robust rule-of-thumb bandwidth or a
  leave-one-out cross-validated bandwidth.

All fits drop the first ``lags`` observations, so a model with ``lags``
lags on a series of length ``T`` returns ``T - lags`` residuals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from math import comb
import re
from typing import Literal, Sequence

import numpy as np

from .numerics import interquartile_range, ols

__all__ = [
    "DEFAULT_CV_GRID",
    "MeanModelSpec",
    "BandwidthSelection",
    "RegressionFit",
    "InsufficientDataError",
    "DegenerateBandwidthError",
    "as_series",
    "lag_matrix",
    "fit_ar",
    "taylor_design",
    "taylor_terms",
    "fit_taylor",
    "gaussian_kernel",
    "plugin_bandwidth",
    "cv_bandwidth",
    "cv_objective",
    "nw_fit",
    "fit_mean_model",
]

DEFAULT_CV_GRID: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0)

_SQRT_2PI = np.sqrt(2.0 * np.pi)


class InsufficientDataError(ValueError):
    """The series is too short for the requested regression."""


class DegenerateBandwidthError(ValueError):
    """A regressor column has zero spread, so its bandwidth would be zero."""

    def __init__(self, dimension: int) -> None:
        self.dimension = dimension
        super().__init__(
            f"regressor column {dimension} (lag {dimension + 1}) has zero spread; "
            "plug-in bandwidth would be 0"
        )


@dataclass(frozen=True)
class MeanModelSpec:
    """
    Which conditional-mean regression to fit.

    Use the constructors :meth:`ar`, :meth:`taylor` and :meth:`nw` rather than
    building instances directly. ``q > k`` is allowed for Taylor models.
    """

    kind: Literal["ar", "taylor", "nw"]
    lags: int
    order: int | None = None
    bandwidth_rule: Literal["plugin", "cv"] | None = None
    cv_grid: tuple[float, ...] = DEFAULT_CV_GRID

    def __post_init__(self) -> None:
        if self.kind not in ("ar", "taylor", "nw"):
            raise ValueError(f"unknown mean model kind {self.kind!r}")
        if int(self.lags) != self.lags or self.lags < 1:
            raise ValueError(f"lags must be a positive integer, got {self.lags}")
        if self.kind == "taylor":
            if self.order is None or int(self.order) != self.order or self.order < 2:
                raise ValueError(f"Taylor order must be an integer >= 2, got {self.order}")
        if self.kind == "nw":
            if self.bandwidth_rule not in ("plugin", "cv"):
                raise ValueError(
                    f"bandwidth_rule must be 'plugin' or 'cv', got {self.bandwidth_rule!r}"
                )
            if len(self.cv_grid) == 0 or any(m <= 0 for m in self.cv_grid):
                raise ValueError("cv_grid must be a non-empty set of positive multipliers")
            object.__setattr__(self, "cv_grid", tuple(sorted(float(m) for m in self.cv_grid)))

    @classmethod
    def ar(cls, lags: int) -> MeanModelSpec:
        return cls("ar", lags)

    @classmethod
    def taylor(cls, lags: int, order: int) -> MeanModelSpec:
        return cls("taylor", lags, order=order)

    @classmethod
    def nw(
        cls,
        lags: int,
        rule: Literal["plugin", "cv"] = "plugin",
        grid: Sequence[float] = DEFAULT_CV_GRID,
    ) -> MeanModelSpec:
        return cls("nw", lags, bandwidth_rule=rule, cv_grid=tuple(grid))

    @property
    def label(self) -> str:
        if self.kind == "ar":
            return f"AR({self.lags})"
        if self.kind == "taylor":
            return f"T{self.order}({self.lags})"
        suffix = "pl" if self.bandwidth_rule == "plugin" else "cv"
        return f"NP_{suffix}({self.lags})"

    @property
    def n_params(self) -> int:
        if self.kind == "ar":
            return self.lags + 1
        if self.kind == "taylor":
            return comb(self.lags + self.order, self.order)
        return 0

    @classmethod
    def from_label(cls, label: str) -> MeanModelSpec:
        """
        Parse labels such as ``AR(2)``, ``T3(2)``, ``NP_pl(2)`` or ``NP_cv(1)``.

        ``NPpl(2)`` and ``NPcv(2)`` are also accepted.
        """
        text = label.strip().replace(" ", "")
        m = re.fullmatch(r"(?i)(AR|T(\d+)|NP_?(pl|cv))\((\d+)\)", text)
        if m is None:
            raise ValueError(f"cannot parse mean model label {label!r}")
        lags = int(m.group(4))
        head = m.group(1).upper()
        if head == "AR":
            return cls.ar(lags)
        if m.group(2) is not None:
            return cls.taylor(lags, int(m.group(2)))
        return cls.nw(lags, "plugin" if m.group(3).lower() == "pl" else "cv")

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class BandwidthSelection:
    """Per-dimension Gaussian kernel bandwidths."""

    per_dimension_h: np.ndarray
    rule: Literal["plugin", "cv", "fixed"]
    cv_objective_value: float | None = None
    multiplier: float | None = None
    cv_values: np.ndarray | None = None

    def __post_init__(self) -> None:
        h = np.atleast_1d(np.asarray(self.per_dimension_h, dtype=float))
        if h.ndim != 1 or not np.all(np.isfinite(h)) or np.any(h <= 0):
            raise ValueError(f"bandwidths must be finite and positive, got {h}")
        object.__setattr__(self, "per_dimension_h", h)

    @classmethod
    def fixed(cls, h: float | Sequence[float], s: int = 1) -> BandwidthSelection:
        """User-supplied bandwidth, broadcast to ``s`` dimensions if scalar."""
        arr = np.asarray(h, dtype=float)
        if arr.ndim == 0:
            arr = np.full(s, float(arr))
        return cls(arr, "fixed")


@dataclass(frozen=True)
class RegressionFit:
    """
    Result of a conditional-mean regression.

    ``effective_start`` is the 1-based index of the first observation that
    has all lags available, so ``fitted`` and ``residuals`` cover
    ``y[effective_start - 1:]``.
    """

    model: MeanModelSpec
    fitted: np.ndarray
    residuals: np.ndarray
    effective_start: int
    n_params: int
    rank_deficient: bool = False
    coefficients: np.ndarray | None = None
    bandwidth: BandwidthSelection | None = None
    r_squared: float | None = field(default=None)

    @property
    def ssr(self) -> float:
        return float(self.residuals @ self.residuals)

    def summary(self) -> dict:
        out: dict = {
            "model": self.model.label,
            "n_obs": int(self.residuals.size),
            "effective_start": self.effective_start,
            "n_params": self.n_params,
            "residual_variance": float(self.residuals.var()),
            "rank_deficient": self.rank_deficient,
        }
        if self.coefficients is not None:
            out["coefficients"] = [float(c) for c in self.coefficients]
        if self.r_squared is not None:
            out["r_squared"] = float(self.r_squared)
        if self.bandwidth is not None:
            out["bandwidth"] = [float(h) for h in self.bandwidth.per_dimension_h]
            out["bandwidth_rule"] = self.bandwidth.rule
            if self.bandwidth.multiplier is not None:
                out["cv_multiplier"] = self.bandwidth.multiplier
        return out


def as_series(y) -> np.ndarray:
    """Coerce input to a finite 1-d float array."""
    arr = np.asarray(y, dtype=float)
    if arr.ndim != 1:
        arr = arr.ravel()
    if not np.all(np.isfinite(arr)):
        raise ValueError("series contains non-finite values")
    return arr


def lag_matrix(y, lags: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Lagged regressors and aligned targets.

    Row ``i`` of the design holds ``(y[t-1], ..., y[t-lags])`` for
    ``t = lags + i`` (0-based), and ``targets[i] = y[t]``. No intercept.
    """
    y = as_series(y)
    if lags < 1:
        raise ValueError(f"lags must be >= 1, got {lags}")
    n = y.size
    if n <= lags:
        raise InsufficientDataError(f"series of length {n} is too short for {lags} lags")
    design = np.column_stack([y[lags - j : n - j] for j in range(1, lags + 1)])
    return design, y[lags:].copy()


def _linear_fit(model: MeanModelSpec, design: np.ndarray, targets: np.ndarray) -> RegressionFit:
    sol = ols(design, targets)
    return RegressionFit(
        model=model,
        fitted=sol.fitted,
        residuals=sol.residuals,
        effective_start=model.lags + 1,
        n_params=design.shape[1],
        rank_deficient=sol.rank_deficient,
        coefficients=sol.coefficients,
        r_squared=sol.r_squared,
    )


def fit_ar(y, lags: int) -> RegressionFit:
    """OLS of ``y[t]`` on an intercept and ``lags`` own lags."""
    y = as_series(y)
    if y.size <= lags + 1:
        raise InsufficientDataError(f"AR({lags}) needs more than {lags + 1} observations")
    x, target = lag_matrix(y, lags)
    if target.size <= lags + 1:
        raise InsufficientDataError(
            f"AR({lags}) leaves {target.size} usable rows for {lags + 1} parameters"
        )
    design = np.column_stack([np.ones(target.size), x])
    return _linear_fit(MeanModelSpec.ar(lags), design, target)


def taylor_terms(lags: int, order: int) -> list[tuple[int, ...]]:
    """
    Lag multisets for each design column, intercept first.

    ``()`` is the intercept, ``(1,)`` is ``y[t-1]``, ``(1, 2)`` is
    ``y[t-1] * y[t-2]``, and so on, ordered by degree then lexicographically.
    """
    terms: list[tuple[int, ...]] = [()]
    for degree in range(1, order + 1):
        terms.extend(combinations_with_replacement(range(1, lags + 1), degree))
    return terms


def taylor_design(y, lags: int, order: int) -> np.ndarray:
    """
    Polynomial design on ``lags`` lags of ``y`` up to total degree ``order``.

    Has ``comb(lags + order, order)`` columns. ``order=1`` gives the AR
    design.
    """
    if lags < 1:
        raise ValueError(f"lags must be >= 1, got {lags}")
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    x, _ = lag_matrix(y, lags)
    terms = taylor_terms(lags, order)
    n = x.shape[0]
    if len(terms) >= n:
        raise InsufficientDataError(
            f"{len(terms)} polynomial columns need more than {n} usable observations"
        )
    cols = np.empty((n, len(terms)))
    for i, term in enumerate(terms):
        col = np.ones(n)
        for j in term:
            col = col * x[:, j - 1]
        cols[:, i] = col
    return cols


def fit_taylor(y, lags: int, order: int) -> RegressionFit:
    """
    OLS on the polynomial design.

    Collinear designs yield the minimum-norm fit with ``rank_deficient``
    set instead of raising.
    """
    y = as_series(y)
    design = taylor_design(y, lags, order)
    return _linear_fit(MeanModelSpec.taylor(lags, order), design, y[lags:])


def gaussian_kernel(u):
    """Standard normal density."""
    u = np.asarray(u, dtype=float)
    return np.exp(-0.5 * u * u) / _SQRT_2PI


def plugin_bandwidth(regressor_data) -> BandwidthSelection:
    """
    Robust rule-of-thumb bandwidth for each regressor column.

    ``h_j = 1.06 * min(sd_j, IQR_j / 1.34) * T ** (-1 / (s + 4))`` where
    ``sd_j`` is the sample standard deviation (ddof=1) of column ``j`` and
    ``T`` the number of rows.
    """
    x = np.asarray(regressor_data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    nobs, s = x.shape
    if nobs < 8:
        raise InsufficientDataError(f"plug-in bandwidth needs at least 8 rows, got {nobs}")
    rate = nobs ** (-1.0 / (s + 4))
    h = np.empty(s)
    for j in range(s):
        sd = float(np.std(x[:, j], ddof=1))
        spread = min(sd, interquartile_range(x[:, j]) / 1.34)
        if not spread > 0.0:
            raise DegenerateBandwidthError(j)
        h[j] = 1.06 * spread * rate
    return BandwidthSelection(h, "plugin")


def _sq_diffs(x: np.ndarray) -> list[np.ndarray]:
    return [np.subtract.outer(x[:, j], x[:, j]) ** 2 for j in range(x.shape[1])]


def _log_weights(sq: list[np.ndarray], h: np.ndarray) -> np.ndarray:
    # divide twice so zero distances stay 0 even when h**2 underflows
    out = (sq[0] / h[0]) / h[0]
    for j in range(1, len(sq)):
        out += (sq[j] / h[j]) / h[j]
    out *= -0.5
    return out


def _loo_predictions(sq: list[np.ndarray], targets: np.ndarray, h: np.ndarray) -> np.ndarray:
    logw = _log_weights(sq, h)
    np.fill_diagonal(logw, -np.inf)
    # rescale each row by its largest weight; the ratio is unchanged
    peak = logw.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(peak)):
        # some observation has no neighbour with representable weight
        return np.full(targets.shape, np.nan)
    w = np.exp(logw - peak)
    return (w @ targets) / w.sum(axis=1)


def cv_objective(y, lags: int, h) -> float:
    """
    Leave-one-out criterion ``mean((y_i - zhat_{-i})**2)`` for bandwidth ``h``.

    ``h`` may be a scalar or a length-``lags`` vector.
    """
    x, target = lag_matrix(y, lags)
    h = np.broadcast_to(np.asarray(h, dtype=float), (lags,))
    pred = _loo_predictions(_sq_diffs(x), target, h)
    return float(np.mean((target - pred) ** 2))


def cv_bandwidth(
    y,
    lags: int,
    grid: Sequence[float] = DEFAULT_CV_GRID,
    reference: Sequence[float] | None = None,
) -> BandwidthSelection:
    """
    Cross-validated bandwidth over a multiplier grid.

    Each candidate is ``multiplier * reference`` (all dimensions scaled
    jointly). ``reference`` defaults to the plug-in bandwidth of the lag
    matrix. The candidate with the smallest leave-one-out squared error wins;
    ties go to the smallest multiplier.
    """
    y = as_series(y)
    if len(grid) == 0:
        raise ValueError("grid must be non-empty")
    if y.size <= lags + 1:
        raise InsufficientDataError(f"need more than {lags + 1} observations")
    x, target = lag_matrix(y, lags)
    return _cv_select(x, target, grid, reference)


def _cv_select(
    x: np.ndarray,
    target: np.ndarray,
    grid: Sequence[float],
    reference: Sequence[float] | None,
    sq: list[np.ndarray] | None = None,
) -> BandwidthSelection:
    if reference is None:
        base = plugin_bandwidth(x).per_dimension_h
    else:
        base = np.broadcast_to(np.asarray(reference, dtype=float), (x.shape[1],)).copy()
        if np.any(base <= 0):
            raise ValueError("reference bandwidths must be positive")
    if sq is None:
        sq = _sq_diffs(x)
    mults = np.array(sorted(float(m) for m in grid))
    if np.any(mults <= 0):
        raise ValueError("grid multipliers must be positive")
    values = np.full(mults.size, np.inf)
    for i, m in enumerate(mults):
        pred = _loo_predictions(sq, target, m * base)
        if np.all(np.isfinite(pred)):
            values[i] = float(np.mean((target - pred) ** 2))
    if not np.any(np.isfinite(values)):
        raise ValueError("leave-one-out predictions are undefined for every grid candidate")
    best = float(values.min())
    scale = float(np.max(np.abs(target)))
    tol = max(1e-12 * best, (16.0 * np.finfo(float).eps * scale) ** 2)
    idx = int(np.flatnonzero(values <= best + tol)[0])
    return BandwidthSelection(
        mults[idx] * base,
        "cv",
        cv_objective_value=float(values[idx]),
        multiplier=float(mults[idx]),
        cv_values=values,
    )


def _nw_in_sample(sq: list[np.ndarray], target: np.ndarray, h: np.ndarray) -> np.ndarray:
    w = np.exp(_log_weights(sq, h))
    den = w.sum(axis=1)
    # the own-observation weight is exp(0) = 1, so den >= 1
    assert np.all(den >= 1.0), "Nadaraya-Watson denominator underflow"
    return (w @ target) / den


def nw_fit(y, lags: int, bw: BandwidthSelection) -> RegressionFit:
    """
    In-sample Nadaraya-Watson fit with a product Gaussian kernel.

    The prediction at ``t`` averages every usable target, ``t`` itself
    included, with weights ``prod_j K((y[u-j] - y[t-j]) / h_j)``.
    """
    y = as_series(y)
    if y.size <= lags + 1:
        raise InsufficientDataError(f"need more than {lags + 1} observations")
    h = np.asarray(bw.per_dimension_h, dtype=float)
    if h.size == 1 and lags > 1:
        h = np.full(lags, float(h[0]))
    if h.size != lags:
        raise ValueError(f"got {h.size} bandwidths for {lags} lags")
    x, target = lag_matrix(y, lags)
    return _nw_from_parts(x, target, bw, h, _sq_diffs(x), lags)


def _nw_from_parts(x, target, bw, h, sq, lags) -> RegressionFit:
    fitted = _nw_in_sample(sq, target, h)
    rule = bw.rule if bw.rule in ("plugin", "cv") else "plugin"
    return RegressionFit(
        model=MeanModelSpec.nw(lags, rule),
        fitted=fitted,
        residuals=target - fitted,
        effective_start=lags + 1,
        n_params=0,
        bandwidth=bw,
    )


def fit_mean_model(y, model: MeanModelSpec) -> RegressionFit:
    """Fit any :class:`MeanModelSpec` to ``y``."""
    if model.kind == "ar":
        return fit_ar(y, model.lags)
    if model.kind == "taylor":
        return fit_taylor(y, model.lags, model.order)
    y = as_series(y)
    if y.size <= model.lags + 1:
        raise InsufficientDataError(f"need more than {model.lags + 1} observations")
    x, target = lag_matrix(y, model.lags)
    sq = _sq_diffs(x)
    if model.bandwidth_rule == "plugin":
        bw = plugin_bandwidth(x)
    else:
        bw = _cv_select(x, target, model.cv_grid, None, sq=sq)
    fit = _nw_from_parts(x, target, bw, bw.per_dimension_h, sq, model.lags)
    if fit.model != model:
        fit = RegressionFit(
            model=model,
            fitted=fit.fitted,
            residuals=fit.residuals,
            effective_start=fit.effective_start,
            n_params=0,
            bandwidth=bw,
        )
    return fit
