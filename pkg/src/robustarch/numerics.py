"""
Numerical building blocks shared by the rest of the package.

Random streams, least squares, chi-square tail probabilities and the
interquartile range.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "RngStream",
    "OlsSolution",
    "standard_normal_draws",
    "uniform_draws",
    "ols",
    "chi2_survival",
    "interquartile_range",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """
    Identifier of an independent random stream.

    A stream is fully determined by ``(base_seed, stream_id)``. Streams with
    different ids are produced by ``numpy.random.SeedSequence`` spawn keys, so
    they are statistically independent and can be consumed in any order or
    on any worker.

    Parameters
    ----------
    base_seed : int
        Experiment-wide seed, reduced modulo 2**64.
    stream_id : int or tuple of int
        Replication index (or a tuple of indices, e.g. cell hash and
        replication).
    """

    base_seed: int
    stream_id: int | tuple[int, ...] = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "base_seed", int(self.base_seed) & _MASK64)
        sid = self.stream_id
        if isinstance(sid, (tuple, list)):
            sid = tuple(int(v) & _MASK64 for v in sid)
        else:
            sid = int(sid) & _MASK64
        object.__setattr__(self, "stream_id", sid)

    def generator(self) -> np.random.Generator:
        """Return a fresh generator positioned at the start of the stream."""
        key = self.stream_id if isinstance(self.stream_id, tuple) else (self.stream_id,)
        seq = np.random.SeedSequence(entropy=self.base_seed, spawn_key=key)
        return np.random.Generator(np.random.PCG64(seq))


def _as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def standard_normal_draws(rng: RngStream | np.random.Generator, n: int) -> np.ndarray:
    """
    Draw ``n`` i.i.d. N(0, 1) variates.

    An ``RngStream`` always restarts at the beginning of its stream; pass a
    ``numpy.random.Generator`` to continue consuming one.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return _as_generator(rng).standard_normal(int(n))


def uniform_draws(rng: RngStream | np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` i.i.d. U[0, 1) variates."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return _as_generator(rng).random(int(n))


@dataclass(frozen=True)
class OlsSolution:
    """Least-squares fit of ``y`` on a design matrix."""

    coefficients: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    r_squared: float
    rank_deficient: bool
    rank: int

    @property
    def ssr(self) -> float:
        return float(self.residuals @ self.residuals)


def ols(design: np.ndarray, y: np.ndarray) -> OlsSolution:
    """
    Ordinary least squares through the SVD.

    Singular values below ``eps * max(T, K) * s_max`` are treated as zero, in
    which case the minimum-norm solution is returned and ``rank_deficient`` is
    set.

    Parameters
    ----------
    design : ndarray, shape (T, K)
    y : ndarray, shape (T,)

    Returns
    -------
    OlsSolution
        ``r_squared`` is the centered coefficient of determination
        ``1 - SSR / SST`` (0 when ``SST`` is 0).
    """
    x = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or y.ndim != 1:
        raise ValueError("design must be 2-d and y 1-d")
    nobs, k = x.shape
    if y.shape[0] != nobs:
        raise ValueError(f"design has {nobs} rows but y has {y.shape[0]} entries")
    if nobs <= k:
        raise ValueError(f"need more observations than columns (T={nobs}, K={k})")

    coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    fitted = x @ coef
    resid = y - fitted
    centered = y - y.mean()
    sst = float(centered @ centered)
    ssr = float(resid @ resid)
    if sst > 0.0:
        r2 = min(max(1.0 - ssr / sst, 0.0), 1.0)
    else:
        r2 = 0.0
    return OlsSolution(
        coefficients=coef,
        fitted=fitted,
        residuals=resid,
        r_squared=r2,
        rank_deficient=bool(rank < k),
        rank=int(rank),
    )


def chi2_survival(x: float, df: int) -> float:
    """
    Upper tail ``P(X > x)`` of a chi-square distribution with ``df`` degrees
    of freedom, computed as the regularized upper incomplete gamma function
    ``Q(df / 2, x / 2)``.
    """
    if df < 1 or int(df) != df:
        raise ValueError(f"df must be a positive integer, got {df}")
    if not x >= 0.0:
        raise ValueError(f"x must be non-negative, got {x}")
    return float(special.gammaincc(0.5 * df, 0.5 * x))


def interquartile_range(x: np.ndarray) -> float:
    """
    ``Q3 - Q1`` with linear interpolation between order statistics.

    The quantile at probability ``p`` sits at 1-based position
    ``h = (n - 1) p + 1`` (Hyndman-Fan type 7).
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 4:
        raise ValueError(f"need at least 4 observations, got {x.size}")
    q1, q3 = np.quantile(x, [0.25, 0.75], method="linear")
    return float(max(q3 - q1, 0.0))
