"""
Simulation of the nonlinear autoregressions used in the size and power
experiments.

Every process has the form ``y[t] = f(y[t-1], y[t-2], u[t-1], u[t-2], s[t]) + u[t]``
with ARCH(1) shocks ``u[t] = sigma[t] * eps[t]``,
``sigma[t]**2 = gamma0 + gamma1 * u[t-1]**2``. Paths start from zero and the
first ``BURN_IN`` draws are discarded.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
import math
import os
import re
from typing import Literal, Union

import numpy as np

from .numerics import RngStream, _as_generator

__all__ = [
    "BURN_IN",
    "ArchErrorSpec",
    "AR",
    "TAR",
    "STAR",
    "MarkovSwitching",
    "Bilinear",
    "DgpSpec",
    "SimulatedPath",
    "PRESET_NAMES",
    "preset",
    "simulate",
    "simulate_path",
    "markov_state_path",
    "write_path_csv",
]

BURN_IN = 100


@dataclass(frozen=True)
class ArchErrorSpec:
    """ARCH(1) shock variance ``gamma0 + gamma1 * u[t-1]**2``."""

    gamma0: float = 1.0
    gamma1: float = 0.0

    def __post_init__(self) -> None:
        if not self.gamma0 > 0:
            raise ValueError(f"gamma0 must be positive, got {self.gamma0}")
        if not 0.0 <= self.gamma1 < 1.0:
            raise ValueError(f"gamma1 must lie in [0, 1) for a stationary ARCH(1), got {self.gamma1}")

    @property
    def unconditional_variance(self) -> float:
        return self.gamma0 / (1.0 - self.gamma1)


@dataclass(frozen=True)
class AR:
    """``beta1 * y[t-1] + beta2 * y[t-2]``"""

    beta1: float
    beta2: float = 0.0

    def mean(self, y1, y2, u1, u2, s):
        return self.beta1 * y1 + self.beta2 * y2


@dataclass(frozen=True)
class TAR:
    """
    Two-regime threshold autoregression.

    ``upper`` applies when the threshold variable is ``>= 0``, ``lower``
    otherwise. The threshold variable is ``y[t-1]`` (``"level"``) or
    ``y[t-1] - y[t-2]`` (``"difference"``, the momentum variant).
    """

    upper: tuple[float, float]
    lower: tuple[float, float]
    threshold: Literal["level", "difference"] = "level"

    def __post_init__(self) -> None:
        if self.threshold not in ("level", "difference"):
            raise ValueError(f"threshold must be 'level' or 'difference', got {self.threshold!r}")

    def mean(self, y1, y2, u1, u2, s):
        z = y1 if self.threshold == "level" else y1 - y2
        a, b = self.upper if z >= 0.0 else self.lower
        return a * y1 + b * y2


def _logistic(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class STAR:
    """
    Smooth transition autoregression.

    ``linear . (y[t-1], y[t-2]) + deviation . (y[t-1], y[t-2]) * G(y[t-1])``
    with ``G(y) = 1 - exp(-gamma * y**2)`` (exponential) or
    ``G(y) = 1 / (1 + exp(-gamma * y))`` (logistic).
    """

    linear: tuple[float, float]
    deviation: tuple[float, float]
    transition: Literal["exponential", "logistic"] = "exponential"
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if self.transition not in ("exponential", "logistic"):
            raise ValueError(f"unknown transition {self.transition!r}")

    def weight(self, y1: float) -> float:
        if self.transition == "exponential":
            return 1.0 - math.exp(-self.gamma * y1 * y1)
        return _logistic(self.gamma * y1)

    def mean(self, y1, y2, u1, u2, s):
        a, b = self.linear
        c, d = self.deviation
        return a * y1 + b * y2 + (c * y1 + d * y2) * self.weight(y1)


@dataclass(frozen=True)
class MarkovSwitching:
    """
    AR(2) whose coefficients follow a latent two-state Markov chain.

    ``regime1`` applies when ``s[t] = 1``; ``p00`` and ``p11`` are the
    probabilities of staying in states 0 and 1.
    """

    regime1: tuple[float, float]
    regime0: tuple[float, float]
    p00: float
    p11: float

    def __post_init__(self) -> None:
        _check_prob(self.p00, "p00")
        _check_prob(self.p11, "p11")

    def mean(self, y1, y2, u1, u2, s):
        a, b = self.regime1 if s else self.regime0
        return a * y1 + b * y2


@dataclass(frozen=True)
class Bilinear:
    """``b1 * y[t-1] * u[t-1] + b2 * y[t-2] * u[t-2]``"""

    b1: float
    b2: float

    def mean(self, y1, y2, u1, u2, s):
        return self.b1 * y1 * u1 + self.b2 * y2 * u2


Family = Union[AR, TAR, STAR, MarkovSwitching, Bilinear]


@dataclass(frozen=True)
class DgpSpec:
    """A conditional-mean family paired with its shock process."""

    family: Family
    error: ArchErrorSpec = field(default_factory=ArchErrorSpec)
    name: str | None = None

    def with_error(self, error: ArchErrorSpec) -> DgpSpec:
        return replace(self, error=error)

    @property
    def label(self) -> str:
        return f"DGP{self.name}" if self.name else type(self.family).__name__


def _check_prob(p: float, name: str) -> None:
    if not 0.0 < p < 1.0:
        raise ValueError(f"{name} must lie strictly between 0 and 1, got {p}")


_PRESETS: dict[str, Family] = {
    "1-1": AR(0.2),
    "1-2": AR(0.7),
    "1-3": AR(0.7, -0.2),
    "1-4": AR(0.7, -0.5),
    "2-1": TAR((0.7, -0.2), (0.1, -0.2), "level"),
    "2-2": TAR((0.7, -0.2), (-0.5, -0.2), "level"),
    "2-3": TAR((0.7, 0.2), (0.7, -0.7), "level"),
    "2-4": TAR((0.7, -0.2), (0.1, -0.2), "difference"),
    "2-5": TAR((0.7, -0.2), (-0.5, -0.2), "difference"),
    "2-6": TAR((0.7, 0.2), (0.7, -0.7), "difference"),
    "3-1": STAR((0.7, -0.2), (-0.5, -0.2), "exponential", 0.1),
    "3-2": STAR((0.7, -0.2), (-1.0, -0.2), "exponential", 0.1),
    "3-3": STAR((0.7, -0.2), (-1.0, -0.2), "exponential", 1.0),
    "3-4": STAR((0.7, -0.2), (-0.5, -0.2), "logistic", 0.1),
    "3-5": STAR((0.7, -0.2), (-1.0, -0.2), "logistic", 0.1),
    "3-6": STAR((0.7, -0.2), (-1.0, -0.2), "logistic", 1.0),
    "4-1": MarkovSwitching((0.7, -0.2), (0.3, -0.2), 0.7, 0.7),
    "4-2": MarkovSwitching((0.7, -0.2), (0.3, -0.2), 0.98, 0.98),
    "4-3": MarkovSwitching((0.7, 0.2), (0.3, -0.2), 0.98, 0.98),
    "4-4": Bilinear(0.1, 0.1),
    "4-5": Bilinear(0.3, 0.1),
    "4-6": Bilinear(0.1, -0.1),
}

PRESET_NAMES: tuple[str, ...] = tuple(_PRESETS)


def _normalize_name(name: str) -> str:
    m = re.fullmatch(r"(?i)\s*(?:dgp)?\s*(\d)\s*[-_.]\s*(\d)\s*", str(name))
    if m is None or f"{m.group(1)}-{m.group(2)}" not in _PRESETS:
        raise KeyError(f"unknown DGP preset {name!r}; expected one of {', '.join(PRESET_NAMES)}")
    return f"{m.group(1)}-{m.group(2)}"


def preset(name: str, error: ArchErrorSpec | None = None) -> DgpSpec:
    """
    Named process ``"1-1"`` ... ``"4-6"`` (a ``"DGP"`` prefix is accepted).

    Groups: 1 linear AR, 2 TAR (2-4..2-6 threshold on the first difference),
    3 STAR (3-1..3-3 exponential, 3-4..3-6 logistic), 4 Markov switching
    (4-1..4-3) and bilinear (4-4..4-6).
    """
    key = _normalize_name(name)
    return DgpSpec(_PRESETS[key], error if error is not None else ArchErrorSpec(), key)


def markov_state_path(p00: float, p11: float, n: int, rng) -> np.ndarray:
    """
    Two-state Markov chain of length ``n`` started from its stationary law.

    ``p00 = P(s[t+1] = 0 | s[t] = 0)`` and ``p11 = P(s[t+1] = 1 | s[t] = 1)``.
    """
    _check_prob(p00, "p00")
    _check_prob(p11, "p11")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    draws = _as_generator(rng).random(int(n)).tolist()
    pi1 = (1.0 - p00) / ((1.0 - p00) + (1.0 - p11))
    out = np.empty(n, dtype=np.int8)
    s = 1 if draws[0] < pi1 else 0
    out[0] = s
    for t in range(1, n):
        if s:
            s = 1 if draws[t] < p11 else 0
        else:
            s = 0 if draws[t] < p00 else 1
        out[t] = s
    return out


@dataclass(frozen=True)
class SimulatedPath:
    """Retained observations together with the shocks and regime path."""

    y: np.ndarray
    u: np.ndarray
    states: np.ndarray | None = None


def simulate_path(spec: DgpSpec, T: int, rng, burn_in: int = BURN_IN) -> SimulatedPath:
    """
    Simulate ``T + burn_in`` observations from zero initial conditions and
    keep the last ``T``.

    Normal innovations are drawn first; Markov-switching processes then
    draw ``T + burn_in`` uniforms for the regime chain from the same stream.
    """
    if T < 20:
        raise ValueError(f"T must be at least 20, got {T}")
    err = spec.error
    if not 0.0 <= err.gamma1 < 1.0:
        raise ValueError("non-stationary ARCH error specification")
    gen = _as_generator(rng)
    n = int(T) + int(burn_in)
    eps = gen.standard_normal(n).tolist()
    family = spec.family
    states = None
    if isinstance(family, MarkovSwitching):
        states = markov_state_path(family.p00, family.p11, n, gen)
        s_list = states.tolist()
    else:
        s_list = None

    g0, g1 = float(err.gamma0), float(err.gamma1)
    sqrt_g0 = math.sqrt(g0)
    mean = family.mean
    y = [0.0] * n
    u = [0.0] * n
    y1 = y2 = u1 = u2 = 0.0
    for t in range(n):
        if g1 == 0.0:
            ut = sqrt_g0 * eps[t]
        else:
            ut = math.sqrt(g0 + g1 * u1 * u1) * eps[t]
        yt = mean(y1, y2, u1, u2, s_list[t] if s_list is not None else 0) + ut
        y[t] = yt
        u[t] = ut
        y2, y1 = y1, yt
        u2, u1 = u1, ut
    return SimulatedPath(
        y=np.asarray(y[burn_in:]),
        u=np.asarray(u[burn_in:]),
        states=None if states is None else states[burn_in:],
    )


def simulate(spec: DgpSpec, T: int, rng) -> np.ndarray:
    """Sample path of length ``T`` (after burn-in)."""
    return simulate_path(spec, T, rng).y


def write_path_csv(y, path: str | os.PathLike) -> None:
    """Write a two-column ``t,y`` CSV with ``t`` starting at 1."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "y"])
        for t, v in enumerate(np.asarray(y, dtype=float), start=1):
            writer.writerow([t, repr(float(v))])
