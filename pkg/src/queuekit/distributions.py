"""Service-time laws: moments, samplers, and Poisson-mixture arrival counts.

Each law knows how to draw samples from a numpy ``Generator`` and how to
compute a_j = P(j Poisson(beta) arrivals during one service time).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from .errors import ValidationError


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValidationError("exponential rate must be positive")

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    @property
    def second_moment(self) -> float:
        return 2.0 / self.rate ** 2

    def sample(self, rng: np.random.Generator, size=None):
        return rng.exponential(1.0 / self.rate, size)

    def arrival_probs(self, beta: float, j_max: int) -> np.ndarray:
        p = self.rate / (beta + self.rate)
        return p * (1.0 - p) ** np.arange(j_max + 1)


@dataclass(frozen=True)
class Deterministic:
    value: float

    def __post_init__(self):
        if not self.value >= 0:
            raise ValidationError("deterministic time must be nonnegative")

    @property
    def mean(self) -> float:
        return float(self.value)

    @property
    def second_moment(self) -> float:
        return float(self.value) ** 2

    def sample(self, rng: np.random.Generator, size=None):
        if size is None:
            return float(self.value)
        return np.full(size, float(self.value))

    def arrival_probs(self, beta: float, j_max: int) -> np.ndarray:
        return stats.poisson.pmf(np.arange(j_max + 1), beta * self.value)


@dataclass(frozen=True)
class Erlang:
    k: int
    rate: float               # rate of each phase

    def __post_init__(self):
        if int(self.k) < 1 or not self.rate > 0:
            raise ValidationError("Erlang needs k >= 1 and a positive phase rate")

    @property
    def mean(self) -> float:
        return self.k / self.rate

    @property
    def second_moment(self) -> float:
        return self.k * (self.k + 1) / self.rate ** 2

    def sample(self, rng: np.random.Generator, size=None):
        return rng.gamma(self.k, 1.0 / self.rate, size)

    def arrival_probs(self, beta: float, j_max: int) -> np.ndarray:
        # arrivals before k phase completions: negative binomial
        return stats.nbinom.pmf(np.arange(j_max + 1), self.k, self.rate / (self.rate + beta))


@dataclass(frozen=True)
class DiscreteService:
    values: tuple
    probs: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.shape != p.shape or v.ndim != 1 or len(v) == 0:
            raise ValidationError("values and probs must be equal-length nonempty lists")
        if np.any(v < 0) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValidationError("discrete service table needs nonnegative values and probabilities summing to 1")
        object.__setattr__(self, "values", tuple(v))
        object.__setattr__(self, "probs", tuple(p))

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    @property
    def second_moment(self) -> float:
        return float(np.dot(np.square(self.values), self.probs))

    def sample(self, rng: np.random.Generator, size=None):
        return rng.choice(np.asarray(self.values), size=size, p=np.asarray(self.probs))

    def arrival_probs(self, beta: float, j_max: int) -> np.ndarray:
        j = np.arange(j_max + 1)[:, None]
        return stats.poisson.pmf(j, beta * np.asarray(self.values)[None, :]) @ np.asarray(self.probs)


@dataclass(frozen=True)
class TabulatedDensity:
    """Service density given on a grid, linearly interpolated and renormalized."""

    grid: tuple
    density: tuple
    _norm: float = field(default=1.0, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.grid, dtype=float)
        f = np.asarray(self.density, dtype=float)
        if t.shape != f.shape or len(t) < 2 or np.any(np.diff(t) <= 0) or t[0] < 0 or np.any(f < 0):
            raise ValidationError("tabulated density needs an increasing nonnegative grid and nonnegative values")
        object.__setattr__(self, "grid", tuple(t))
        object.__setattr__(self, "density", tuple(f))
        object.__setattr__(self, "_norm", float(integrate.trapezoid(f, t)))

    def pdf(self, t):
        return np.interp(t, self.grid, self.density, left=0.0, right=0.0) / self._norm

    def _moment(self, k: int) -> float:
        return sum(integrate.quad(lambda t: t ** k * self.pdf(t), a, b)[0]
                   for a, b in zip(self.grid[:-1], self.grid[1:]))

    @property
    def mean(self) -> float:
        return self._moment(1)

    @property
    def second_moment(self) -> float:
        return self._moment(2)

    def sample(self, rng: np.random.Generator, size=None):
        t = np.asarray(self.grid)
        f = np.asarray(self.density)
        seg = 0.5 * (f[1:] + f[:-1]) * np.diff(t)
        cdf = np.concatenate([[0.0], np.cumsum(seg)]) / seg.sum()
        u = rng.random(size)
        # inverse of the piecewise-linear-density CDF, approximated per segment
        return np.interp(u, cdf, t)

    def arrival_probs(self, beta: float, j_max: int) -> np.ndarray:
        out = np.empty(j_max + 1)
        for j in range(j_max + 1):
            def integrand(t, j=j):
                return stats.poisson.pmf(j, beta * t) * self.pdf(t)
            out[j] = sum(integrate.quad(integrand, a, b, limit=200)[0]
                         for a, b in zip(self.grid[:-1], self.grid[1:]))
        return out


@dataclass(frozen=True)
class Gamma:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValidationError("gamma shape and scale must be positive")

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def second_moment(self) -> float:
        return self.shape * (self.shape + 1) * self.scale ** 2

    def sample(self, rng: np.random.Generator, size=None):
        return rng.gamma(self.shape, self.scale, size)

    def arrival_probs(self, beta: float, j_max: int) -> np.ndarray:
        return stats.nbinom.pmf(np.arange(j_max + 1), self.shape, 1.0 / (1.0 + beta * self.scale))


def two_moment_law(m1: float, m2: float):
    """Deterministic when the variance vanishes, else the gamma law with these two moments."""
    if m1 < 0 or m2 < m1 * m1 * (1 - 1e-12):
        raise ValidationError("moments need m1 >= 0 and m2 >= m1^2")
    var = m2 - m1 * m1
    if m1 == 0 or var <= 1e-12 * m1 * m1:
        return Deterministic(m1)
    return Gamma(m1 * m1 / var, var / m1)


SERVICE_KINDS = {
    "exponential": Exponential,
    "deterministic": Deterministic,
    "erlang": Erlang,
    "discrete": DiscreteService,
    "tabulated": TabulatedDensity,
    "gamma": Gamma,
}


def service_from_dict(d: dict):
    """Build a service law from ``{"dist": name, ...params}``."""
    d = dict(d)
    name = d.pop("dist", None)
    if name not in SERVICE_KINDS:
        raise ValidationError(f"unknown service descriptor {name!r}; expected one of {sorted(SERVICE_KINDS)}")
    return SERVICE_KINDS[name](**d)
