"""Probability generating functions: closed-form families and truncated series.

A ``PGFSeries`` is either a named family evaluated analytically or a finite
coefficient table p_0..p_K with a bound on the mass beyond K. Moments of a
table are reported together with a bound on the truncation error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, stats

from .errors import CertificationError, ConvergenceError, DomainError, ValidationError

MASS_TOL = 1e-12
DEFAULT_TOL = 1e-12
MAX_ITER = 1_000_000
DEFAULT_K = 256
MAX_K = 1 << 16
FFT_MIN_K = 512
OUTER_DROP = 1e-18
FAMILIES = ("poisson", "geometric", "bernoulli-quadratic", "degenerate", "compound", "table")


@dataclass(frozen=True)
class PGFSeries:
    family: str
    params: tuple = ()
    coeffs: np.ndarray | None = field(default=None, compare=False)
    tail_mass: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown PGF family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "table":
            c = np.asarray(self.coeffs, dtype=float)
            if c.ndim != 1 or len(c) == 0 or np.any(c < 0) or not np.all(np.isfinite(c)):
                raise ValidationError("table coefficients must be a nonempty nonnegative vector")
            if self.tail_mass < 0:
                raise ValidationError("tail_mass must be nonnegative")
            total = c.sum() + self.tail_mass
            if abs(total - 1.0) > MASS_TOL:
                raise ValidationError(f"coefficients plus tail mass sum to {total!r}, not 1")
            c = c.copy()
            c.setflags(write=False)
            object.__setattr__(self, "coeffs", c)

    # constructors

    @classmethod
    def poisson(cls, mu: float) -> "PGFSeries":
        if not mu >= 0:
            raise ValidationError("poisson mean must be nonnegative")
        return cls("poisson", (float(mu),))

    @classmethod
    def geometric(cls, p: float) -> "PGFSeries":
        """p_k = p (1-p)^k, k >= 0."""
        if not 0 < p <= 1:
            raise ValidationError("geometric p must lie in (0, 1]")
        return cls("geometric", (float(p),))

    @classmethod
    def bernoulli_quadratic(cls, a0: float, a2: float) -> "PGFSeries":
        """g(s) = a0 + (1 - a0 - a2) s + a2 s^2."""
        if a0 < 0 or a2 < 0 or a0 + a2 > 1 + MASS_TOL:
            raise ValidationError("bernoulli-quadratic needs a0, a2 >= 0 and a0 + a2 <= 1")
        return cls("bernoulli-quadratic", (float(a0), float(a2)))

    @classmethod
    def degenerate(cls, k: int = 1) -> "PGFSeries":
        if int(k) != k or k < 0:
            raise ValidationError("degenerate point must be a nonnegative integer")
        return cls("degenerate", (int(k),))

    @classmethod
    def compound(cls, outer: "PGFSeries", inner: "PGFSeries") -> "PGFSeries":
        """outer(inner(s)): a random sum of inner-distributed terms."""
        return cls("compound", (outer, inner))

    @classmethod
    def table(cls, coeffs, tail_mass: float = 0.0) -> "PGFSeries":
        return cls("table", (), np.asarray(coeffs, dtype=float), float(tail_mass))

    # analytic evaluation

    def evaluate(self, s):
        s = np.asarray(s, dtype=float)
        f, p = self.family, self.params
        if f == "poisson":
            return np.exp(p[0] * (s - 1))
        if f == "geometric":
            return p[0] / (1 - (1 - p[0]) * s)
        if f == "bernoulli-quadratic":
            a0, a2 = p
            return a0 + (1 - a0 - a2) * s + a2 * s * s
        if f == "degenerate":
            return s ** p[0]
        if f == "compound":
            return p[0].evaluate(p[1].evaluate(s))
        return np.polynomial.polynomial.polyval(s, self.coeffs)

    def derivative(self, s, order: int = 1):
        """G^(order)(s) for order 1 or 2."""
        if order not in (1, 2):
            raise ValidationError("only first and second derivatives are available")
        s = np.asarray(s, dtype=float)
        f, p = self.family, self.params
        if f == "poisson":
            return p[0] ** order * np.exp(p[0] * (s - 1))
        if f == "geometric":
            q = 1 - p[0]
            return math.factorial(order) * p[0] * q ** order / (1 - q * s) ** (order + 1)
        if f == "bernoulli-quadratic":
            a0, a2 = p
            return (1 - a0 - a2) + 2 * a2 * s if order == 1 else np.full_like(s, 2 * a2)
        if f == "degenerate":
            k = p[0]
            if order == 1:
                return k * s ** max(k - 1, 0) if k else np.zeros_like(s)
            return k * (k - 1) * s ** max(k - 2, 0) if k > 1 else np.zeros_like(s)
        if f == "compound":
            A, B = p
            b = B.evaluate(s)
            b1 = B.derivative(s, 1)
            if order == 1:
                return A.derivative(b, 1) * b1
            return A.derivative(b, 2) * b1 ** 2 + A.derivative(b, 1) * B.derivative(s, 2)
        c = np.polynomial.polynomial.polyder(self.coeffs, order)
        return np.polynomial.polynomial.polyval(s, c)

    @property
    def is_closed_form(self) -> bool:
        return self.family != "table"

    def coefficients(self, K: int = DEFAULT_K) -> tuple[np.ndarray, float]:
        """(p_0..p_K, mass beyond K)."""
        k = np.arange(K + 1)
        f, p = self.family, self.params
        if f == "poisson":
            c = stats.poisson.pmf(k, p[0])
            return c, float(stats.poisson.sf(K, p[0]))
        if f == "geometric":
            c = p[0] * (1 - p[0]) ** k
            return c, float((1 - p[0]) ** (K + 1))
        if f == "bernoulli-quadratic":
            c = np.zeros(K + 1)
            full = [p[0], 1 - p[0] - p[1], p[1]]
            c[: min(3, K + 1)] = full[: K + 1]
            return c, float(sum(full[K + 1:]))
        if f == "degenerate":
            c = np.zeros(K + 1)
            if p[0] <= K:
                c[p[0]] = 1.0
                return c, 0.0
            return c, 1.0
        if f == "compound":
            series = _compose_coefficients(p[0], p[1], K)
            return series, max(0.0, 1.0 - float(series.sum()))
        c = np.zeros(K + 1)
        n = min(K + 1, len(self.coeffs))
        c[:n] = self.coeffs[:n]
        return c, float(self.tail_mass + self.coeffs[n:].sum())

    def sample(self, rng: np.random.Generator, size=None):
        f, p = self.family, self.params
        if f == "poisson":
            return rng.poisson(p[0], size)
        if f == "geometric":
            return rng.geometric(p[0], size) - 1
        if f == "bernoulli-quadratic":
            return rng.choice(3, size=size, p=[p[0], 1 - p[0] - p[1], p[1]])
        if f == "degenerate":
            return np.full(size, p[0], dtype=np.int64) if size is not None else p[0]
        if f == "compound":
            n = np.atleast_1d(p[0].sample(rng, size))
            out = np.array([int(np.sum(p[1].sample(rng, int(k)))) for k in n.ravel()])
            return out.reshape(n.shape) if size is not None else int(out[0])
        if self.tail_mass > 0:
            raise DomainError("cannot sample a table with uncertified tail mass")
        c = np.asarray(self.coeffs)
        return rng.choice(len(c), size=size, p=c / c.sum())


@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float
    mean_error: float = 0.0           # bound on |true - reported| from truncation
    variance_error: float = 0.0


def _geometric_tail_bounds(c: np.ndarray, tail_mass: float) -> tuple[float, float]:
    """Bounds on sum_{k>K} k p_k and sum_{k>K} k(k-1) p_k.

    The tail beyond K is dominated by p_K r^j with r the largest ratio over
    the trailing coefficients; without a usable ratio nothing is certified.
    """
    if tail_mass == 0.0:
        return 0.0, 0.0
    K = len(c) - 1
    tailc = c[-8:]
    if K < 8 or np.any(tailc[:-1] <= 0):
        return math.inf, math.inf
    r = float(np.max(tailc[1:] / tailc[:-1]))
    if r >= 1.0:
        return math.inf, math.inf
    j = np.arange(1, 1 + int(math.ceil(60 / max(-math.log(r), 1e-12))) + 64)
    k = K + j
    w = c[-1] * r ** j
    w = np.maximum(w, 0.0)
    # mass of the dominating tail must cover the declared tail mass
    scale = max(1.0, tail_mass / w.sum()) if w.sum() > 0 else math.inf
    return float(scale * (k * w).sum()), float(scale * (k * (k - 1) * w).sum())


def pgf_moments(G: PGFSeries, precision: float | None = None) -> Moments:
    """Mean G'(1) and variance G''(1) + G'(1) - G'(1)^2.

    Closed forms are exact. Tables use coefficient sums; the truncation
    error is bounded and a CertificationError is raised when the bound
    exceeds ``precision``.
    """
    if G.is_closed_form:
        m = float(G.derivative(1.0, 1))
        f2 = float(G.derivative(1.0, 2))
        return Moments(m, f2 + m - m * m)
    c = np.asarray(G.coeffs)
    k = np.arange(len(c))
    m = float(k @ c)
    f2 = float((k * (k - 1)) @ c)
    em, ef2 = _geometric_tail_bounds(c, G.tail_mass)
    var = f2 + m - m * m
    # |d var| <= d f2 + d m (1 + 2 m + d m)
    evar = ef2 + em * (1 + 2 * m + em) if math.isfinite(em) else math.inf
    if precision is not None and max(em, evar) > precision:
        raise CertificationError(
            f"tail mass {G.tail_mass:.3e} leaves moment error up to {max(em, evar):.3e} > {precision:.3e}")
    return Moments(m, var, em, evar)


def _compose_coefficients(A: PGFSeries, B: PGFSeries, K: int) -> np.ndarray:
    """First K+1 coefficients of A(B(z)) by Horner's rule on truncated power series."""
    a, a_tail = A.coefficients(K)
    b, _ = B.coefficients(K)
    # outer terms past the point where the remaining mass is negligible are dropped; their mass shows up as lost
    suffix = np.cumsum(a[::-1])[::-1] + a_tail
    keep = np.flatnonzero((suffix > OUTER_DROP) & (a > 0))
    top = int(keep[-1]) if len(keep) else 0
    conv = signal.fftconvolve if K >= FFT_MIN_K else np.convolve
    out = np.zeros(K + 1)
    out[0] = a[top]
    for n in range(top - 1, -1, -1):
        out = conv(out, b)[: K + 1]
        out[0] += a[n]
    # FFT round-off can leave tiny negatives
    return np.clip(out, 0.0, None)


def pgf_compose(A: PGFSeries, B: PGFSeries, K: int = DEFAULT_K, tail_tol: float = 1e-12) -> PGFSeries:
    """Coefficient table of A(B(z)), doubling K until the lost mass is below tail_tol."""
    while True:
        c = _compose_coefficients(A, B, K)
        lost = max(0.0, 1.0 - float(c.sum()))
        if lost <= tail_tol:
            return PGFSeries.table(c, lost)
        if K >= MAX_K:
            raise CertificationError(f"composition keeps mass {lost:.3e} beyond K={K}")
        K *= 2


def _iterate(fn, s0: float, tol: float, max_iter: int) -> float:
    s = s0
    for _ in range(int(max_iter)):
        nxt = float(fn(s))
        if abs(nxt - s) < tol:
            return nxt
        s = nxt
    raise ConvergenceError(f"fixed-point iteration did not settle within {max_iter} steps")


def extinction_fixed_point(g: PGFSeries, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> float | None:
    """Smallest root of g(s) = s in [0, 1), or None when g'(1) <= 1."""
    mean = float(g.derivative(1.0, 1))
    if mean <= 1.0:
        return None
    if float(g.derivative(0.0, 1)) >= 1.0 and float(g.evaluate(0.0)) == 0.0:
        return 0.0
    s = _iterate(g.evaluate, 0.0, tol, max_iter)
    # Newton polish on h(s) = g(s) - s; h' = g'(s) - 1 < 0 at the smaller root
    for _ in range(3):
        dh = float(g.derivative(s, 1)) - 1.0
        if dh >= 0:
            break
        nxt = s - (float(g.evaluate(s)) - s) / dh
        if not 0.0 <= nxt < 1.0:
            break
        s = nxt
    return float(s)


def ruin_root_theta(Ptilde: PGFSeries, w: float, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> float:
    """theta(w), the root of theta = w Ptilde(theta) in (0, 1]."""
    mu = float(Ptilde.derivative(1.0, 1))
    if mu >= 1.0:
        raise DomainError(f"ruin root needs mean below 1, got {mu}")
    if not 0.0 < w <= 1.0:
        raise DomainError("w must lie in (0, 1]")
    if w == 1.0:
        return 1.0
    theta = _iterate(lambda t: w * Ptilde.evaluate(t), 0.0, tol, max_iter)
    # Newton polish on h(t) = t - w P(t); h' = 1 - w P'(t) > 0 below the root
    for _ in range(3):
        h = theta - w * float(Ptilde.evaluate(theta))
        dh = 1.0 - w * float(Ptilde.derivative(theta, 1))
        if dh <= 0:
            break
        theta -= h / dh
    return float(theta)


def theta_derivatives_at_one(Ptilde: PGFSeries) -> tuple[float, float]:
    """(theta'(1), theta''(1)) = (1/(1-mu), sigma^2/(1-mu)^3 + mu/(1-mu)^2)."""
    mom = pgf_moments(Ptilde)
    mu, s2 = mom.mean, mom.variance
    if mu >= 1.0:
        raise DomainError(f"ruin root needs mean below 1, got {mu}")
    return 1.0 / (1 - mu), s2 / (1 - mu) ** 3 + mu / (1 - mu) ** 2


def ruin_time_moments(F: PGFSeries, Ptilde: PGFSeries) -> tuple[float, float]:
    """(E T, Var T) for the walk L_{n+1} = L_n + X_{n+1} - 1 started from L_0 ~ F."""
    pm = pgf_moments(Ptilde)
    fm = pgf_moments(F)
    mu, s2 = pm.mean, pm.variance
    if mu >= 1.0:
        raise DomainError(f"ruin time is finite only for mean below 1, got {mu}")
    ET = fm.mean / (1 - mu)
    VT = fm.variance / (1 - mu) ** 2 + s2 * fm.mean / (1 - mu) ** 3
    return ET, VT
