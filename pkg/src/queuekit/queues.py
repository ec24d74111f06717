"""Closed-form metrics for Kendall-Lee single-station models and the two-node tandem."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from .birth_death import TruncatedDistribution
from .errors import DomainError, UnstableSystemError, ValidationError

MODEL_KINDS = ("MM1", "MMInf", "MMm", "MMmm", "MG1")
BRANCH_TOL = 1e-9


@dataclass(frozen=True)
class QueueModelSpec:
    kind: str
    beta: float
    delta: float | None = None          # service rate per server
    m: int = 1
    service_moments: tuple | None = None  # (E[s], E[s^2]) for MG1

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValidationError(f"unknown queue kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if not self.beta > 0:
            raise ValidationError("beta must be positive")
        if self.kind == "MG1":
            if self.service_moments is None:
                if self.delta is None:
                    raise ValidationError("MG1 needs service_moments or delta")
            else:
                es, es2 = self.service_moments
                if not es > 0 or es2 < es * es:
                    raise ValidationError("MG1 service moments need E[s] > 0 and E[s^2] >= E[s]^2")
        elif self.delta is None or not self.delta > 0:
            raise ValidationError("delta must be positive")
        if int(self.m) < 1:
            raise ValidationError("m must be at least 1")


@dataclass(frozen=True)
class PerformanceMetrics:
    model: str
    rho: float
    u: float
    L: float
    Lq: float
    Ls: float
    W: float
    Wq: float
    Ws: float
    pi0: float
    arrival_rate: float                 # effective rate entering service; equals beta except for losses
    blocking: float | None = None
    delay_prob: float | None = None
    var_N: float | None = None
    source: str = ""

    def __post_init__(self):
        for k, v in asdict(self).items():
            if k not in ("model", "source") and v is not None:
                object.__setattr__(self, k, float(v))

    def as_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


UNITS = {
    "rho": "dimensionless", "u": "dimensionless", "pi0": "probability",
    "blocking": "probability", "delay_prob": "probability",
    "L": "customers", "Lq": "customers", "Ls": "customers", "var_N": "customers^2",
    "W": "time", "Wq": "time", "Ws": "time", "arrival_rate": "customers/time",
}


def mm1_metrics(beta: float, delta: float) -> PerformanceMetrics:
    rho = beta / delta
    if rho >= 1:
        raise UnstableSystemError("M/M/1", rho)
    es = 1.0 / delta
    L = rho / (1 - rho)
    Lq = rho * rho / (1 - rho)
    W = 1.0 / (delta - beta)
    Wq = es * rho / (1 - rho)
    return PerformanceMetrics("MM1", rho, rho, L, Lq, L - Lq, W, Wq, es, 1 - rho, beta,
                              var_N=rho / (1 - rho) ** 2, source="M/M/1 closed form")


def mminf_metrics(beta: float, delta: float) -> PerformanceMetrics:
    eta = beta / delta
    return PerformanceMetrics("MMInf", eta, 0.0, eta, 0.0, eta, 1.0 / delta, 0.0, 1.0 / delta,
                              math.exp(-eta), beta, var_N=eta, source="M/M/inf Poisson law")


def _log_erlang_terms(rho: float, m: int) -> np.ndarray:
    """log(rho^n / n!) for n = 0..m by the running recurrence t_n = t_{n-1} rho / n."""
    steps = np.log(rho) - np.log(np.arange(1, m + 1))
    return np.concatenate([[0.0], np.cumsum(steps)])


def erlang_b(m: int, rho: float) -> float:
    """B(m, rho) = (rho^m/m!) / sum_{n<=m} rho^n/n!."""
    if m == 0:
        return 1.0
    lt = _log_erlang_terms(rho, m)
    return float(np.exp(lt[m] - logsumexp(lt)))


def erlang_b_recursive(m: int, rho: float) -> float:
    """B_0 = 1, B_k = rho B_{k-1} / (k + rho B_{k-1})."""
    b = 1.0
    for k in range(1, m + 1):
        b = rho * b / (k + rho * b)
    return b


def _erlang_c_parts(rho: float, m: int) -> tuple[float, float]:
    """(pi0, C) with S = sum_{n<m} rho^n/n! + rho^m / (m! (1-u))."""
    u = rho / m
    lt = _log_erlang_terms(rho, m)
    top = lt[m] - math.log1p(-u)
    log_s = logsumexp(np.append(lt[:m], top))
    return float(np.exp(-log_s)), float(np.exp(top - log_s))


def erlang_c(m: int, rho: float) -> float:
    if rho / m >= 1:
        raise UnstableSystemError("M/M/m", rho / m)
    return _erlang_c_parts(rho, m)[1]


def mmm_metrics(beta: float, delta: float, m: int) -> PerformanceMetrics:
    m = int(m)
    rho = beta / delta
    u = rho / m
    if u >= 1:
        raise UnstableSystemError("M/M/m", u)
    pi0, C = _erlang_c_parts(rho, m)
    Lq = C * u / (1 - u)
    Wq = Lq / beta
    W = Wq + 1.0 / delta
    L = beta * W
    return PerformanceMetrics("MMm", rho, u, L, Lq, L - Lq, W, Wq, 1.0 / delta, pi0, beta,
                              delay_prob=C, source="M/M/m Erlang-C")


def erlang_loss_metrics(beta: float, delta: float, m: int) -> PerformanceMetrics:
    m = int(m)
    rho = beta / delta
    lt = _log_erlang_terms(rho, m)
    log_s = logsumexp(lt)
    B = float(np.exp(lt[m] - log_s))
    pi0 = float(np.exp(-log_s))
    lam_eff = beta * (1 - B)
    L = rho * (1 - B)
    W = 1.0 / delta
    return PerformanceMetrics("MMmm", rho, L / m, L, 0.0, L, W, 0.0, W, pi0, lam_eff,
                              blocking=B, source="M/M/m/m Erlang-B")


def mg1_metrics(beta: float, es: float, es2: float) -> PerformanceMetrics:
    """Pollaczek-Khinchine mean value: L = rho + beta^2 E[s^2] / (2 (1 - rho))."""
    if es2 < es * es:
        raise ValidationError("E[s^2] must be at least E[s]^2")
    rho = beta * es
    if rho >= 1:
        raise UnstableSystemError("M/G/1", rho)
    L = rho + beta * beta * es2 / (2 * (1 - rho))
    W = L / beta
    return PerformanceMetrics("MG1", rho, rho, L, L - rho, rho, W, W - es, es, 1 - rho, beta,
                              source="M/G/1 Pollaczek-Khinchine mean")


def metrics(spec: QueueModelSpec) -> PerformanceMetrics:
    if spec.kind == "MM1":
        return mm1_metrics(spec.beta, spec.delta)
    if spec.kind == "MMInf":
        return mminf_metrics(spec.beta, spec.delta)
    if spec.kind == "MMm":
        return mmm_metrics(spec.beta, spec.delta, spec.m)
    if spec.kind == "MMmm":
        return erlang_loss_metrics(spec.beta, spec.delta, spec.m)
    es, es2 = spec.service_moments or (1.0 / spec.delta, 2.0 / spec.delta ** 2)
    return mg1_metrics(spec.beta, es, es2)


def waiting_time_cdf(spec: QueueModelSpec, t: float) -> tuple[float, float]:
    """(P(sojourn <= t), P(queueing delay <= t)) for M/M/1 and M/M/m."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    if spec.kind == "MM1":
        mt = mm1_metrics(spec.beta, spec.delta)
        e = math.exp(-t / mt.W)
        return 1 - e, 1 - mt.rho * e
    if spec.kind == "MMm":
        mt = mmm_metrics(spec.beta, spec.delta, spec.m)
        m, rho, C, d = spec.m, mt.rho, mt.delay_prob, spec.delta
        decay = math.exp(-m * d * t * (1 - mt.u))
        wq = 1 - C * decay
        if abs(rho - (m - 1)) < BRANCH_TOL:
            w = 1 - (1 + C * d * t) * math.exp(-d * t)
        else:
            wq0 = 1 - C
            w = (1 + math.exp(-d * t) * (rho - m + wq0) / (m - 1 - rho)
                 + decay * C / (m - 1 - rho))
        return w, wq
    raise DomainError(f"waiting-time distribution not available for {spec.kind}")


@dataclass(frozen=True)
class ArrivalProbs:
    a: np.ndarray
    tail_mass: float

    @property
    def mean(self) -> float:
        return float(np.arange(len(self.a)) @ self.a)


def mg1_arrival_probs(beta: float, service, j_max: int) -> ArrivalProbs:
    """a_j = int e^{-beta t} (beta t)^j / j! dG(t), j = 0..j_max."""
    if j_max < 0:
        raise DomainError("j_max must be nonnegative")
    if not hasattr(service, "arrival_probs"):
        raise ValidationError(f"unknown service descriptor {service!r}")
    a = np.asarray(service.arrival_probs(beta, j_max), dtype=float)
    return ArrivalProbs(a, max(0.0, 1.0 - float(a.sum())))


def mg1_embedded_stationary(a, n_max: int) -> TruncatedDistribution:
    """Departure-epoch stationary law of the M/G/1 embedded chain.

    pi_0 = 1 - rho; successive pi_{j+1} come from the level-crossing form of
    pi_j = pi_0 a_j + sum_{i=1}^{j+1} pi_i a_{j-i+1}:
        a_0 pi_{j+1} = pi_0 abar_j + sum_{i=1}^{j} pi_i abar_{j-i+1},
    with abar_k = P(U > k). All terms are nonnegative, so no cancellation.
    """
    if isinstance(a, ArrivalProbs):
        arr, extra = a.a, a.tail_mass
    else:
        arr, extra = np.asarray(a, dtype=float), 0.0
    rho = float(np.arange(len(arr)) @ arr)
    if rho >= 1:
        raise UnstableSystemError("M/G/1 embedded chain", rho)
    if arr[0] >= 1.0:
        pi = np.zeros(n_max + 1)
        pi[0] = 1.0
        return TruncatedDistribution(pi, 0.0)
    size = max(n_max + 2, len(arr))
    full = np.zeros(size)
    full[: len(arr)] = arr
    abar = extra + (full[::-1].cumsum()[::-1] - full)   # abar[k] = sum_{i>k} a_i + leftover
    pi = np.zeros(n_max + 1)
    pi[0] = 1 - rho
    for j in range(n_max):
        s = pi[0] * abar[j]
        if j:
            s += pi[1 : j + 1] @ abar[j:0:-1]
        pi[j + 1] = s / full[0]
    return TruncatedDistribution(pi, max(0.0, 1.0 - float(pi.sum())))


def embedded_transition_matrix(a, n: int) -> np.ndarray:
    """Truncated M/G/1 embedded chain; row mass beyond column n-1 folds into the last column."""
    arr = np.asarray(a.a if isinstance(a, ArrivalProbs) else a, dtype=float)
    full = np.zeros(n + 1)
    k = min(len(arr), n + 1)
    full[:k] = arr[:k]
    P = np.zeros((n, n))
    for i in range(n):
        start = 0 if i == 0 else i - 1
        width = n - start
        P[i, start:] = full[:width]
        P[i, -1] += max(0.0, 1.0 - P[i].sum())
    return P


@dataclass(frozen=True)
class TandemMetrics:
    lam: float
    mu1: float
    mu2: float
    rho1: float = field(init=False)
    rho2: float = field(init=False)
    L1: float = field(init=False)
    L2: float = field(init=False)
    L: float = field(init=False)
    W: float = field(init=False)

    def __post_init__(self):
        r1, r2 = self.lam / self.mu1, self.lam / self.mu2
        for name, r in (("station 1", r1), ("station 2", r2)):
            if r >= 1:
                raise UnstableSystemError(f"tandem {name}", r)
        object.__setattr__(self, "rho1", r1)
        object.__setattr__(self, "rho2", r2)
        object.__setattr__(self, "L1", self.lam / (self.mu1 - self.lam))
        object.__setattr__(self, "L2", self.lam / (self.mu2 - self.lam))
        object.__setattr__(self, "L", self.L1 + self.L2)
        object.__setattr__(self, "W", self.L / self.lam)

    def joint(self, n, m):
        """P_{n,m} = rho1^n (1-rho1) rho2^m (1-rho2); accepts arrays."""
        n = np.asarray(n)
        m = np.asarray(m)
        return self.rho1 ** n * (1 - self.rho1) * self.rho2 ** m * (1 - self.rho2)

    def balance_residual(self, n_max: int = 20, m_max: int = 20) -> float:
        """Largest |lhs - rhs| of the global balance equations over 0..n_max x 0..m_max."""
        lam, mu1, mu2, P = self.lam, self.mu1, self.mu2, self.joint
        worst = 0.0
        for n in range(n_max + 1):
            for m in range(m_max + 1):
                if n == 0 and m == 0:
                    res = lam * P(0, 0) - mu2 * P(0, 1)
                elif m == 0:
                    res = (lam + mu1) * P(n, 0) - mu2 * P(n, 1) - lam * P(n - 1, 0)
                elif n == 0:
                    res = (lam + mu2) * P(0, m) - mu2 * P(0, m + 1) - mu1 * P(1, m - 1)
                else:
                    res = ((lam + mu1 + mu2) * P(n, m) - mu2 * P(n, m + 1)
                           - mu1 * P(n + 1, m - 1) - lam * P(n - 1, m))
                worst = max(worst, abs(float(res)))
        return worst


def tandem_metrics(lam: float, mu1: float, mu2: float) -> TandemMetrics:
    return TandemMetrics(lam, mu1, mu2)
