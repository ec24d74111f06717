"""Birth-death jump processes on the nonnegative integers.

Rates are given either by a closed-form family or by an explicit table.
Divergence of the infinite sums involved is detected heuristically over a
trailing window of term ratios; when the window is not decisive the verdict
is ``"inconclusive"`` and the partial sums are returned for inspection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NotErgodicError, ValidationError

KINDS = ("constant", "linear", "m-server", "capped", "table")
WINDOW = 20
DEFAULT_N_MAX = 10_000
INTENSITY_TOL = 1e-12


@dataclass(frozen=True)
class BirthDeathSpec:
    """Birth rates beta_n (n >= 0) and death rates delta_n (n >= 1).

    kind:
      constant  beta_n = beta, delta_n = delta                      (M/M/1)
      linear    beta_n = beta, delta_n = n * delta                  (M/M/inf)
      m-server  beta_n = beta, delta_n = min(n, m) * delta          (M/M/m)
      capped    beta_n = beta for n < m, 0 after; delta_n = min(n, m) * delta
                (the loss system M/M/m/m; finite state space {0..m})
      table     births[n], deaths[n] listed explicitly (deaths[0] ignored);
                past the end of the table the last listed rate repeats
    """

    kind: str
    beta: float = 0.0
    delta: float = 0.0
    m: int = 1
    births: tuple = field(default=())
    deaths: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown birth-death kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "table":
            if len(self.births) < 1 or len(self.deaths) < 2:
                raise ValidationError("table spec needs births[0..] and deaths[0..] with at least deaths[1]")
            if any(not (b > 0 and math.isfinite(b)) for b in self.births):
                raise ValidationError("birth rates must be positive and finite")
            if any(not (d > 0 and math.isfinite(d)) for d in self.deaths[1:]):
                raise ValidationError("death rates must be positive and finite")
            object.__setattr__(self, "births", tuple(float(b) for b in self.births))
            object.__setattr__(self, "deaths", tuple(float(d) for d in self.deaths))
        else:
            if not (self.beta > 0 and self.delta > 0):
                raise ValidationError("beta and delta must be positive")
            if self.kind in ("m-server", "capped") and int(self.m) < 1:
                raise ValidationError("m must be at least 1")

    @property
    def capacity(self) -> int | None:
        return int(self.m) if self.kind == "capped" else None

    def birth(self, n: int) -> float:
        if self.kind == "table":
            return self.births[min(n, len(self.births) - 1)]
        if self.kind == "capped" and n >= self.m:
            return 0.0
        return float(self.beta)

    def death(self, n: int) -> float:
        if n == 0:
            return 0.0
        if self.kind == "constant":
            return float(self.delta)
        if self.kind == "linear":
            return n * self.delta
        if self.kind in ("m-server", "capped"):
            return min(n, self.m) * self.delta
        return self.deaths[min(n, len(self.deaths) - 1)]


@dataclass(frozen=True)
class RecurrenceVerdict:
    verdict: str                       # "recurrent" | "transient" | "inconclusive"
    method: str                        # "closed-form" | "ratio-window"
    partial_sums: tuple = ()           # trace of sum_{n<=N} prod(delta/beta), sampled

    def __str__(self):
        return self.verdict


@dataclass(frozen=True)
class Normalization:
    value: float                       # math.inf when the series diverges
    tail_bound: float
    terms_used: int
    method: str

    @property
    def diverges(self) -> bool:
        return math.isinf(self.value)


@dataclass(frozen=True)
class TruncatedDistribution:
    weights: np.ndarray
    tail_mass: float

    def __len__(self):
        return len(self.weights)

    def __getitem__(self, n):
        return self.weights[n]

    def mean(self) -> float:
        return float(np.arange(len(self.weights)) @ self.weights)


@dataclass(frozen=True)
class IntensityCheck:
    ok: bool
    condition: str | None = None       # "diagonal" | "off-diagonal" | "row-sum"
    index: tuple | None = None
    value: float | None = None

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "ok"
        return f"{self.condition} violation at {self.index}: {self.value!r}"


def _check_n_max(n_max: int):
    if n_max < 10:
        raise DomainError(f"n_max must be at least 10, got {n_max}")


def _log_recurrence_terms(spec: BirthDeathSpec, n_max: int) -> np.ndarray:
    """log of prod_{k=1..n} delta_k / beta_k for n = 1..n_max."""
    out = np.empty(n_max)
    acc = 0.0
    for n in range(1, n_max + 1):
        b, d = spec.birth(n), spec.death(n)
        if not (b > 0 and d > 0):
            raise DomainError(f"non-positive rate at n={n}: beta={b}, delta={d}")
        acc += math.log(d) - math.log(b)
        out[n - 1] = acc
    return out


def _log_measure_terms(spec: BirthDeathSpec, n_max: int) -> np.ndarray:
    """log of prod_{k=1..n} beta_{k-1} / delta_k for n = 1..n_max (stops at a zero birth rate)."""
    out = []
    acc = 0.0
    for n in range(1, n_max + 1):
        b, d = spec.birth(n - 1), spec.death(n)
        if b == 0.0:
            break
        if not (b > 0 and d > 0):
            raise DomainError(f"non-positive rate at n={n}: beta={b}, delta={d}")
        acc += math.log(b) - math.log(d)
        out.append(acc)
    return np.array(out)


def _trace(log_terms: np.ndarray, points: int = 12) -> tuple:
    terms = np.exp(np.minimum(log_terms, 700.0))
    sums = np.cumsum(terms)
    idx = np.unique(np.geomspace(1, len(sums), points).astype(int)) - 1
    return tuple((int(i + 1), float(sums[i])) for i in idx)


def classify_recurrence(spec: BirthDeathSpec, n_max: int = DEFAULT_N_MAX,
                        growth_threshold: float = 0.01, closed_form: bool = True) -> RecurrenceVerdict:
    """Recurrence iff sum_n prod_{k<=n} delta_k/beta_k diverges.

    Numeric rule over the last ``WINDOW`` term ratios delta_n/beta_n:
    all >= 1 (terms non-decreasing) means divergence, hence recurrent; all
    <= 1 - growth_threshold gives a geometric tail bound, hence transient;
    anything else is inconclusive.
    """
    _check_n_max(n_max)
    if closed_form and spec.kind != "table":
        if spec.kind in ("linear", "capped"):
            return RecurrenceVerdict("recurrent", "closed-form")
        load = spec.beta / (spec.delta * (spec.m if spec.kind == "m-server" else 1))
        return RecurrenceVerdict("recurrent" if load <= 1 else "transient", "closed-form")
    if spec.kind == "capped":
        # finite irreducible chain
        return RecurrenceVerdict("recurrent", "finite-state")
    logs = _log_recurrence_terms(spec, n_max)
    ratios = np.exp(np.diff(logs[-(WINDOW + 1):]))
    trace = _trace(logs)
    if np.all(ratios >= 1.0):
        return RecurrenceVerdict("recurrent", "ratio-window", trace)
    if np.all(ratios <= 1.0 - growth_threshold):
        return RecurrenceVerdict("transient", "ratio-window", trace)
    return RecurrenceVerdict("inconclusive", "ratio-window", trace)


def _closed_form_S(spec: BirthDeathSpec) -> float | None:
    if spec.kind == "constant":
        return spec.delta / (spec.delta - spec.beta) if spec.beta < spec.delta else math.inf
    if spec.kind == "linear":
        return math.exp(spec.beta / spec.delta)
    if spec.kind in ("m-server", "capped"):
        rho = spec.beta / spec.delta
        m = int(spec.m)
        term, head = 1.0, 1.0
        for n in range(1, m + (1 if spec.kind == "capped" else 0)):
            term *= rho / n
            head += term
        if spec.kind == "capped":
            return head
        u = rho / m
        if u >= 1:
            return math.inf
        return head + term * rho / m / (1 - u)
    return None


def normalization_S(spec: BirthDeathSpec, n_max: int = DEFAULT_N_MAX, tail_tol: float = 1e-12,
                    closed_form: bool = True) -> Normalization:
    """S = 1 + sum_n beta_0..beta_{n-1} / (delta_1..delta_n).

    The numeric path adds a geometric tail bound t_N r / (1 - r) once the
    trailing term ratios stay below r < 1.
    """
    _check_n_max(n_max)
    if closed_form:
        s = _closed_form_S(spec)
        if s is not None:
            return Normalization(s, 0.0, 0, "closed-form")
    logs = _log_measure_terms(spec, n_max)
    if len(logs) < n_max:
        # births stopped: finite state space, exact sum
        return Normalization(1.0 + float(np.exp(logs).sum()), 0.0, len(logs), "finite")
    terms = np.exp(np.minimum(logs, 700.0))
    ratios = np.exp(np.diff(logs[-(WINDOW + 1):]))
    r = float(ratios.max())
    if r >= 1.0:
        return Normalization(math.inf, math.inf, n_max, "ratio-window")
    partial = 1.0 + float(terms.sum())
    tail = float(terms[-1] * r / (1.0 - r))
    if tail > tail_tol * partial:
        return Normalization(math.inf, tail, n_max, "ratio-window")
    return Normalization(partial + tail, tail, n_max, "ratio-window")


def stationary_distribution(spec: BirthDeathSpec, n_max: int = DEFAULT_N_MAX,
                            tail_tol: float = 1e-12) -> TruncatedDistribution:
    """pi_0 = 1/S, pi_n = pi_0 prod beta_{k-1}/delta_k, cut where the tail is below tail_tol."""
    norm = normalization_S(spec, n_max, tail_tol)
    if norm.diverges:
        raise NotErgodicError(f"normalization constant diverges for {spec.kind} spec; no stationary law")
    S = norm.value
    weights = [1.0 / S]
    total = weights[0]
    cap = spec.capacity
    for n in range(1, n_max + 1):
        if cap is not None and n > cap:
            break
        w = weights[-1] * spec.birth(n - 1) / spec.death(n)
        weights.append(w)
        total += w
        if cap is None and 1.0 - total <= tail_tol:
            break
    tail = max(0.0, 1.0 - total)
    if cap is None and tail > tail_tol:
        tail = max(tail, norm.tail_bound / S)
    return TruncatedDistribution(np.array(weights), tail)


def build_intensity_matrix(spec: BirthDeathSpec, n_states: int) -> np.ndarray:
    """Tridiagonal generator on {0..n_states-1}; the last row's birth is dropped."""
    if n_states < 2:
        raise DomainError("n_states must be at least 2")
    L = np.zeros((n_states, n_states))
    for n in range(n_states):
        if n + 1 < n_states:
            L[n, n + 1] = spec.birth(n)
        if n > 0:
            L[n, n - 1] = spec.death(n)
        L[n, n] = -L[n].sum()
    return L


def validate_intensity_matrix(L) -> IntensityCheck:
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValidationError("intensity matrix must be square")
    for i in range(L.shape[0]):
        if L[i, i] > 0:
            return IntensityCheck(False, "diagonal", (i, i), float(L[i, i]))
        for j in range(L.shape[1]):
            if j != i and L[i, j] < 0:
                return IntensityCheck(False, "off-diagonal", (i, j), float(L[i, j]))
        s = float(L[i].sum())
        if abs(s) > INTENSITY_TOL:
            return IntensityCheck(False, "row-sum", (i,), s)
    return IntensityCheck(True)


def embedded_jump_probs(spec: BirthDeathSpec, n: int) -> tuple[float, float]:
    """(p_n, q_n) = (beta_n, delta_n) / (beta_n + delta_n)."""
    b, d = spec.birth(n), spec.death(n)
    return b / (b + d), d / (b + d)


def embedded_stationary_measure(spec: BirthDeathSpec, n_states: int) -> np.ndarray:
    """mu_n = p_1..p_{n-1} / (q_1..q_n) mu_0 with mu_0 = 1, unnormalized."""
    mu = np.empty(n_states)
    mu[0] = 1.0
    num = 1.0
    den = 1.0
    for n in range(1, n_states):
        if n >= 2:
            num *= embedded_jump_probs(spec, n - 1)[0]
        den *= embedded_jump_probs(spec, n)[1]
        mu[n] = num / den
    return mu


def embedded_transition_matrix(spec: BirthDeathSpec, n_states: int) -> np.ndarray:
    """Jump chain Q on {0..n_states-1}; the last state reflects downward."""
    Q = np.zeros((n_states, n_states))
    Q[0, 1] = 1.0
    for n in range(1, n_states):
        p, q = embedded_jump_probs(spec, n)
        if n + 1 < n_states:
            Q[n, n + 1] = p
            Q[n, n - 1] = q
        else:
            Q[n, n - 1] = 1.0
    return Q


def is_ergodic(spec: BirthDeathSpec, n_max: int = DEFAULT_N_MAX) -> bool:
    """Ergodic iff recurrent and S finite."""
    rec = classify_recurrence(spec, n_max)
    return rec.verdict == "recurrent" and not normalization_S(spec, n_max).diverges
