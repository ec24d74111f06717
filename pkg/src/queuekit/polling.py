"""Cyclic single-server polling systems.

Queues are visited in the order 0, 1, ..., N-1, 0, ...; every subscript
below is taken modulo N. Switchover i is the walk from queue i to queue
i+1. Station time T_i is the time the server spends on the visit to queue
i together with the switchover attached to it by the policy:

  exhaustive  T_i = R_{i-1} + V_i   (switchover into i, then the visit)
  gated       T_i = V_i + R_i       (the visit, then the switchover out)

r_ii = Var T_i, and for j != i, r_ij = Cov(T_i, T_j') where T_j' is the
most recent station time of queue j preceding T_i. Switchover legs are
taken independent of each other and of the arrival processes.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from .errors import DomainError, SingularSystemError, UnstableSystemError, ValidationError

POLICIES = ("exhaustive", "gated")
COND_LIMIT = 1e12


def _vec(x, name: str) -> tuple:
    a = np.atleast_1d(np.asarray(x, dtype=float))
    if a.ndim != 1 or not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} must be a finite vector")
    return tuple(a.tolist())


@dataclass(frozen=True)
class PollingSpec:
    lam: tuple
    b1: tuple
    b2: tuple
    s1: tuple
    s2: tuple
    delta2: float | None = None       # E[(total switchover per cycle)^2]; None = independent legs

    def __post_init__(self):
        for name in ("lam", "b1", "b2", "s1", "s2"):
            object.__setattr__(self, name, _vec(getattr(self, name), name))
        n = len(self.lam)
        if n < 1 or any(len(getattr(self, k)) != n for k in ("b1", "b2", "s1", "s2")):
            raise ValidationError("lam, b1, b2, s1, s2 must all have the same length N >= 1")
        lam, b1, b2, s1, s2 = (np.asarray(getattr(self, k)) for k in ("lam", "b1", "b2", "s1", "s2"))
        if np.any(lam <= 0) or np.any(b1 <= 0):
            raise ValidationError("arrival rates and mean service times must be positive")
        if np.any(b2 < b1 * b1 * (1 - 1e-12)):
            raise ValidationError("b2 must be at least b1^2")
        if np.any(s1 < 0) or np.any(s2 < s1 * s1 * (1 - 1e-12)):
            raise ValidationError("switchover moments need s1 >= 0 and s2 >= s1^2")
        if not s1.sum() > 0:
            raise ValidationError("total mean switchover time must be positive")
        if self.delta2 is not None and self.delta2 < s1.sum() ** 2 * (1 - 1e-12):
            raise ValidationError("delta2 must be at least delta^2")

    @property
    def N(self) -> int:
        return len(self.lam)

    @property
    def rho_i(self) -> np.ndarray:
        return np.asarray(self.lam) * np.asarray(self.b1)

    @property
    def rho(self) -> float:
        return float(self.rho_i.sum())

    @property
    def delta(self) -> float:
        return float(sum(self.s1))

    @property
    def switch_var(self) -> np.ndarray:
        return np.asarray(self.s2) - np.asarray(self.s1) ** 2

    @property
    def total_switch_second_moment(self) -> float:
        if self.delta2 is not None:
            return float(self.delta2)
        return independent_delta2(self.s1, self.s2)

    @property
    def cycle_mean(self) -> float:
        return self.delta / (1 - self.rho)

    def scaled(self, c: float) -> "PollingSpec":
        """Same system with every time quantity multiplied by c."""
        return replace(self, lam=tuple(np.asarray(self.lam) / c), b1=tuple(np.asarray(self.b1) * c),
                       b2=tuple(np.asarray(self.b2) * c * c), s1=tuple(np.asarray(self.s1) * c),
                       s2=tuple(np.asarray(self.s2) * c * c),
                       delta2=None if self.delta2 is None else self.delta2 * c * c)

    def check_stable(self):
        if self.rho >= 1:
            raise UnstableSystemError("polling system", self.rho)


def independent_delta2(s1, s2) -> float:
    """Second moment of the total switchover when the legs are independent."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    return float((s2 - s1 ** 2).sum() + s1.sum() ** 2)


def symmetric_spec(N: int, lam: float, b1: float, b2: float, s1: float, s2: float) -> PollingSpec:
    return PollingSpec((lam,) * N, (b1,) * N, (b2,) * N, (s1,) * N, (s2,) * N)


@dataclass(frozen=True)
class CovarianceMatrix:
    r: np.ndarray
    policy: str
    residual: float = 0.0
    condition: float = 1.0

    def __getitem__(self, ij):
        return self.r[ij]

    @property
    def N(self) -> int:
        return self.r.shape[0]

    def row_off(self, i: int) -> float:
        """sum_{j != i} r_ij"""
        return float(self.r[i].sum() - self.r[i, i])

    def col_off(self, i: int) -> float:
        """sum_{k != i} r_ki"""
        return float(self.r[:, i].sum() - self.r[i, i])


def _between(a: int, b: int, N: int) -> list[int]:
    """Queues strictly after a and strictly before b in visiting order."""
    out = []
    k = (a + 1) % N
    while k != b:
        out.append(k)
        k = (k + 1) % N
    return out


def _check_policy(policy: str):
    if policy not in POLICIES:
        raise ValidationError(f"unknown policy {policy!r}; expected one of {POLICIES}")


def assemble_covariance_system(spec: PollingSpec, policy: str) -> tuple[np.ndarray, np.ndarray]:
    """The N^2 x N^2 linear system for vec(r), row-major in (i, j).

    Off-diagonal rows express r_ij through row j of r over the two cyclic
    arcs separating i and j:
      r_ij = c_i [ sum_{k in (i,j)} r_jk + r_jj + sum_{k in (j,i)} r_kj (+ r_ji gated) ]
    with c_i = rho_i/(1-rho_i) exhaustive and c_i = rho_i gated.
    """
    _check_policy(policy)
    N = spec.N
    rho_i = spec.rho_i
    lam, b2 = np.asarray(spec.lam), np.asarray(spec.b2)
    var = spec.switch_var
    EC = spec.cycle_mean
    A = np.eye(N * N)
    rhs = np.zeros(N * N)

    def at(i, j):
        return i * N + j

    for i in range(N):
        ri = rho_i[i]
        c = ri / (1 - ri) if policy == "exhaustive" else ri
        for j in range(N):
            row = at(i, j)
            if i != j:
                for k in _between(i, j, N):
                    A[row, at(j, k)] -= c
                A[row, at(j, j)] -= c
                for k in _between(j, i, N):
                    A[row, at(k, j)] -= c
                if policy == "gated":
                    A[row, at(j, i)] -= c
                continue
            others = [k for k in range(N) if k != i]
            if policy == "exhaustive":
                EI = (1 - ri) * EC
                rhs[row] = var[i - 1] / (1 - ri) ** 2 + lam[i] * b2[i] * EI / (1 - ri) ** 3
                for k in others:
                    A[row, at(i, k)] -= c
            else:
                rhs[row] = var[i] + lam[i] * b2[i] * EC
                A[row, row] -= ri * ri
                for k in others:
                    A[row, at(i, k)] -= ri
                    A[row, at(k, i)] -= ri * ri
    return A, rhs


def solve_station_covariances(spec: PollingSpec, policy: str) -> CovarianceMatrix:
    spec.check_stable()
    A, rhs = assemble_covariance_system(spec, policy)
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularSystemError("station-time covariance system is singular", cond)
    x = linalg.lu_solve(linalg.lu_factor(A), rhs)
    residual = float(np.max(np.abs(A @ x - rhs)))
    return CovarianceMatrix(x.reshape(spec.N, spec.N), policy, residual, cond)


@dataclass(frozen=True)
class VisitMoments:
    """First and second moments of intervisit (exhaustive) or cycle (gated) times per queue."""

    mean: np.ndarray
    second: np.ndarray
    kind: str                         # "intervisit" | "cycle"

    @property
    def variance(self) -> np.ndarray:
        return self.second - self.mean ** 2


def intervisit_moments(spec: PollingSpec, cov: CovarianceMatrix) -> VisitMoments:
    """E I_i = (1-rho_i) E C; E I_i^2 = Var R_{i-1} + (1-rho_i)/rho_i sum_{j!=i} r_ij + (E I_i)^2."""
    if cov.policy != "exhaustive":
        raise ValidationError("intervisit moments need exhaustive-policy covariances")
    rho_i = spec.rho_i
    EI = (1 - rho_i) * spec.cycle_mean
    var = spec.switch_var
    EI2 = np.array([var[i - 1] + (1 - rho_i[i]) / rho_i[i] * cov.row_off(i) + EI[i] ** 2
                    for i in range(spec.N)])
    return VisitMoments(EI, EI2, "intervisit")


def cycle_moments(spec: PollingSpec, cov: CovarianceMatrix) -> VisitMoments:
    """Gated: E C_i = E C; E C_i^2 = (1/rho_i) sum_{j!=i} r_ij + r_ii + sum_{k!=i} r_ki + (E C)^2."""
    if cov.policy != "gated":
        raise ValidationError("cycle moments need gated-policy covariances")
    rho_i = spec.rho_i
    EC = spec.cycle_mean
    EC2 = np.array([cov.row_off(i) / rho_i[i] + cov.r[i, i] + cov.col_off(i) + EC ** 2
                    for i in range(spec.N)])
    return VisitMoments(np.full(spec.N, EC), EC2, "cycle")


def mean_waits(spec: PollingSpec, policy: str, cov: CovarianceMatrix | None = None) -> np.ndarray:
    """Mean waiting time before service at each queue."""
    _check_policy(policy)
    spec.check_stable()
    if cov is None:
        cov = solve_station_covariances(spec, policy)
    rho_i = spec.rho_i
    if policy == "exhaustive":
        mom = intervisit_moments(spec, cov)
        lb2 = np.asarray(spec.lam) * np.asarray(spec.b2)
        return mom.second / (2 * mom.mean) + lb2 / (2 * (1 - rho_i))
    mom = cycle_moments(spec, cov)
    return (1 + rho_i) * mom.second / (2 * mom.mean)


def pseudo_conservation_rhs(spec: PollingSpec, policy: str) -> float:
    _check_policy(policy)
    rho, d = spec.rho, spec.delta
    rho_i = spec.rho_i
    lb2 = float((np.asarray(spec.lam) * np.asarray(spec.b2)).sum())
    sign = -1.0 if policy == "exhaustive" else 1.0
    return (rho * lb2 / (2 * (1 - rho))
            + rho * spec.total_switch_second_moment / (2 * d)
            + d / (2 * (1 - rho)) * (rho ** 2 + sign * float((rho_i ** 2).sum())))


def pseudo_conservation_residual(spec: PollingSpec, waits, policy: str) -> float:
    """sum_i rho_i E W_i minus the right-hand side of the pseudo-conservation law."""
    waits = np.asarray(waits, dtype=float)
    if waits.shape != (spec.N,):
        raise ValidationError(f"expected {spec.N} waits, got shape {waits.shape}")
    return float(spec.rho_i @ waits - pseudo_conservation_rhs(spec, policy))


def takagi_approx_waits(spec: PollingSpec) -> np.ndarray:
    """Approximate exhaustive waits from the product formula with Delta^2 = sum s1_i^2."""
    spec.check_stable()
    rho, d = spec.rho, spec.delta
    lam = np.asarray(spec.lam)
    rho_i = spec.rho_i
    denom = 1 - rho - lam * d
    if np.any(denom <= 0):
        i = int(np.argmax(denom <= 0))
        raise DomainError(f"1 - rho - lam_i delta = {denom[i]:.6g} <= 0 at queue {i}")
    big_delta2 = float(np.square(spec.s1).sum())
    bracket = (rho / (2 * (1 - rho)) * float((lam * np.asarray(spec.b2)).sum())
               + rho * big_delta2 / (2 * d)
               + d / (2 * (1 - rho)) * float((rho_i * (1 + rho_i)).sum()))
    scale = (1 - rho) / (rho * (1 - rho) + float((rho_i ** 2).sum()))
    return (1 - rho + rho_i) / denom * scale * bracket


@dataclass(frozen=True)
class PollingAnalysis:
    policy: str
    waits: np.ndarray
    covariances: CovarianceMatrix
    moments: VisitMoments
    pcl_residual: float
    cycle_mean: float


def analyze(spec: PollingSpec, policy: str) -> PollingAnalysis:
    cov = solve_station_covariances(spec, policy)
    waits = mean_waits(spec, policy, cov)
    mom = intervisit_moments(spec, cov) if policy == "exhaustive" else cycle_moments(spec, cov)
    return PollingAnalysis(policy, waits, cov, mom, pseudo_conservation_residual(spec, waits, policy),
                           spec.cycle_mean)


# discrete-time polling: PGF moment system

@dataclass(frozen=True)
class DiscretePollingSpec:
    """mu_i: mean work arriving at queue i per slot; r_i: mean switchover slots out of queue i."""

    mu: tuple
    r: tuple
    N: int = field(init=False)

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        r = np.atleast_1d(np.asarray(self.r, dtype=float))
        if mu.shape != r.shape or mu.ndim != 1 or len(mu) < 1:
            raise ValidationError("mu and r must be equal-length vectors")
        if np.any(mu <= 0) or np.any(mu >= 1) or np.any(r < 0):
            raise ValidationError("need 0 < mu_i < 1 and r_i >= 0")
        object.__setattr__(self, "mu", tuple(mu.tolist()))
        object.__setattr__(self, "r", tuple(r.tolist()))
        object.__setattr__(self, "N", len(mu))

    @property
    def mu_total(self) -> float:
        return float(sum(self.mu))

    @property
    def r_total(self) -> float:
        return float(sum(self.r))


def cyclic_station_moments(spec: DiscretePollingSpec) -> np.ndarray:
    """f_i(i) from the linear system f_i(i) = mu_i [r + sum_{k!=i} f_k(k)/(1-mu_k)]."""
    mu_tot = spec.mu_total
    if mu_tot >= 1:
        raise UnstableSystemError("discrete polling system", mu_tot)
    mu = np.asarray(spec.mu)
    N = spec.N
    A = np.eye(N) - np.outer(mu, 1.0 / (1 - mu)) * (1 - np.eye(N))
    return np.linalg.solve(A, mu * spec.r_total)


def cross_station_moments(spec: DiscretePollingSpec, f_diag=None) -> np.ndarray:
    """Matrix F with F[i, j] = f_i(j).

    f_i(j) = mu_j [ r/(1-mu) sum_{k=j+1}^{i-1} mu_k + sum_{k=j}^{i-1} r_k ] over cyclic arcs;
    the diagonal holds f_diag.
    """
    if f_diag is None:
        f_diag = cyclic_station_moments(spec)
    N = spec.N
    mu, r = np.asarray(spec.mu), np.asarray(spec.r)
    load = spec.r_total / (1 - spec.mu_total)
    F = np.diag(np.asarray(f_diag, dtype=float))
    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            n_mu = (i - j - 1) % N
            n_r = (i - j) % N
            mu_arc = sum(mu[(j + 1 + t) % N] for t in range(n_mu))
            r_arc = sum(r[(j + t) % N] for t in range(n_r))
            F[i, j] = mu[j] * (load * mu_arc + r_arc)
    return F
