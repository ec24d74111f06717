"""Single-server polling simulation under exhaustive or gated service."""
from __future__ import annotations

from bisect import bisect_right

import numpy as np

from ..distributions import two_moment_law
from ..errors import ValidationError
from ..polling import POLICIES, PollingSpec
from .core import SimConfig, SimResult, batch_means, make_rng, t_interval

ROUTINGS = ("cyclic", "periodic", "random")


class _Stream:
    """Poisson arrivals with attached service times, generated lazily in growing chunks."""

    def __init__(self, lam: float, law, rng: np.random.Generator):
        self.lam = lam
        self.law = law
        self.rng = rng
        self.A: list[float] = []
        self.S: list[float] = []
        self.p = 0

    def _grow(self):
        k = max(4096, len(self.A))
        last = self.A[-1] if self.A else 0.0
        self.A.extend((last + np.cumsum(self.rng.exponential(1.0 / self.lam, k))).tolist())
        self.S.extend(np.asarray(self.law.sample(self.rng, k), dtype=float).tolist())

    def serve(self, t: float, gated: bool, out: list) -> float:
        """Serve from time t, append waits to ``out``, return the visit end time."""
        A, S = self.A, self.S
        p = self.p
        if gated:
            while not A or A[-1] <= t:
                self._grow()
                A, S = self.A, self.S
            stop = bisect_right(A, t, p)
            for k in range(p, stop):
                out.append(t - A[k])
                t += S[k]
            self.p = stop
            return t
        while True:
            if p >= len(A):
                self._grow()
                A, S = self.A, self.S
            a = A[p]
            if a > t:
                break
            out.append(t - a)
            t += S[p]
            p += 1
        self.p = p
        return t


class _Draws:
    """Chunked sampler so per-visit switchover draws avoid per-call generator overhead."""

    def __init__(self, law, rng):
        self.law = law
        self.rng = rng
        self.buf: list[float] = []
        self.i = 0

    def next(self) -> float:
        if self.i >= len(self.buf):
            self.buf = np.asarray(self.law.sample(self.rng, 4096), dtype=float).tolist()
            self.i = 0
        self.i += 1
        return self.buf[self.i - 1]


def _router(routing: str, N: int, table, probs, rng):
    if routing == "cyclic":
        return lambda k, q: (q + 1) % N
    if routing == "periodic":
        if not table or any(not 0 <= int(x) < N for x in table) or set(int(x) for x in table) != set(range(N)):
            raise ValidationError("periodic routing needs a table visiting every queue index 0..N-1")
        seq = [int(x) for x in table]
        return lambda k, q: seq[(k + 1) % len(seq)]
    if routing == "random":
        p = np.asarray(probs if probs is not None else np.full(N, 1.0 / N), dtype=float)
        if p.shape != (N,) or np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
            raise ValidationError("random routing needs N probabilities summing to 1")
        draws = iter(())

        def nxt(k, q):
            nonlocal draws
            try:
                return next(draws)
            except StopIteration:
                draws = iter(rng.choice(N, size=4096, p=p).tolist())
                return next(draws)
        return nxt
    raise ValidationError(f"unknown routing {routing!r}; expected one of {ROUTINGS}")


def _station_covariances(T: np.ndarray, N: int) -> np.ndarray:
    """r_ii = Var T_i; r_ij = Cov(T_i, most recent earlier T_j) from a cyclic station-time sequence."""
    K = (len(T) // N) * N
    T = T[:K]
    r = np.zeros((N, N))
    for i in range(N):
        xi = T[i::N]
        r[i, i] = xi.var(ddof=1)
        for j in range(N):
            if j == i:
                continue
            lag = (i - j) % N
            pos = np.arange(i, K, N)
            pos = pos[pos - lag >= 0]
            x, y = T[pos], T[pos - lag]
            r[i, j] = float(np.mean((x - x.mean()) * (y - y.mean())))
    return r


def simulate_polling(spec: PollingSpec, policy: str, routing: str = "cyclic", config: SimConfig = SimConfig(),
                     route_table=None, route_probs=None, service_laws=None, switch_laws=None) -> SimResult:
    """Serve until ``config.horizon`` customers have completed service.

    Service and switchover laws default to two-moment fits (deterministic
    for zero variance, gamma otherwise). The switchover after a visit to
    queue q follows queue q's law whatever the next queue is.

    Estimates: ``W[i]`` mean wait before service, ``I[i]`` and ``I2[i]``
    intervisit moments, ``C[i]`` and ``C2[i]`` cycle moments. For cyclic
    routing ``extra["covariances"]`` holds the station-time covariance
    estimate under the policy's station-time definition.
    """
    if policy not in POLICIES:
        raise ValidationError(f"unknown policy {policy!r}")
    N = spec.N
    svc = service_laws or [two_moment_law(m1, m2) for m1, m2 in zip(spec.b1, spec.b2)]
    sw = switch_laws or [two_moment_law(m1, m2) for m1, m2 in zip(spec.s1, spec.s2)]
    if len(svc) != N or len(sw) != N:
        raise ValidationError("need one service law and one switchover law per queue")
    B = config.batch_count
    runs = []
    cov_runs = []
    gated = policy == "gated"
    for rep in range(config.replications):
        rng = make_rng(config.seed, rep)
        streams = [_Stream(spec.lam[i], svc[i], rng) for i in range(N)]
        switch = [_Draws(sw[i], rng) for i in range(N)]
        route = _router(routing, N, route_table, route_probs, rng)
        waits = [[] for _ in range(N)]
        starts = [[] for _ in range(N)]
        ends = [[] for _ in range(N)]
        V, R = [], []
        t = 0.0
        q = int(route_table[0]) if routing == "periodic" else 0
        served = 0
        k = 0
        warm = None                   # (visit index, per-queue wait counts, per-queue visit counts)
        while served < config.horizon:
            t0 = t
            w = waits[q]
            before = len(w)
            t = streams[q].serve(t, gated, w)
            starts[q].append(t0)
            ends[q].append(t)
            served += len(w) - before
            r = switch[q].next()
            V.append(t - t0)
            R.append(r)
            t += r
            k += 1
            if warm is None and served >= config.warmup_count:
                warm = (k, [len(x) for x in waits], [len(x) for x in starts])
            q = route(k - 1, q)
        run = {}
        for i in range(N):
            w_i = np.asarray(waits[i][warm[1][i]:])
            s_k = np.asarray(starts[i][warm[2][i]:])
            e_k = np.asarray(ends[i][warm[2][i]:])
            run[f"W[{i}]"] = batch_means(w_i, B)
            inter = s_k[1:] - e_k[:-1]
            cyc = np.diff(s_k)
            run[f"I[{i}]"] = batch_means(inter, B)
            run[f"I2[{i}]"] = batch_means(inter ** 2, B)
            run[f"C[{i}]"] = batch_means(cyc, B)
            run[f"C2[{i}]"] = batch_means(cyc ** 2, B)
        runs.append(run)
        if routing == "cyclic":
            V_a, R_a = np.asarray(V), np.asarray(R)
            first = warm[0] + (-warm[0]) % N      # first post-warmup visit to queue 0
            if policy == "exhaustive":
                T = R_a[first - 1 : -1] + V_a[first:]
            else:
                T = V_a[first:] + R_a[first:]
            cov_runs.append(_station_covariances(T, N))
    batches = {k: np.concatenate([run[k] for run in runs]) for k in runs[0]}
    est = {k: t_interval(v) for k, v in batches.items()}
    extra = {"routing": routing, "policy": policy}
    if cov_runs:
        extra["covariances"] = np.mean(cov_runs, axis=0)
    return SimResult(est, batches, extra)
