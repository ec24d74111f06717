"""Single-station FIFO queues and the two-node tandem."""
from __future__ import annotations

import heapq
import warnings

import numpy as np

from ..distributions import Exponential
from ..errors import ValidationError
from ..queues import MODEL_KINDS
from .core import EventQueue, SimConfig, SimEstimate, SimResult, batch_means, make_rng, step_integrals, t_interval

SATURATION_WARN = 0.99


def _service_law(service):
    if isinstance(service, (int, float)):
        return Exponential(float(service))
    if not hasattr(service, "sample"):
        raise ValidationError(f"service must be a rate or a sampler, got {service!r}")
    return service


def _fifo_single_server(a: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lindley recursion in closed form: d_i - S_i = max_{k<=i}(a_k - S_{k-1})."""
    S = np.cumsum(s)
    S_prev = S - s
    d = np.maximum.accumulate(a - S_prev) + S
    return d - s, d


def _fifo_multi_server(a: np.ndarray, s: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    free = [0.0] * m
    start = np.empty(len(a))
    for i, (ai, si) in enumerate(zip(a.tolist(), s.tolist())):
        st = ai if ai > free[0] else free[0]
        start[i] = st
        heapq.heapreplace(free, st + si)
    return start, start + s


def _loss_system(a: np.ndarray, s: np.ndarray, m: int) -> np.ndarray:
    """Acceptance mask for m servers and no waiting room."""
    busy: list[float] = []
    ok = np.zeros(len(a), dtype=bool)
    for i, (ai, si) in enumerate(zip(a.tolist(), s.tolist())):
        while busy and busy[0] <= ai:
            heapq.heappop(busy)
        if len(busy) < m:
            heapq.heappush(busy, ai + si)
            ok[i] = True
    return ok


def _occupancy(up, down, edges):
    """Per-batch time integrals of the count of intervals [up, down) that are open."""
    times = np.concatenate([up, down])
    steps = np.concatenate([np.ones(len(up)), -np.ones(len(down))])
    order = np.argsort(times, kind="stable")
    times = times[order]
    level = np.cumsum(steps[order])
    times = np.concatenate([[0.0], times])
    level = np.concatenate([[0.0], level])
    return step_integrals(times, level, edges), step_integrals(times, (level == 0).astype(float), edges)


def _one_replication(kind, beta, law, m, cfg: SimConfig, r: int) -> dict:
    rng = make_rng(cfg.seed, r)
    n = cfg.horizon
    a = np.cumsum(rng.exponential(1.0 / beta, n))
    s = np.asarray(law.sample(rng, n), dtype=float)
    accepted = np.ones(n, dtype=bool)
    if kind == "MMInf":
        start, dep = a, a + s
    elif kind == "MMmm":
        accepted = _loss_system(a, s, m)
        start = a.copy()
        dep = np.where(accepted, a + s, a)
    elif m == 1:
        start, dep = _fifo_single_server(a, s)
    else:
        start, dep = _fifo_multi_server(a, s, m)

    w0 = cfg.warmup_count
    B = cfg.batch_count
    edges = np.linspace(a[w0], a[-1], B + 1)
    width = np.diff(edges)
    acc = accepted
    area_L, empty = _occupancy(a[acc], dep[acc], edges)
    area_Lq, _ = _occupancy(a[acc], start[acc], edges)
    post = slice(w0, n)
    keep = acc[post]
    sojourn = (dep - a)[post][keep]
    delay = (start - a)[post][keep]
    out = {
        "L": area_L / width,
        "Lq": area_Lq / width,
        "pi0": empty / width,
        "W": batch_means(sojourn, B),
        "Wq": batch_means(delay, B),
        "arrival_rate": np.diff(np.searchsorted(a, edges)) / width,
    }
    if kind == "MMmm":
        out["blocking"] = batch_means(~acc[post], B)
    return out


def simulate_single_queue(kind: str, beta: float, service, m: int = 1,
                          config: SimConfig = SimConfig()) -> SimResult:
    """FIFO station with Poisson(beta) arrivals.

    ``service`` is an exponential rate or any law with ``sample(rng, size)``.
    Time averages (L, Lq, pi0) are areas under the sample path over equal
    time batches after warmup; W and Wq are per-customer batch means in
    arrival order.
    """
    if kind not in MODEL_KINDS:
        raise ValidationError(f"unknown queue kind {kind!r}")
    if beta < 0:
        raise ValidationError("beta must be nonnegative")
    m = int(m)
    if beta == 0:
        zero = SimEstimate(0.0, 0.0, 0)
        est = {k: zero for k in ("L", "Lq", "W", "Wq", "arrival_rate")}
        est["pi0"] = SimEstimate(1.0, 0.0, 0)
        if kind == "MMmm":
            est["blocking"] = zero
        return SimResult(est, {}, {"served": 0})
    law = _service_law(service)
    runs = [_one_replication(kind, beta, law, m, config, r) for r in range(config.replications)]
    batches = {k: np.concatenate([run[k] for run in runs]) for k in runs[0]}
    est = {k: t_interval(v) for k, v in batches.items()}
    lam_eff = est["arrival_rate"].point * (1 - est["blocking"].point if "blocking" in est else 1.0)
    extra = {"served": config.horizon * config.replications,
             "little_residual": est["L"].point - lam_eff * est["W"].point}
    return SimResult(est, batches, extra)


def simulate_tandem(lam: float, mu1: float, mu2: float, config: SimConfig = SimConfig(),
                    window: int = 20) -> SimResult:
    """Two exponential FIFO stations in series, driven by an event heap.

    The horizon counts departures from the second station. Returns total L,
    per-station L, P(0,0) with batch-means intervals, and the time-weighted
    joint occupancy histogram over {0..window}^2 in ``extra["histogram"]``; index
    ``window`` collects every larger count.
    """
    if lam <= 0 or mu1 <= 0 or mu2 <= 0:
        raise ValidationError("tandem rates must be positive")
    runs = []
    hist = np.zeros((window + 1, window + 1))
    util = np.zeros(2)
    for r in range(config.replications):
        rng = make_rng(config.seed, r)
        n = config.horizon + 1
        inter = rng.exponential(1.0 / lam, n).tolist()
        serv1 = rng.exponential(1.0 / mu1, n).tolist()
        serv2 = rng.exponential(1.0 / mu2, n).tolist()
        ev = EventQueue()
        ev.push(inter[0], 0)
        n1 = n2 = 0
        arrived = started1 = started2 = done = 0
        times, lv1, lv2 = [0.0], [0], [0]
        t_warm = None
        while done < config.horizon:
            t, kind, _ = ev.pop()
            if kind == 0:
                arrived += 1
                n1 += 1
                if n1 == 1:
                    ev.push(t + serv1[started1], 1)
                    started1 += 1
                if arrived < n:
                    ev.push(t + inter[arrived], 0)
            elif kind == 1:
                n1 -= 1
                if n1:
                    ev.push(t + serv1[started1], 1)
                    started1 += 1
                n2 += 1
                if n2 == 1:
                    ev.push(t + serv2[started2], 2)
                    started2 += 1
            else:
                n2 -= 1
                done += 1
                if n2:
                    ev.push(t + serv2[started2], 2)
                    started2 += 1
                if t_warm is None and done >= config.warmup_count:
                    t_warm = t
            times.append(t)
            lv1.append(n1)
            lv2.append(n2)
        times = np.asarray(times)
        lv1 = np.asarray(lv1, dtype=float)
        lv2 = np.asarray(lv2, dtype=float)
        t_warm = t_warm if t_warm is not None else 0.0
        edges = np.linspace(t_warm, times[-1], config.batch_count + 1)
        width = np.diff(edges)
        runs.append({
            "L": step_integrals(times, lv1 + lv2, edges) / width,
            "L1": step_integrals(times, lv1, edges) / width,
            "L2": step_integrals(times, lv2, edges) / width,
            "P00": step_integrals(times, ((lv1 == 0) & (lv2 == 0)).astype(float), edges) / width,
        })
        dur = np.diff(np.append(times, times[-1]))
        mask = times >= t_warm
        i1 = np.minimum(lv1[mask].astype(int), window)
        i2 = np.minimum(lv2[mask].astype(int), window)
        np.add.at(hist, (i1, i2), dur[mask])
        span = times[-1] - t_warm
        util += [dur[mask][lv1[mask] > 0].sum() / span, dur[mask][lv2[mask] > 0].sum() / span]
    util /= config.replications
    if np.any(util >= SATURATION_WARN):
        warnings.warn(f"tandem station utilization {util.max():.4f} >= {SATURATION_WARN}; "
                      "estimates may not be stationary", RuntimeWarning, stacklevel=2)
    batches = {k: np.concatenate([run[k] for run in runs]) for k in runs[0]}
    est = {k: t_interval(v) for k, v in batches.items()}
    return SimResult(est, batches, {"histogram": hist / hist.sum(), "utilization": util.tolist()})
