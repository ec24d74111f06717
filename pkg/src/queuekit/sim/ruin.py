"""Replicated ruin-time walks L_{n+1} = L_n + X_{n+1} - drain, stopped at the first n with L_n <= 0."""
from __future__ import annotations

import numpy as np
from scipy import stats

from ..errors import DomainError, ValidationError
from .core import CONFIDENCE, SimEstimate, SimResult, make_rng

STEP_CAP = 10_000_000


def simulate_ruin(F, Ptilde, replications: int, seed: int, drain: int = 1,
                  step_cap: int = STEP_CAP) -> SimResult:
    """F and Ptilde need ``sample(rng, size)`` returning nonnegative integers.

    All replications advance together; a finished walk leaves the active set.
    E[T] gets a t interval; Var[T] an asymptotic interval from the fourth
    central moment.
    """
    if replications < 2:
        raise ValidationError("need at least 2 replications")
    if drain < 1:
        raise ValidationError("drain must be a positive integer")
    rng = make_rng(seed, 0)
    L = np.asarray(F.sample(rng, replications), dtype=np.int64)
    T = np.zeros(replications, dtype=np.int64)
    active = np.flatnonzero(L > 0)
    steps = 0
    while len(active):
        steps += 1
        if steps > step_cap:
            raise DomainError(f"{len(active)} walks still positive after {step_cap} steps")
        L[active] += np.asarray(Ptilde.sample(rng, len(active)), dtype=np.int64) - drain
        T[active] += 1
        active = active[L[active] > 0]
    x = T.astype(float)
    n = len(x)
    mean = float(x.mean())
    var = float(x.var(ddof=1))
    q = float(stats.t.ppf(0.5 + CONFIDENCE / 2, n - 1))
    m4 = float(np.mean((x - mean) ** 4))
    z = float(stats.norm.ppf(0.5 + CONFIDENCE / 2))
    est = {
        "ET": SimEstimate(mean, q * np.sqrt(var / n), n),
        "VarT": SimEstimate(var, z * np.sqrt(max(m4 - var * var, 0.0) / n), n),
    }
    return SimResult(est, {}, {"max_T": int(T.max()), "drain": drain})
