"""Finite discrete-time Markov chains.

Transition matrices are validated once on construction; every function
here is a pure function of its (immutable) inputs.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from math import gcd
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import ReducibleChainError, ValidationError

ROW_SUM_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic matrix with optional state labels.

    Rows that miss 1 by more than ``ROW_SUM_TOL`` are rejected, never
    renormalized.
    """

    rows: np.ndarray
    states: tuple = field(default=())

    def __post_init__(self):
        p = np.asarray(self.rows, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 1:
            raise ValidationError(f"transition matrix must be square with dimension >= 1, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValidationError("transition matrix has non-finite entries")
        neg = np.argwhere(p < 0)
        if len(neg):
            i, j = neg[0]
            raise ValidationError(f"negative entry P[{i},{j}]={p[i, j]!r}")
        sums = p.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
        if len(bad):
            i = bad[0]
            raise ValidationError(f"row {i} sums to {sums[i]!r}, not 1 (tolerance {ROW_SUM_TOL})")
        states = tuple(self.states) if self.states else tuple(range(p.shape[0]))
        if len(states) != p.shape[0]:
            raise ValidationError("number of state labels does not match matrix dimension")
        object.__setattr__(self, "rows", _readonly(p))
        object.__setattr__(self, "states", states)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def __getitem__(self, ij):
        return self.rows[ij]


@dataclass(frozen=True)
class Distribution:
    weights: np.ndarray
    states: tuple = field(default=())

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1:
            raise ValidationError("distribution must be a vector")
        if np.any(w < 0):
            raise ValidationError("distribution has negative weights")
        if abs(w.sum() - 1.0) > ROW_SUM_TOL * max(1, len(w)):
            raise ValidationError(f"distribution sums to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", _readonly(w))
        object.__setattr__(self, "states", tuple(self.states) if self.states else tuple(range(len(w))))

    def __len__(self):
        return len(self.weights)

    def __getitem__(self, i):
        return self.weights[i]


@dataclass(frozen=True)
class StateClassification:
    classes: tuple          # tuple of tuples of state indices
    closed: tuple           # one bool per class
    kinds: tuple            # "absorbing" | "recurrent" | "transient", one per state
    periods: tuple          # period of each class (1 = aperiodic)
    states: tuple

    @property
    def irreducible(self) -> bool:
        return len(self.classes) == 1

    def class_of(self, i: int) -> int:
        for k, c in enumerate(self.classes):
            if i in c:
                return k
        raise IndexError(i)

    def labelled_classes(self) -> list[tuple]:
        return [tuple(self.states[i] for i in c) for c in self.classes]


@dataclass(frozen=True)
class ErgodicityVerdict:
    kind: str               # "ergodic" | "periodic" | "reducible"
    period: int | None = None

    def __str__(self):
        return f"periodic({self.period})" if self.kind == "periodic" else self.kind


def as_matrix(P) -> TransitionMatrix:
    return P if isinstance(P, TransitionMatrix) else TransitionMatrix(np.asarray(P, dtype=float))


def n_step_matrix(P, n: int) -> TransitionMatrix:
    """P^n by repeated squaring; n = 0 gives the identity."""
    P = as_matrix(P)
    if n < 0 or int(n) != n:
        raise ValidationError(f"n must be a nonnegative integer, got {n!r}")
    result = np.eye(P.n)
    base = P.rows.copy()
    k = int(n)
    while k:
        if k & 1:
            result = result @ base
        base = base @ base
        k >>= 1
    # rounding drift only; keeps rows inside ROW_SUM_TOL for large n
    result = result / result.sum(axis=1, keepdims=True)
    return TransitionMatrix(result, P.states)


def evolve_distribution(P, pi0, n: int) -> Distribution:
    P = as_matrix(P)
    w = np.asarray(pi0.weights if isinstance(pi0, Distribution) else pi0, dtype=float)
    if w.shape != (P.n,):
        raise ValidationError(f"distribution of length {w.shape} does not match {P.n} states")
    Distribution(w)  # validates
    out = w @ n_step_matrix(P, n).rows
    return Distribution(out / out.sum(), P.states)


def _class_period(adj: np.ndarray, members: Sequence[int]) -> int:
    """Period of a class from BFS levels: gcd of level[u] + 1 - level[v] over arcs u->v."""
    inside = set(members)
    root = members[0]
    level = {root: 0}
    q = deque([root])
    d = 0
    while q:
        u = q.popleft()
        for v in np.flatnonzero(adj[u]):
            v = int(v)
            if v not in inside:
                continue
            if v not in level:
                level[v] = level[u] + 1
                q.append(v)
            else:
                d = gcd(d, abs(level[u] + 1 - level[v]))
    return d if d else 1


def communication_classes(P) -> StateClassification:
    P = as_matrix(P)
    adj = P.rows > 0
    _, labels = connected_components(adj, directed=True, connection="strong")
    # order classes by their smallest member for stable output
    groups: dict[int, list[int]] = {}
    for s, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(s)
    classes = sorted((tuple(g) for g in groups.values()), key=lambda c: c[0])
    closed, periods = [], []
    kinds = [""] * P.n
    for c in classes:
        outside = np.ones(P.n, dtype=bool)
        outside[list(c)] = False
        is_closed = not adj[np.ix_(list(c), outside)].any()
        closed.append(bool(is_closed))
        periods.append(_class_period(adj, c))
        for s in c:
            if P.rows[s, s] == 1.0:
                kinds[s] = "absorbing"
            else:
                kinds[s] = "recurrent" if is_closed else "transient"
    return StateClassification(tuple(classes), tuple(closed), tuple(kinds), tuple(periods), P.states)


def is_ergodic(P) -> ErgodicityVerdict:
    cls = communication_classes(P)
    if not cls.irreducible:
        return ErgodicityVerdict("reducible")
    d = cls.periods[0]
    if d > 1:
        return ErgodicityVerdict("periodic", d)
    return ErgodicityVerdict("ergodic", 1)


def stationary_distribution(P) -> Distribution:
    """Unique stationary law of an irreducible chain.

    Solves (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    """
    P = as_matrix(P)
    cls = communication_classes(P)
    if not cls.irreducible:
        raise ReducibleChainError(cls.labelled_classes())
    n = P.n
    A = P.rows.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.clip(pi, 0.0, None)
    return Distribution(pi / pi.sum(), P.states)


def two_state_matrix(p: float, q: float) -> TransitionMatrix:
    """The chain ((1-q, q), (p, 1-p)); its limit law is (p, q)/(p+q)."""
    return TransitionMatrix(np.array([[1 - q, q], [p, 1 - p]]))
