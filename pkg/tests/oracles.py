"""Independent reference computations used only by the tests.

Nothing here imports the routine it is checking; each oracle takes a
different numerical route to the same quantity.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq


def naive_power(P, n):
    out = np.eye(len(P))
    for _ in range(n):
        out = out @ P
    return out


def enumerate_reachability(P, depth=20):
    """reach[x][y]: some path x -> y of length 1..depth has positive probability.

    Paths are enumerated layer by layer on the support graph.
    """
    n = len(P)
    succ = [[j for j in range(n) if P[i][j] > 0] for i in range(n)]
    reach = []
    for x in range(n):
        seen, frontier = set(), {x}
        for _ in range(depth):
            frontier = {y for s in frontier for y in succ[s]}
            seen |= frontier
        reach.append(seen)
    return reach


def first_return_mass(P, x, depth=20):
    """P(return to x within depth steps), summing taboo path probabilities."""
    P = np.asarray(P, dtype=float)
    v = P[x].copy()
    total = v[x]
    v[x] = 0.0
    for _ in range(depth - 1):
        v = v @ P
        total += v[x]
        v[x] = 0.0
    return total


def enumeration_classify(P, depth=20):
    """Per-state kind by closed-class reasoning over enumerated paths."""
    n = len(P)
    reach = enumerate_reachability(P, depth)
    kinds = []
    for x in range(n):
        if P[x][x] == 1.0:
            kinds.append("absorbing")
        elif all(x in reach[y] for y in reach[x]) and x in reach[x]:
            kinds.append("recurrent")
        else:
            kinds.append("transient")
    return kinds


def enumeration_classes(P, depth=20):
    n = len(P)
    reach = enumerate_reachability(P, depth)
    groups = {}
    for x in range(n):
        key = frozenset([x] + [y for y in reach[x] if x in reach[y]])
        groups[key] = None
    return {frozenset(g) for g in groups}


def return_time_period(P, x):
    """gcd of n <= 3 n_states^2 with P^n[x, x] > 0; 0 when x never returns."""
    n = len(P)
    g, M = 0, np.eye(n)
    B = (np.asarray(P) > 0).astype(float)
    for k in range(1, 3 * n * n + 1):
        M = np.minimum(M @ B, 1.0)
        if M[x, x] > 0:
            g = math.gcd(g, k)
    return g


def eig_stationary(P):
    w, V = np.linalg.eig(np.asarray(P).T)
    v = np.real(V[:, np.argmin(np.abs(w - 1.0))])
    return v / v.sum()


def erlang_b_exact(m, rho):
    """Exact rational Erlang-B for rational rho."""
    rho = Fraction(rho)
    terms = [Fraction(1)]
    for n in range(1, m + 1):
        terms.append(terms[-1] * rho / n)
    return terms[-1] / sum(terms)


def erlang_c_exact(m, rho):
    rho = Fraction(rho)
    b = erlang_b_exact(m, rho)
    return b / (1 - rho / m * (1 - b))


def mg1_pgf_identity_gap(pi, a, z):
    """|pi(z) - pi0 A(z)(z-1)/(z-A(z))| at a point z in (0,1)."""
    pz = np.polyval(np.asarray(pi)[::-1], z)
    Az = np.polyval(np.asarray(a)[::-1], z)
    return abs(pz - pi[0] * Az * (z - 1.0) / (z - Az))


def power_iteration_stationary(Q, iters=20000):
    v = np.full(len(Q), 1.0 / len(Q))
    for _ in range(iters):
        v = v @ Q
    return v


def discrete_fixed_point(mu, r, iters=10_000):
    """f_i(i) by Jacobi sweeps of f_i = mu_i[r + sum_{k!=i} f_k/(1-mu_k)]."""
    mu = np.asarray(mu, float)
    rt = float(np.sum(r))
    f = np.zeros(len(mu))
    for _ in range(iters):
        s = f / (1 - mu)
        f = mu * (rt + s.sum() - s)
    return f


def discrete_cross_by_recursion(mu, r, f_diag):
    """Walk the cycle: f_{i+1}(j) = f_i(j) + mu_j[f_i(i)/(1-mu_i) + r_i], f_{i+1}(i) = r_i mu_i."""
    mu, r = np.asarray(mu, float), np.asarray(r, float)
    N = len(mu)
    F = np.full((N, N), np.nan)
    for j in range(N):
        F[(j + 1) % N, j] = r[j] * mu[j]
        i = (j + 1) % N
        while (i + 1) % N != j:
            nxt = (i + 1) % N
            F[nxt, j] = F[i, j] + mu[j] * (f_diag[i] / (1 - mu[i]) + r[i])
            i = nxt
    np.fill_diagonal(F, f_diag)
    return F


def root_below_one(g, lo=0.0, hi=1.0 - 1e-9):
    """Smallest root of g(s)=s in [0,1) by bracketing."""
    return brentq(lambda s: g(s) - s, lo, hi, xtol=1e-15, rtol=1e-15)


def exhaustive_single_queue_r11(lam, b1, b2, v_mean, v_var):
    """Var of the exhaustive station time (switchover then visit) at N=1, by conditioning on the switchover."""
    rho = lam * b1
    return v_var / (1 - rho) ** 2 + lam * b2 * v_mean / (1 - rho) ** 3


def gated_single_queue_r11(lam, b1, b2, v_mean, v_var):
    """Var of the gated station time (visit then switchover) at N=1; the cycle equals the station time."""
    rho = lam * b1
    ec = v_mean / (1 - rho)
    return (v_var + lam * b2 * ec) / (1 - rho ** 2)


def vacation_wait(lam, b1, b2, v_mean, v2):
    """M/G/1 with multiple vacations: P-K wait plus residual vacation."""
    rho = lam * b1
    return lam * b2 / (2 * (1 - rho)) + v2 / (2 * v_mean)


def richardson(quotient, h=1e-2, levels=4):
    """Extrapolate a first-order accurate difference quotient q(h) to h -> 0 over halving steps."""
    T = [[quotient(h / 2 ** k)] for k in range(levels)]
    for lvl in range(1, levels):
        for k in range(lvl, levels):
            T[k].append(T[k][lvl - 1] + (T[k][lvl - 1] - T[k - 1][lvl - 1]) / (2 ** lvl - 1))
    return T[-1][-1]


def left_first_derivative(f, x, h=1e-2):
    return richardson(lambda t: (f(x) - f(x - t)) / t, h)


def left_second_derivative(f, x, h=1e-2):
    return richardson(lambda t: (f(x) - 2 * f(x - t) + f(x - 2 * t)) / (t * t), h)
