"""Analytic, simulated, and paired runs over the entries of a model file.

Each entry produces one block:

  verdicts   text verdicts (stability, ergodicity, classification)
  metrics    {name: {value, units, source}}
  residuals  {name: {value, units, source}}
  estimates  {name: {point, half_width_95, samples, units}}
  deltas     {name: {analytic, simulated, delta, half_width_95, within_ci, within_tolerance, units}}
  errors     structured per-model errors
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import birth_death as bd
from . import markov, pgf, polling, queues
from .errors import DomainError, QueueKitError, UnstableSystemError
from .modelfile import (ModelFile, birth_death_from_entry, discrete_polling_from_entry, pgf_from_dict,
                        polling_from_entry, service_from_entry)
from .queues import UNITS as QUEUE_UNITS
from .sim import SimConfig, simulate_polling, simulate_ruin, simulate_single_queue, simulate_tandem

DEFAULT_TOLERANCE = 3.0
RUIN_REPLICATIONS = 100_000

TAG_CK = "Chapman-Kolmogorov product"
TAG_STAT = "finite-chain stationary system"
TAG_BD_S = "birth-death normalization S"
TAG_BD_PI = "birth-death product-form law"
TAG_BD_GEN = "birth-death intensity matrix"
TAG_CDF = "waiting-time distribution"
TAG_EMB = "M/G/1 embedded-chain recursion"
TAG_TANDEM = "tandem product form"
TAG_BALANCE = "tandem balance equations"
TAG_COV = {"exhaustive": "exhaustive station-time covariance system", "gated": "gated station-time covariance system"}
TAG_WAIT = {"exhaustive": "exhaustive mean wait", "gated": "gated mean wait"}
TAG_MOM = {"exhaustive": "exhaustive intervisit moments", "gated": "gated cycle moments"}
TAG_PCL = {"exhaustive": "exhaustive pseudo-conservation law", "gated": "gated pseudo-conservation law"}
TAG_TAKAGI = "Takagi approximation (approximate)"
TAG_CYCLE = "mean cycle time"
TAG_FDIAG = "discrete polling fixed-point system"
TAG_FCROSS = "discrete polling cross moments"
TAG_PGF = "PGF derivatives at 1"
TAG_EXT = "extinction fixed point"
TAG_THETA = "ruin root"
TAG_THETA_D = "ruin root derivatives at 1"
TAG_RUIN = "ruin-time moments"


@dataclass
class Block:
    name: str
    kind: str
    verdicts: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    estimates: dict = field(default_factory=dict)
    deltas: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    def metric(self, key, value, units, source):
        self.metrics[key] = {"value": float(value), "units": units, "source": source}

    def residual(self, key, value, units, source):
        self.residuals[key] = {"value": float(value), "units": units, "source": source}

    def estimate(self, key, est, units):
        self.estimates[key] = {"point": est.point, "half_width_95": est.half_width_95,
                               "samples": est.samples, "units": units}

    def error(self, exc: Exception):
        if isinstance(exc, UnstableSystemError):
            self.verdicts["stability"] = f"{exc.verdict}, rho={exc.rho:.6g}"
            self.errors.append(exc.as_dict())
        else:
            self.errors.append({"error": type(exc).__name__, "message": str(exc)})

    def as_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "verdicts": self.verdicts, "metrics": self.metrics,
                "residuals": self.residuals, "estimates": self.estimates, "deltas": self.deltas,
                "errors": self.errors}


# analytic side

def _analyze_markov(e, b: Block):
    P = markov.TransitionMatrix(np.asarray(e["matrix"], dtype=float), tuple(e.get("states", ())))
    cls = markov.communication_classes(P)
    b.verdicts["ergodicity"] = str(markov.is_ergodic(P))
    b.verdicts["classes"] = [list(map(str, c)) for c in cls.labelled_classes()]
    b.verdicts["state_kinds"] = {str(s): k for s, k in zip(P.states, cls.kinds)}
    b.verdicts["periods"] = list(cls.periods)
    if cls.irreducible:
        pi = markov.stationary_distribution(P)
        for s, w in zip(P.states, pi.weights):
            b.metric(f"pi[{s}]", w, "probability", TAG_STAT)
        b.residual("stationarity", np.max(np.abs(pi.weights @ P.rows - pi.weights)), "probability", TAG_STAT)
    if "initial" in e:
        n = int(e.get("n", 1))
        dist = markov.evolve_distribution(P, e["initial"], n)
        for s, w in zip(P.states, dist.weights):
            b.metric(f"P(X_{n}={s})", w, "probability", TAG_CK)


def _analyze_birth_death(e, b: Block):
    spec = birth_death_from_entry(e)
    n_max = int(e.get("n_max", bd.DEFAULT_N_MAX))
    rec = bd.classify_recurrence(spec, n_max)
    b.verdicts["recurrence"] = rec.verdict
    norm = bd.normalization_S(spec, n_max)
    b.verdicts["ergodic"] = bool(rec.verdict == "recurrent" and not norm.diverges)
    if norm.diverges:
        b.verdicts["S"] = "diverges"
        return
    b.metric("S", norm.value, "dimensionless", TAG_BD_S)
    dist = bd.stationary_distribution(spec, n_max)
    for n, w in enumerate(dist.weights[:10]):
        b.metric(f"pi[{n}]", w, "probability", TAG_BD_PI)
    b.metric("tail_mass", dist.tail_mass, "probability", TAG_BD_PI)
    n_states = int(e.get("n_states", min(len(dist.weights), 200)))
    if n_states >= 2:
        L = bd.build_intensity_matrix(spec, n_states)
        check = bd.validate_intensity_matrix(L)
        b.verdicts["intensity_matrix"] = str(check)
        nu = dist.weights[:n_states]
        b.residual("nu_Lambda", np.max(np.abs(nu @ L)), "probability/time", TAG_BD_GEN)


def _queue_spec(e) -> queues.QueueModelSpec:
    moments = e.get("service_moments")
    law = service_from_entry(e)
    if e["model"] == "MG1" and moments is None and law is not None:
        moments = (law.mean, law.second_moment)
    return queues.QueueModelSpec(e["model"], e["beta"], e.get("delta"), e.get("m", 1),
                                 tuple(moments) if moments else None)


def _analyze_queue(e, b: Block):
    spec = _queue_spec(e)
    try:
        pm = queues.metrics(spec)
    except UnstableSystemError as exc:
        b.error(exc)
        return
    b.verdicts["stability"] = "stable"
    for k, v in pm.as_dict().items():
        if k in QUEUE_UNITS:
            b.metric(k, v, QUEUE_UNITS[k], pm.source)
    b.residual("little_L", pm.L - pm.arrival_rate * pm.W, "customers", pm.source)
    if spec.kind in ("MM1", "MMm"):
        for t in e.get("t", []):
            w, wq = queues.waiting_time_cdf(spec, t)
            b.metric(f"W({t:g})", w, "probability", TAG_CDF)
            b.metric(f"Wq({t:g})", wq, "probability", TAG_CDF)
    law = service_from_entry(e)
    if spec.kind == "MG1" and law is not None and "j_max" in e:
        j_max = int(e["j_max"])
        ap = queues.mg1_arrival_probs(spec.beta, law, j_max)
        dist = queues.mg1_embedded_stationary(ap, j_max)
        for j, w in enumerate(dist.weights[:10]):
            b.metric(f"pi_embedded[{j}]", w, "probability", TAG_EMB)
        b.metric("arrival_probs_tail", ap.tail_mass, "probability", TAG_EMB)


def _analyze_tandem(e, b: Block):
    try:
        t = queues.tandem_metrics(e["lambda"], e["mu1"], e["mu2"])
    except UnstableSystemError as exc:
        b.error(exc)
        return
    b.verdicts["stability"] = "stable"
    b.metric("L", t.L, "customers", TAG_TANDEM)
    b.metric("L1", t.L1, "customers", TAG_TANDEM)
    b.metric("L2", t.L2, "customers", TAG_TANDEM)
    b.metric("W", t.W, "time", TAG_TANDEM)
    b.metric("P00", t.joint(0, 0), "probability", TAG_TANDEM)
    b.residual("balance", t.balance_residual(20, 20), "probability/time", TAG_BALANCE)


def _policies(e) -> list[str]:
    p = e.get("policy", "both")
    return list(polling.POLICIES) if p == "both" else [p]


def _analyze_polling(e, b: Block):
    spec = polling_from_entry(e)
    try:
        spec.check_stable()
    except UnstableSystemError as exc:
        b.error(exc)
        return
    b.verdicts["stability"] = "stable"
    b.metric("rho", spec.rho, "dimensionless", TAG_CYCLE)
    b.metric("EC", spec.cycle_mean, "time", TAG_CYCLE)
    for pol in _policies(e):
        res = polling.analyze(spec, pol)
        for i, w in enumerate(res.waits):
            b.metric(f"{pol}.W[{i}]", w, "time", TAG_WAIT[pol])
        label = "I" if pol == "exhaustive" else "C"
        for i in range(spec.N):
            b.metric(f"{pol}.{label}[{i}]", res.moments.mean[i], "time", TAG_MOM[pol])
            b.metric(f"{pol}.{label}2[{i}]", res.moments.second[i], "time^2", TAG_MOM[pol])
            for j in range(spec.N):
                b.metric(f"{pol}.r[{i}][{j}]", res.covariances.r[i, j], "time^2", TAG_COV[pol])
        b.residual(f"{pol}.pseudo_conservation", res.pcl_residual, "time", TAG_PCL[pol])
        b.residual(f"{pol}.covariance_system", res.covariances.residual, "time^2", TAG_COV[pol])
    try:
        for i, w in enumerate(polling.takagi_approx_waits(spec)):
            b.metric(f"takagi.W[{i}]", w, "time", TAG_TAKAGI)
    except DomainError as exc:
        b.error(exc)


def _analyze_discrete_polling(e, b: Block):
    spec = discrete_polling_from_entry(e)
    f = polling.cyclic_station_moments(spec)
    F = polling.cross_station_moments(spec, f)
    for i in range(spec.N):
        for j in range(spec.N):
            b.metric(f"f[{i}]({j})", F[i, j], "customers", TAG_FDIAG if i == j else TAG_FCROSS)


def _analyze_pgf(e, b: Block):
    g = pgf_from_dict(e["law"])
    mom = pgf.pgf_moments(g)
    b.metric("mean", mom.mean, "count", TAG_PGF)
    b.metric("variance", mom.variance, "count^2", TAG_PGF)
    b.metric("mean_error", mom.mean_error, "count", TAG_PGF)
    root = pgf.extinction_fixed_point(g)
    if root is None:
        b.verdicts["extinction_root"] = "none (mean <= 1)"
    else:
        b.metric("extinction_root", root, "probability", TAG_EXT)


def _analyze_ruin(e, b: Block):
    F = pgf_from_dict(e["initial"])
    Pt = pgf_from_dict(e["ptilde"])
    ET, VT = pgf.ruin_time_moments(F, Pt)
    b.metric("ET", ET, "steps", TAG_RUIN)
    b.metric("VarT", VT, "steps^2", TAG_RUIN)
    d1, d2 = pgf.theta_derivatives_at_one(Pt)
    b.metric("theta'(1)", d1, "dimensionless", TAG_THETA_D)
    b.metric("theta''(1)", d2, "dimensionless", TAG_THETA_D)
    for w in e.get("w", []):
        b.metric(f"theta({w:g})", pgf.ruin_root_theta(Pt, w), "dimensionless", TAG_THETA)


ANALYZERS = {
    "markov_chain": _analyze_markov, "birth_death": _analyze_birth_death, "queue": _analyze_queue,
    "tandem": _analyze_tandem, "polling": _analyze_polling, "discrete_polling": _analyze_discrete_polling,
    "pgf": _analyze_pgf, "ruin": _analyze_ruin,
}


# simulation side

def _simulate_queue(e, b: Block, cfg: SimConfig):
    law = service_from_entry(e)
    if law is None:
        raise DomainError("simulation needs a service law (delta or service)")
    res = simulate_single_queue(e["model"], e["beta"], law, e.get("m", 1), cfg)
    for k, est in res.estimates.items():
        b.estimate(k, est, QUEUE_UNITS.get(k, "customers/time"))


def _simulate_tandem(e, b: Block, cfg: SimConfig):
    res = simulate_tandem(e["lambda"], e["mu1"], e["mu2"], cfg)
    units = {"L": "customers", "L1": "customers", "L2": "customers", "P00": "probability"}
    for k, est in res.estimates.items():
        b.estimate(k, est, units[k])


def _simulate_polling(e, b: Block, cfg: SimConfig):
    spec = polling_from_entry(e)
    for pol in _policies(e):
        res = simulate_polling(spec, pol, e.get("routing", "cyclic"), cfg,
                               route_table=e.get("route_table"), route_probs=e.get("route_probs"))
        for k, est in res.estimates.items():
            units = "time^2" if k[1] == "2" else "time"
            b.estimate(f"{pol}.{k}", est, units)


def _simulate_ruin(e, b: Block, cfg: SimConfig):
    res = simulate_ruin(pgf_from_dict(e["initial"]), pgf_from_dict(e["ptilde"]),
                        int(e.get("replications", RUIN_REPLICATIONS)), cfg.seed, int(e.get("drain", 1)))
    b.estimate("ET", res["ET"], "steps")
    b.estimate("VarT", res["VarT"], "steps^2")


SIMULATORS = {"queue": _simulate_queue, "tandem": _simulate_tandem, "polling": _simulate_polling,
              "ruin": _simulate_ruin}


def _guarded(fn, e, b: Block, *args):
    try:
        fn(e, b, *args)
    except QueueKitError as exc:
        b.error(exc)


def _report(mf: ModelFile, command: str, blocks: list[Block], **meta) -> dict:
    out = {"version": mf.version, "command": command, "models": [b.as_dict() for b in blocks]}
    out.update(meta)
    return out


def run_analyze(mf: ModelFile) -> dict:
    blocks = []
    for e in mf.by_name():
        b = Block(e["name"], e["kind"])
        _guarded(ANALYZERS[e["kind"]], e, b)
        blocks.append(b)
    return _report(mf, "analyze", blocks)


def run_simulate(mf: ModelFile) -> dict:
    cfg = mf.sim
    blocks = []
    for e in mf.by_name():
        b = Block(e["name"], e["kind"])
        sim = SIMULATORS.get(e["kind"])
        if sim is None:
            b.verdicts["simulation"] = "not applicable"
        else:
            _guarded(sim, e, b, cfg)
        blocks.append(b)
    return _report(mf, "simulate", blocks, seed=cfg.seed, horizon=cfg.horizon)


def _analytic_key(kind: str, key: str) -> str | None:
    """Analytic metric paired with a simulated estimate key, if any."""
    if kind == "queue":
        return key if key in ("L", "Lq", "W", "Wq", "pi0", "blocking") else None
    if kind == "tandem":
        return key
    if kind == "polling":
        pol, _, stat = key.partition(".")
        if stat.startswith("W["):
            return key
        if pol == "exhaustive" and stat[:2] in ("I[", "I2"):
            return key
        if pol == "gated" and stat[:2] in ("C[", "C2"):
            return key
        return None
    if kind == "ruin":
        return key
    return None


def run_validate(mf: ModelFile, tolerance: float = DEFAULT_TOLERANCE, bias: float = 0.0) -> tuple[dict, bool]:
    """Paired analytic and simulated runs; returns (report, breached).

    ``bias`` is added to every analytic value before comparison (harness self-test hook).
    A metric breaches when |analytic - simulated| > tolerance * half_width_95.
    An entry that cannot be validated (unstable, or no simulator) counts as a breach.
    """
    cfg = mf.sim
    blocks = []
    breached = False
    for e in mf.by_name():
        b = Block(e["name"], e["kind"])
        _guarded(ANALYZERS[e["kind"]], e, b)
        sim = SIMULATORS.get(e["kind"])
        if b.errors and any(err.get("error") == "unstable" for err in b.errors):
            b.verdicts["validation"] = "not run: unstable model"
            breached = True
            blocks.append(b)
            continue
        if sim is None:
            b.verdicts["validation"] = "not applicable"
            blocks.append(b)
            continue
        _guarded(sim, e, b, cfg)
        for key, est in sorted(b.estimates.items()):
            akey = _analytic_key(e["kind"], key)
            if akey is None or akey not in b.metrics:
                continue
            analytic = b.metrics[akey]["value"] + bias
            delta = analytic - est["point"]
            hw = est["half_width_95"]
            ok = abs(delta) <= tolerance * hw if math.isfinite(hw) else False
            b.deltas[key] = {"analytic": analytic, "simulated": est["point"], "delta": delta,
                             "half_width_95": hw, "within_ci": abs(delta) <= hw,
                             "within_tolerance": ok, "units": est["units"]}
            breached |= not ok
        if b.errors:
            breached = True
        b.verdicts["validation"] = "pass" if all(d["within_tolerance"] for d in b.deltas.values()) and not b.errors else "breach"
        blocks.append(b)
    return _report(mf, "validate", blocks, seed=cfg.seed, horizon=cfg.horizon, tolerance=tolerance), breached
