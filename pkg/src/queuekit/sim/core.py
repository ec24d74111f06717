"""Random streams, batch-means estimation, and the event heap shared by the simulators."""
from __future__ import annotations

import csv
import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..errors import ValidationError

CONFIDENCE = 0.95


def make_rng(seed: int, replication: int = 0) -> np.random.Generator:
    """PCG64 stream for replication r, seeded from SeedSequence([seed, r])."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & (2**64 - 1), int(replication)])))


@dataclass(frozen=True)
class SimConfig:
    seed: int = 42
    horizon: int = 1_000_000          # served customers (or events for event-counted runs)
    warmup: float = 0.2               # fraction of the horizon discarded
    replications: int = 1
    batch_count: int = 32

    def __post_init__(self):
        if self.horizon < 1:
            raise ValidationError("horizon must be positive")
        if not 0.0 <= self.warmup < 1.0:
            raise ValidationError("warmup must be a fraction in [0, 1)")
        if self.replications < 1:
            raise ValidationError("replications must be at least 1")
        if self.batch_count < 10:
            raise ValidationError("batch_count must be at least 10")
        if self.horizon * (1 - self.warmup) < 10 * self.batch_count:
            raise ValidationError(
                f"horizon {self.horizon} leaves fewer than 10 observations per batch for {self.batch_count} batches")

    @property
    def warmup_count(self) -> int:
        return int(self.horizon * self.warmup)


@dataclass(frozen=True)
class SimEstimate:
    point: float
    half_width_95: float
    samples: int

    def __post_init__(self):
        object.__setattr__(self, "point", float(self.point))
        object.__setattr__(self, "half_width_95", float(self.half_width_95))
        object.__setattr__(self, "samples", int(self.samples))

    def contains(self, target: float, widths: float = 1.0) -> bool:
        return abs(self.point - target) <= widths * self.half_width_95

    def as_dict(self) -> dict:
        return {"point": self.point, "half_width_95": self.half_width_95, "samples": self.samples}


def t_interval(values) -> SimEstimate:
    """Student-t interval over iid (batch or replication) means."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n == 0:
        return SimEstimate(0.0, 0.0, 0)
    point = float(v.mean())
    if n < 2:
        return SimEstimate(point, float("inf"), n)
    hw = float(stats.t.ppf(0.5 + CONFIDENCE / 2, n - 1) * v.std(ddof=1) / np.sqrt(n))
    return SimEstimate(point, hw, n)


def batch_means(values, batch_count: int) -> np.ndarray:
    """Means of batch_count contiguous equal-size batches (leftover tail dropped)."""
    v = np.asarray(values, dtype=float)
    size = len(v) // batch_count
    if size == 0:
        return np.zeros(0)
    return v[: size * batch_count].reshape(batch_count, size).mean(axis=1)


def step_integrals(times, levels, edges) -> np.ndarray:
    """Integrals of a right-continuous step function over [edges[b], edges[b+1]].

    ``levels[k]`` holds on [times[k], times[k+1]); the last level extends to
    the right. Returns one integral per batch interval.
    """
    times = np.asarray(times, dtype=float)
    levels = np.asarray(levels, dtype=float)
    cum = np.concatenate([[0.0], np.cumsum(levels[:-1] * np.diff(times))])
    edges = np.asarray(edges, dtype=float)
    k = np.clip(np.searchsorted(times, edges, side="right") - 1, 0, None)
    at = cum[k] + levels[k] * (edges - times[k])
    return np.diff(at)


@dataclass
class SimResult:
    estimates: dict
    batches: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __getitem__(self, key) -> SimEstimate:
        return self.estimates[key]

    def write_batches_csv(self, path):
        """One row per (metric, batch index, value)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "batch", "value"])
            for name in sorted(self.batches):
                for b, val in enumerate(self.batches[name]):
                    w.writerow([name, b, repr(float(val))])


class EventQueue:
    """Binary heap of (time, sequence, kind, payload); the sequence breaks ties deterministically."""

    def __init__(self):
        self._heap = []
        self._seq = itertools.count()

    def push(self, time: float, kind, payload=None):
        heapq.heappush(self._heap, (time, next(self._seq), kind, payload))

    def pop(self):
        t, _, kind, payload = heapq.heappop(self._heap)
        return t, kind, payload

    def __len__(self):
        return len(self._heap)

    def __bool__(self):
        return bool(self._heap)
