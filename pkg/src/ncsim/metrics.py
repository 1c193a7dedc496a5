"""Estimation-error metrics as functions of information age, plus the
per-run accumulator that turns instantaneous samples into windowed means.

The mean squared estimation error of a loop whose freshest sample is
``delta`` periods old has the closed form

    MSE(delta) = sum_{d=1..delta} tr((A')^{d-1} A^{d-1} Sigma)

and its normalized variant divides by the one-period value, making loops
with different state dimensions and units comparable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .systems import LtiSystem

__all__ = [
    "mse_of_age",
    "nmse_of_age",
    "error_covariance",
    "MseTable",
    "AoiTracker",
    "MetricsAccumulator",
]

# Count of age values whose MSE overflowed to +inf; diagnostic only.
overflow_events = 0


def mse_of_age(sys: LtiSystem, delta: int) -> float:
    """Closed-form mean squared estimation error at age ``delta``.

    Returns 0 for delta = 0.  Overflow for extreme ages of unstable
    systems is reported as +inf.
    """
    global overflow_events
    if delta < 0:
        raise ConfigurationError("age must be non-negative")
    A, sigma = sys.A, sys.noise_cov
    G = np.eye(sys.n)  # (A')^{d-1} A^{d-1}
    total = 0.0
    for _ in range(delta):
        total += float(np.trace(G @ sigma))
        G = A.T @ G @ A
        if not np.isfinite(total):
            overflow_events += 1
            return math.inf
    return total


def error_covariance(sys: LtiSystem, delta: int) -> np.ndarray:
    """Covariance of the estimation error at age ``delta`` (delta >= 1):
    sum of A^{d-1} Sigma (A^{d-1})' over d = 1..delta."""
    if delta < 1:
        raise ConfigurationError("error_covariance needs age >= 1")
    A, sigma = sys.A, sys.noise_cov
    Ak = np.eye(sys.n)
    total = np.zeros((sys.n, sys.n))
    for _ in range(delta):
        total += Ak @ sigma @ Ak.T
        Ak = A @ Ak
    return total


def nmse_of_age(sys: LtiSystem, delta: int) -> float:
    """MSE at age ``delta`` divided by the MSE at age 1."""
    base = float(np.trace(sys.noise_cov))
    if base <= 0:
        raise ConfigurationError(
            "nMSE undefined: noise covariance has zero trace")
    return mse_of_age(sys, delta) / base


class MseTable:
    """Memoized MSE(age) and nMSE(age) for one system.

    The simulator queries these once per loop per period, so values are
    grown on demand and cached.
    """

    def __init__(self, sys: LtiSystem):
        self.sys = sys
        self._base = float(np.trace(sys.noise_cov))
        if self._base <= 0:
            raise ConfigurationError(
                "nMSE undefined: noise covariance has zero trace")
        self._mse = [0.0]  # index = age
        self._G = np.eye(sys.n)

    def mse(self, delta: int) -> float:
        while len(self._mse) <= delta:
            if not math.isfinite(self._mse[-1]):
                # Once overflowed the tail is +inf; stop touching _G, whose
                # inf entries would otherwise breed nans against zeros in A.
                self._mse.append(math.inf)
                continue
            step = float(np.trace(self._G @ self.sys.noise_cov))
            total = self._mse[-1] + step
            self._mse.append(total if math.isfinite(total) else math.inf)
            self._G = self.sys.A.T @ self._G @ self.sys.A
        return self._mse[delta]

    def nmse(self, delta: int) -> float:
        return self.mse(delta) / self._base


@dataclass
class AoiTracker:
    """Generation step of the freshest accepted sample, and the age it
    implies at a given step.  Accepts only strictly fresher samples."""

    last_gen_step: int = 0

    def age(self, step: int) -> int:
        return max(1, step - self.last_gen_step)

    def update(self, gen_step: int) -> bool:
        if gen_step > self.last_gen_step:
            self.last_gen_step = gen_step
            return True
        return False


class MetricsAccumulator:
    """Windowed per-loop and network-wide sums of age, error and cost.

    Only steps t with ``t_start <= t <= t_end`` contribute.  Transmission
    and reception counters are gated by the same window so that resource
    fractions describe the evaluated interval.
    """

    def __init__(self, n_loops: int, t_start: int, t_end: int,
                 classes: list[str] | None = None):
        if t_end < t_start:
            raise ConfigurationError("empty evaluation window")
        self.n_loops = n_loops
        self.t_start = t_start
        self.t_end = t_end
        self.classes = classes or ["?"] * n_loops
        # Plain lists: these are bumped once per loop per period, where
        # scalar indexing into numpy arrays is measurably slower.
        self.sum_aoi = [0.0] * n_loops
        self.sum_mse = [0.0] * n_loops
        self.sum_nmse = [0.0] * n_loops
        self.sum_cost = [0.0] * n_loops
        self.counts = [0] * n_loops
        self.tx = [0] * n_loops
        self.rx = [0] * n_loops
        self.diverged = np.zeros(n_loops, dtype=bool)

    def in_window(self, t: int) -> bool:
        return self.t_start <= t <= self.t_end

    def record_step(self, loop: int, t: int, aoi: int, mse: float,
                    nmse: float, cost: float):
        if not self.t_start <= t <= self.t_end:
            return
        # A diverged loop can produce nan (inf times a zero weight); fold it
        # into +inf so windowed sums stay meaningful and reportable.
        self.sum_aoi[loop] += aoi
        self.sum_mse[loop] += mse if mse == mse else math.inf
        self.sum_nmse[loop] += nmse if nmse == nmse else math.inf
        self.sum_cost[loop] += cost if cost == cost else math.inf
        self.counts[loop] += 1

    def record_tx(self, loop: int, t: int):
        if self.t_start <= t <= self.t_end:
            self.tx[loop] += 1

    def record_rx(self, loop: int, t: int):
        if self.t_start <= t <= self.t_end:
            self.rx[loop] += 1

    def flag_diverged(self, loop: int):
        self.diverged[loop] = True

    def finalize(self) -> dict:
        """Per-loop and network-wide means, delivery ratios and per-class
        shares of successful deliveries."""
        expected = self.t_end - self.t_start + 1
        counts = np.asarray(self.counts)
        if np.any(counts == 0):
            raise ConfigurationError("no samples fell inside the window")
        c = counts.astype(float)
        tx = np.asarray(self.tx)
        rx = np.asarray(self.rx)
        per_loop = {
            "aoi_mean": np.asarray(self.sum_aoi) / c,
            "mse_mean": np.asarray(self.sum_mse) / c,
            "nmse_mean": np.asarray(self.sum_nmse) / c,
            "lqg_mean": np.asarray(self.sum_cost) / c,
            "tx": tx,
            "rx": rx,
            "delivery_ratio": np.divide(
                rx, tx, out=np.zeros(self.n_loops), where=tx > 0),
            "diverged": self.diverged.copy(),
        }
        total_rx = int(rx.sum())
        fractions = {}
        for cls in dict.fromkeys(self.classes):
            mask = np.array([k == cls for k in self.classes])
            fractions[cls] = (rx[mask].sum() / total_rx) if total_rx else 0.0
        network = {
            "aoi_mean": float(np.mean(per_loop["aoi_mean"])),
            "mse_mean": float(np.mean(per_loop["mse_mean"])),
            "nmse_mean": float(np.mean(per_loop["nmse_mean"])),
            "lqg_mean": float(np.mean(per_loop["lqg_mean"])),
            "any_diverged": bool(self.diverged.any()),
        }
        return {
            "per_loop": per_loop,
            "network": network,
            "fractions": fractions,
            "samples_per_loop": counts,
            "expected_samples": expected,
        }
