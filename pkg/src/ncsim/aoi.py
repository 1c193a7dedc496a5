"""Closed-form mean-age expressions for the random-access and round-robin
policies, and numeric optimization of the age-threshold protocol.

For slotted random access with per-slot access probability p and N >= 3
contenders, each loop sees a mean age of 1 / (p (1-p)^{N-1}) slots.  The
age-threshold variant stays silent until its tracked age reaches a
threshold ``delta`` and then contends with probability p; its mean age
depends on the per-attempt success probability q, which we obtain as the
fixed point of a renewal argument (see :func:`solve_adra_q`).
"""
from __future__ import annotations

import math

from scipy.optimize import minimize_scalar

from .errors import ConfigurationError, OptimizationError

__all__ = [
    "sa_mean_aoi",
    "rr_mean_aoi",
    "solve_adra_q",
    "adra_mean_aoi",
    "optimize_adra",
]


def _check_p(p: float):
    if not 0.0 < p < 1.0:
        raise ConfigurationError(f"access probability must be in (0,1), got {p}")


def sa_mean_aoi(N: int, p: float) -> float:
    """Mean age of one loop under slotted random access.

    Valid for N >= 3; the age-optimal access probability is 1/N.
    """
    if N < 3:
        raise ConfigurationError("slotted-access mean-age formula needs N >= 3")
    _check_p(p)
    # (1-p)^(N-1) underflows for very large N; evaluate in log space.
    log_s = math.log(p) + (N - 1) * math.log1p(-p)
    return math.exp(-log_s)


def rr_mean_aoi(N: int) -> float:
    """Mean age under lossless round-robin polling of N loops."""
    if N < 1:
        raise ConfigurationError("N must be >= 1")
    return (N + 1) / 2


def solve_adra_q(N: int, delta: int, p: float, tol: float = 1e-10,
                 max_iter: int = 10**5) -> float:
    """Per-attempt success probability under the age-threshold policy.

    A loop's renewal cycle consists of max(delta-1, 0) ineligible slots
    followed by a geometric number (mean 1/(pq)) of eligible slots, so a
    peer is eligible in a stationary fraction

        a(q) = (1/(pq)) / (max(delta-1, 0) + 1/(pq))

    of slots.  q solves q = (1 - p a(q))^{N-1}; solved by damped iteration.

    The equation can have several roots when p is large and the threshold
    positive.  We return the smallest one: it is the branch reachable from
    a cold start, where every loop begins eligible, and it is the branch
    simulations settle on.  The iteration starts from the fully-congested
    guess (1-p)^{N-1}, a lower bound on every root, and increases
    monotonically to the first crossing.
    """
    if N < 1:
        raise ConfigurationError("N must be >= 1")
    if delta < 0:
        raise ConfigurationError("threshold must be non-negative")
    if N == 1:
        return 1.0
    _check_p(p)
    idle = max(delta - 1, 0)
    q = math.exp((N - 1) * math.log1p(-p))
    for _ in range(max_iter):
        mean_busy = 1.0 / (p * q)
        a = mean_busy / (idle + mean_busy)
        q_new = math.exp((N - 1) * math.log1p(-p * a))
        if abs(q_new - q) < tol:
            return q_new
        q = 0.5 * (q + q_new)
    raise OptimizationError(
        f"q fixed point did not converge for N={N}, delta={delta}, p={p}")


def adra_mean_aoi(N: int, delta: int, p: float, q: float | None = None) -> float:
    """Network-wide mean age of the age-threshold policy.

    ``q`` defaults to the fixed point from :func:`solve_adra_q`.
    """
    if q is None:
        q = solve_adra_q(N, delta, p)
    pq = p * q
    return delta / 2 + 1 / pq - delta / (2 * (delta * pq + 1 - pq))


def cold_start_drain(N: int, p: float) -> float:
    """Expected slots to drain the all-eligible state down to one loop.

    With k loops eligible and none allowed to leave otherwise, exactly one
    succeeds per slot with probability k p (1-p)^{k-1}; summing the
    expected waits for k = N..2 gives the time for the congested state to
    resolve into the staggered operating point.
    """
    _check_p(p)
    total = 0.0
    for k in range(2, N + 1):
        total += 1.0 / (k * p * (1.0 - p) ** (k - 1))
    return total


def adra_model_valid(N: int, delta: int, p: float) -> bool:
    """Whether the mean-field closed form is trustworthy at (delta, p).

    For delta <= 1 every loop is always eligible and the stationary model
    describes exactly that state.  For larger thresholds the low-age
    operating point is only sustainable if the congested all-eligible
    state drains within the ineligibility gap of delta - 1 slots;
    otherwise simultaneous eligibility self-sustains and the closed form
    is wildly optimistic.
    """
    if delta <= 1:
        return True
    return cold_start_drain(N, p) <= delta - 1


def optimize_adra(N: int, delta_max: int = 60) -> tuple[int, float]:
    """Best (threshold, access probability) pair for N loops.

    Scans integer thresholds; per threshold, brackets the feasible access
    probabilities (see :func:`adra_model_valid`) on a coarse grid and
    polishes with a bounded scalar search.
    """
    if N < 3:
        raise ConfigurationError("optimization defined for N >= 3")
    p_grid = [i / 500 for i in range(1, 500)]
    best = (sa_mean_aoi(N, 1.0 / N), 0, 1.0 / N)
    for delta in range(delta_max + 1):
        feasible = [p for p in p_grid if adra_model_valid(N, delta, p)]
        if not feasible:
            continue
        coarse = min(feasible, key=lambda p: adra_mean_aoi(N, delta, p))
        lo = max(min(feasible), coarse - 0.01)
        hi = min(max(feasible), coarse + 0.01)
        res = minimize_scalar(
            lambda p: adra_mean_aoi(N, delta, p),
            bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
        val, p_opt = float(res.fun), float(res.x)
        if not adra_model_valid(N, delta, p_opt):
            val, p_opt = adra_mean_aoi(N, delta, coarse), coarse
        if val < best[0]:
            best = (val, delta, p_opt)
    _, delta_star, p_star = best
    return delta_star, p_star
