"""Deterministic event-driven simulation of N control loops on one shared hop.

Time advances on an integer-microsecond clock through a priority queue of
events.  Every sampling period each loop's controller consumes the freshest
delivered sample, applies its feedback law, the plant steps forward, and a
new sample enters the loop's single-slot queue.  Concurrently the selected
medium-access policy moves packets across the shared channel: slotted
contention and beacon-framed scheduling stay aligned to the sampling grid,
while polling runs asynchronously with back-to-back transactions.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelConfig, draw_offsets, resolve_slot, resolve_pointtopoint
from .errors import ConfigurationError, InvariantViolation
from .mac import (GwLoopView, LcfsQueue, Packet, SchedulerPolicy, gw_on_data,
                  mef_build_schedule, pmef_next, rr_next, wifresh_next)
from .metrics import MetricsAccumulator, MseTable
from .systems import LtiSystem, make_preset

__all__ = ["SimConfig", "systems_from_classes", "run", "run_replications",
           "DIVERGENCE_THRESHOLD"]

DIVERGENCE_THRESHOLD = 1e12
POLL_GUARD_S = 0.002  # extra wait before a poll transaction is declared lost

# Priority of simultaneous events; lower value is handled first.
_PRIO_DELIVERY = 0
_PRIO_TIMEOUT = 1
_PRIO_TICK = 2
_PRIO_FRAME = 3
_PRIO_SLOT = 4

# Named sub-streams per loop; the shared channel stream uses loop id 0.
_RNG_NOISE, _RNG_ACCESS, _RNG_CHANNEL = 0, 1, 2


@dataclass
class SimConfig:
    """Everything one simulation run depends on."""

    systems: list[LtiSystem]
    policy: SchedulerPolicy
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    classes: list[str] | None = None     # per-loop labels for resource shares
    duration_s: float = 30.0
    warmup_s: float = 5.0
    cooldown_s: float = 5.0
    T_s: float = 0.010
    seed: int = 0
    replications: int = 20
    record_series: bool = False          # keep per-tick AoI and state arrays

    def __post_init__(self):
        if not self.systems:
            raise ConfigurationError("need at least one loop")
        if self.duration_s <= self.warmup_s + self.cooldown_s:
            raise ConfigurationError(
                "duration must exceed warmup plus cooldown")
        if self.T_s <= 0:
            raise ConfigurationError("T_s must be positive")
        if self.seed < 0:
            raise ConfigurationError("seed must be non-negative")
        if self.replications < 1:
            raise ConfigurationError("replications must be >= 1")
        if self.classes is None:
            self.classes = [s.name or "?" for s in self.systems]
        if len(self.classes) != len(self.systems):
            raise ConfigurationError("one class label per loop required")

    @property
    def n_loops(self) -> int:
        return len(self.systems)


_PRESET_CACHE: dict[str, LtiSystem] = {}


def systems_from_classes(n_loops: int, pattern=("easy", "mid", "hard")):
    """Cycle the class pattern over loop ids 1..N (loop 1 gets pattern[0]).

    Returns (systems, class labels); synthesized presets are cached and
    shared, which is safe because they are never mutated by a run.
    """
    if n_loops < 1:
        raise ConfigurationError("n_loops must be >= 1")
    labels = [pattern[(i - 1) % len(pattern)] for i in range(1, n_loops + 1)]
    for cls in set(labels):
        if cls not in _PRESET_CACHE:
            _PRESET_CACHE[cls] = make_preset(cls)
    return [_PRESET_CACHE[c] for c in labels], labels


class _Loop:
    """Mutable per-loop runtime state owned by one run."""

    def __init__(self, sys: LtiSystem, loop_id: int, seed: int):
        self.sys = sys
        self.id = loop_id
        self.table = MseTable(sys)
        self.nu = 0                        # generation step of freshest sample
        self.queue = LcfsQueue()
        self.last_acked_gen = 0            # source view of destination age
        self.diverged = False
        # Single-state single-input loops run on plain floats: the per-tick
        # work is a handful of multiply-adds, where numpy's per-call
        # overhead on 1-element arrays dominates the whole simulation.
        self.scalar = sys.n == 1 and sys.m == 1
        if self.scalar:
            self.a = float(sys.A[0, 0])
            self.b = float(sys.B[0, 0])
            self.g = 0.0 if sys.gain is None else float(sys.gain[0, 0])
            self.q = float(sys.Q[0, 0])
            self.r = float(sys.R[0, 0])
            self.x = 0.0
            self.freshest = 0.0            # controller copy of x[nu]
            self.inputs = [0.0]            # inputs[t] = u applied at step t
            self._est = (0, 0, 0.0)        # cache: (step, nu, estimate)
        else:
            self.x = np.zeros(sys.n)
            self.freshest = np.zeros(sys.n)
            self.inputs = [np.zeros(sys.m)]
            self._est = (0, 0, self.freshest.copy())
        self.noise = None                  # pregenerated by the run
        ss = np.random.SeedSequence
        self.rng_noise = np.random.default_rng(ss((seed, loop_id, _RNG_NOISE)))
        self.rng_access = np.random.default_rng(ss((seed, loop_id, _RNG_ACCESS)))
        self.rng_channel = np.random.default_rng(ss((seed, loop_id, _RNG_CHANNEL)))
        self.aoi_series: list[int] = []
        self.state_series: list = []

    def estimate(self, t: int):
        """Conditional mean of x[t] from the freshest sample and inputs.

        Rolls the previous tick's estimate forward when no fresher data
        arrived; otherwise replays the input history from the sample's
        generation step.
        """
        prev_t, prev_nu, prev_xhat = self._est
        if prev_nu == self.nu and prev_t == t - 1:
            if self.scalar:
                xhat = self.a * prev_xhat + self.b * self.inputs[t - 1]
            else:
                xhat = self.sys.A @ prev_xhat + self.sys.B @ self.inputs[t - 1]
        else:
            if self.nu >= t:
                raise InvariantViolation(
                    f"loop {self.id}: sample from step {self.nu} visible at {t}")
            if self.scalar:
                xhat = self.freshest
                a, b, inputs = self.a, self.b, self.inputs
                for q in range(self.nu, t):
                    xhat = a * xhat + b * inputs[q]
            else:
                A, B = self.sys.A, self.sys.B
                xhat = self.freshest.copy()
                for q in range(self.nu, t):
                    xhat = A @ xhat + B @ self.inputs[q]
        self._est = (t, self.nu, xhat)
        return xhat


class _Run:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.policy = cfg.policy
        if self.policy.variant == "slotted_aloha" and self.policy.p is None:
            self.policy = replace(self.policy, p=1.0 / cfg.n_loops)
        if self.policy.variant == "adra" and (
                self.policy.p is None or self.policy.threshold is None):
            raise ConfigurationError(
                "the age-threshold policy needs both p and threshold; "
                "use optimize_adra to pick them")
        self.channel = cfg.channel
        self.N = cfg.n_loops
        self.Ts_us = round(cfg.T_s * 1e6)
        self.tx_us = round(cfg.channel.tx_duration * 1e6)
        self.steps = round(cfg.duration_s / cfg.T_s)
        t_start = round(cfg.warmup_s / cfg.T_s) + 1
        t_end = self.steps - round(cfg.cooldown_s / cfg.T_s)
        self.metrics = MetricsAccumulator(self.N, t_start, t_end, cfg.classes)
        self.loops = {i: _Loop(cfg.systems[i - 1], i, cfg.seed)
                      for i in range(1, self.N + 1)}
        for loop in self.loops.values():
            if loop.scalar:
                std = math.sqrt(float(loop.sys.noise_cov[0, 0]))
                loop.noise = (loop.rng_noise.normal(size=self.steps + 1)
                              * std).tolist()
            else:
                loop.noise = (loop.rng_noise.normal(
                    size=(self.steps + 1, loop.sys.n)) * loop.sys.noise_std)
        self.views = {i: GwLoopView() for i in range(1, self.N + 1)}
        self.tables = {i: self.loops[i].table for i in range(1, self.N + 1)}
        self.rng_shared = np.random.default_rng(
            np.random.SeedSequence((cfg.seed, 0, _RNG_CHANNEL)))
        self.heap: list = []
        self._seq = 0
        self.current_step = 0
        self.mef_schedule: list[int] = []
        self.poll_token = 0        # id of the outstanding poll transaction
        self.end_us = self.steps * self.Ts_us

    def push(self, time_us: int, prio: int, kind: str, payload=None):
        heapq.heappush(self.heap, (time_us, prio, self._seq, kind, payload))
        self._seq += 1

    # ---- sampling-period tick -------------------------------------------

    def on_tick(self, t: int):
        self.current_step = t
        record = self.metrics.record_step
        series = self.cfg.record_series
        tx_dur = self.channel.tx_duration
        thr = DIVERGENCE_THRESHOLD
        for i in range(1, self.N + 1):
            loop = self.loops[i]
            delta = t - loop.nu
            table = loop.table
            mse = table.mse(delta)
            if loop.scalar:
                prev_t, prev_nu, prev_xh = loop._est
                if prev_nu == loop.nu and prev_t == t - 1:
                    xhat = loop.a * prev_xh + loop.b * loop.inputs[t - 1]
                    loop._est = (t, prev_nu, xhat)
                else:
                    xhat = loop.estimate(t)
                u = -loop.g * xhat
                loop.inputs.append(u)
                x = loop.x
                cost = loop.q * x * x + loop.r * u * u
                payload = x
            else:
                xhat = loop.estimate(t)
                u = np.zeros(loop.sys.m) if loop.sys.gain is None \
                    else -(loop.sys.gain @ xhat)
                loop.inputs.append(u)
                x = loop.x
                cost = float(x @ loop.sys.Q @ x + u @ loop.sys.R @ u)
                payload = x.copy()
            record(i - 1, t, delta, mse, mse / table._base, cost)
            if series:
                loop.aoi_series.append(delta)
                loop.state_series.append(x if loop.scalar else x.copy())
            loop.queue.put(Packet(
                kind="data", src_id=i, dst_id=0, gen_step=t,
                payload_state=payload, tx_duration=tx_dur))
            self.views[i].tick(t)
            if loop.scalar:
                x_next = loop.a * x + loop.b * u + loop.noise[t]
                # The chained comparison is False for nan as well.
                if not loop.diverged and not (-thr <= x_next <= thr):
                    loop.diverged = True
                    self.metrics.flag_diverged(i - 1)
            else:
                x_next = loop.sys.A @ x + loop.sys.B @ u + loop.noise[t]
                if not loop.diverged and (
                        not np.all(np.isfinite(x_next))
                        or np.max(np.abs(x_next)) > thr):
                    loop.diverged = True
                    self.metrics.flag_diverged(i - 1)
            loop.x = x_next
        if t < self.steps:
            self.push((t + 1) * self.Ts_us, _PRIO_TICK, "tick", t + 1)

    # ---- slotted medium access ------------------------------------------

    def _contention_transmitters(self, t: int) -> list[int]:
        out = []
        for i in range(1, self.N + 1):
            loop = self.loops[i]
            if len(loop.queue) == 0:
                continue
            v = self.policy.variant
            if v == "aloha":
                out.append(i)
            elif v == "slotted_aloha":
                if loop.rng_access.random() < self.policy.p:
                    out.append(i)
            elif v == "adra":
                src_age = max(1, t - loop.last_acked_gen)
                if src_age >= self.policy.threshold and \
                        loop.rng_access.random() < self.policy.p:
                    out.append(i)
        return out

    def on_slot(self, t: int):
        slot_us = t * self.Ts_us
        if self.policy.is_contention:
            ids = self._contention_transmitters(t)
            txs = draw_offsets(
                ids, self.channel,
                {i: self.loops[i].rng_channel for i in ids})
            decoded = resolve_slot(txs, self.channel, self.rng_shared)
            offsets = dict(txs)
            for i in ids:
                self.metrics.record_tx(i - 1, t)
                pkt = self.loops[i].queue.pop()
                if i in decoded:
                    at = slot_us + round(offsets[i] * 1e6) + self.tx_us
                    self.push(at, _PRIO_DELIVERY, "delivery", (i, pkt, t))
        else:  # round_robin or mef
            if self.policy.variant == "round_robin":
                i = rr_next(t, self.N)
            else:
                i = self.mef_schedule[(t - 1) % self.policy.frame_len]
            pkt = self.loops[i].queue.peek()
            if pkt is not None:
                self.metrics.record_tx(i - 1, t)
                if resolve_pointtopoint(self.channel, self.loops[i].rng_channel):
                    self.push(slot_us + self.tx_us, _PRIO_DELIVERY,
                              "delivery", (i, pkt, t))
        if t < self.steps:
            self.push((t + 1) * self.Ts_us, _PRIO_SLOT, "slot", t + 1)

    def on_frame(self, t: int):
        self.mef_schedule = mef_build_schedule(
            {i: v.est_age for i, v in self.views.items()},
            self.tables, self.policy.frame_len, self.policy.use_nmse)
        nxt = t + self.policy.frame_len
        if nxt <= self.steps:
            self.push(nxt * self.Ts_us, _PRIO_FRAME, "frame", nxt)

    # ---- deliveries and acknowledgements --------------------------------

    def on_delivery(self, now_us: int, i: int, pkt: Packet, tx_step: int,
                    polled: bool):
        self.metrics.record_rx(i - 1, tx_step)
        view = self.views[i]
        accepted, ack = gw_on_data(view, pkt, self.current_step)
        view.record_data(now_us * 1e-6)
        loop = self.loops[i]
        if pkt.gen_step > loop.nu:
            loop.nu = pkt.gen_step
            loop.freshest = float(pkt.payload_state) if loop.scalar \
                else np.asarray(pkt.payload_state, dtype=float)
        # Acks are instantaneous and lossless: the source's view of the
        # destination age synchronizes immediately.
        loop.last_acked_gen = max(loop.last_acked_gen, ack.gen_step)
        if polled:
            self.poll_token += 1
            self.issue_poll(now_us)

    # ---- asynchronous polling -------------------------------------------

    def issue_poll(self, now_us: int):
        if now_us >= self.end_us:
            return
        now_s = now_us * 1e-6
        if self.policy.variant == "wifresh":
            i = wifresh_next(self.views, now_s)
        else:
            i = pmef_next(self.views, self.tables, now_s, self.policy.use_nmse)
        self.views[i].record_poll(now_s)
        token = self.poll_token
        timeout_us = now_us + 2 * self.tx_us + round(POLL_GUARD_S * 1e6)
        self.push(timeout_us, _PRIO_TIMEOUT, "timeout", token)
        if resolve_pointtopoint(self.channel, self.loops[i].rng_channel):
            self.push(now_us + self.tx_us, _PRIO_DELIVERY, "poll_arrival",
                      (i, token))

    def on_poll_arrival(self, now_us: int, i: int, token: int):
        if token != self.poll_token:
            return
        loop = self.loops[i]
        pkt = loop.queue.peek()
        if pkt is None:
            raise InvariantViolation(f"loop {i} polled with an empty queue")
        self.metrics.record_tx(i - 1, self.current_step)
        if resolve_pointtopoint(self.channel, loop.rng_channel):
            self.push(now_us + self.tx_us, _PRIO_DELIVERY, "polled_delivery",
                      (i, pkt, self.current_step, token))

    def on_timeout(self, token: int, now_us: int):
        if token != self.poll_token:
            return  # transaction completed; stale timer
        self.poll_token += 1
        self.issue_poll(now_us)

    # ---- main loop -------------------------------------------------------

    def execute(self) -> dict:
        for i, loop in self.loops.items():
            loop.queue.put(Packet(
                kind="data", src_id=i, dst_id=0, gen_step=0,
                payload_state=loop.x if loop.scalar else loop.x.copy(),
                tx_duration=self.channel.tx_duration))
        self.push(self.Ts_us, _PRIO_TICK, "tick", 1)
        if self.policy.is_polling:
            self.issue_poll(0)
        elif self.policy.variant == "mef":
            self.push(self.Ts_us, _PRIO_FRAME, "frame", 1)
            self.push(self.Ts_us, _PRIO_SLOT, "slot", 1)
        else:
            self.push(self.Ts_us, _PRIO_SLOT, "slot", 1)
        heap = self.heap
        pop = heapq.heappop
        with np.errstate(over="ignore", invalid="ignore"):
            while heap:
                now_us, _, _, kind, payload = pop(heap)
                if now_us > self.end_us:
                    continue
                if kind == "tick":
                    self.on_tick(payload)
                elif kind == "slot":
                    self.on_slot(payload)
                elif kind == "frame":
                    self.on_frame(payload)
                elif kind == "delivery":
                    i, pkt, tx_step = payload
                    self.on_delivery(now_us, i, pkt, tx_step, polled=False)
                elif kind == "polled_delivery":
                    i, pkt, tx_step, token = payload
                    if token == self.poll_token:
                        self.on_delivery(now_us, i, pkt, tx_step, polled=True)
                elif kind == "poll_arrival":
                    self.on_poll_arrival(now_us, *payload)
                elif kind == "timeout":
                    self.on_timeout(payload, now_us)
        result = {"metrics": self.metrics.finalize(), "seed": self.cfg.seed}
        if self.cfg.record_series:
            result["series"] = {
                i: {"aoi": np.array(self.loops[i].aoi_series),
                    "state": np.array(self.loops[i].state_series)}
                for i in self.loops}
        return result


def run(cfg: SimConfig) -> dict:
    """One deterministic simulation run."""
    return _Run(cfg).execute()


def _run_with_seed(args):
    cfg, seed = args
    return run(replace(cfg, seed=seed))


def run_replications(cfg: SimConfig, reps: int | None = None,
                     jobs: int = 1) -> dict:
    """Independent replications (seed, seed+1, ...) with 99% intervals.

    Returns per-replication results plus a summary of replication-mean
    network metrics with Student-t confidence half-widths.
    """
    from scipy import stats

    reps = cfg.replications if reps is None else reps
    if reps < 1:
        raise ConfigurationError("need at least one replication")
    tasks = [(cfg, cfg.seed + r) for r in range(reps)]
    if jobs > 1:
        import concurrent.futures as cf
        with cf.ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_with_seed, tasks))
    else:
        results = [_run_with_seed(t) for t in tasks]

    summary = {}
    for key in ("aoi_mean", "mse_mean", "nmse_mean", "lqg_mean"):
        vals = np.array([r["metrics"]["network"][key] for r in results])
        mean = float(np.mean(vals))
        if reps >= 2 and np.all(np.isfinite(vals)):
            half = float(stats.t.ppf(0.995, reps - 1)
                         * np.std(vals, ddof=1) / math.sqrt(reps))
        else:
            # Heavy-tailed or single-replication cases: no meaningful
            # interval; report an unbounded half-width rather than nan.
            half = math.inf
        summary[key] = {"mean": mean, "ci99_half": half}
    frac_keys = results[0]["metrics"]["fractions"].keys()
    summary["fractions"] = {
        k: float(np.mean([r["metrics"]["fractions"][k] for r in results]))
        for k in frac_keys}
    summary["diverged_reps"] = sum(
        r["metrics"]["network"]["any_diverged"] for r in results)
    return {"replications": results, "summary": summary}
