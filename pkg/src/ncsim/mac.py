"""Medium-access policies and the message types they exchange.

Three contention-based rules run at the sources (pure ALOHA, slotted
ALOHA, and the age-threshold variant) and four contention-free schedulers
run at the gateway: round-robin, beacon-framed max-error-first (MEF), and
two polling schedulers — WiFresh (reliability x age) and pMEF
(reliability x normalized estimation error).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .metrics import MseTable

__all__ = [
    "Packet",
    "LcfsQueue",
    "GwLoopView",
    "gw_on_data",
    "rr_next",
    "mef_build_schedule",
    "wifresh_next",
    "pmef_next",
    "SchedulerPolicy",
    "make_policy",
    "CONTENTION_PROTOCOLS",
    "SCHEDULED_PROTOCOLS",
    "POLLING_PROTOCOLS",
]

GATEWAY_ID = 0
PACKET_KINDS = ("data", "poll", "ack", "beacon")


@dataclass
class Packet:
    """One simulated over-the-air message.

    Data packets carry the sampled state and its generation step; beacons
    carry the frame schedule and the slot index they were emitted in.
    """

    kind: str
    src_id: int
    dst_id: int
    gen_step: int | None = None
    payload_state: object = None
    schedule: list[int] | None = None
    slot_index: int | None = None
    tx_duration: float = 0.0

    def __post_init__(self):
        if self.kind not in PACKET_KINDS:
            raise ConfigurationError(f"unknown packet kind {self.kind!r}")
        if self.kind == "data" and self.gen_step is None:
            raise ConfigurationError("data packets must carry a generation step")
        if self.kind == "beacon" and self.schedule is None:
            raise ConfigurationError("beacons must carry a schedule")


class LcfsQueue:
    """Single-slot queue: a fresher sample displaces whatever is waiting."""

    def __init__(self):
        self._pkt = None

    def __len__(self):
        return 0 if self._pkt is None else 1

    def put(self, pkt: Packet):
        if pkt.kind != "data":
            raise ConfigurationError("only data packets are queued")
        if self._pkt is None or pkt.gen_step > self._pkt.gen_step:
            self._pkt = pkt

    def peek(self) -> Packet | None:
        return self._pkt

    def pop(self) -> Packet | None:
        pkt, self._pkt = self._pkt, None
        return pkt


@dataclass
class GwLoopView:
    """What the gateway knows about one loop.

    The age estimate ticks up once per gateway sampling period and drops
    on reception of strictly fresher data.  Poll/data counters live in a
    sliding time window and feed the reliability estimate
    (RX + 1) / (TX + 1).
    """

    est_age: int = 1
    last_gen_step: int = 0
    window_len: float = 0.5  # seconds
    polls: deque = field(default_factory=deque)     # poll emission times
    datas: deque = field(default_factory=deque)     # data reception times

    def tick(self, step: int):
        """Re-derive the age estimate on the gateway's sampling grid.

        Equivalent to incrementing once per period absent receptions, but
        also corrects for data that arrived between two ticks.
        """
        self.est_age = max(1, step - self.last_gen_step)

    def record_poll(self, now: float):
        self.polls.append(now)

    def record_data(self, now: float):
        self.datas.append(now)

    def _trim(self, now: float):
        horizon = now - self.window_len
        while self.polls and self.polls[0] < horizon:
            self.polls.popleft()
        while self.datas and self.datas[0] < horizon:
            self.datas.popleft()

    def reliability(self, now: float) -> float:
        self._trim(now)
        return (len(self.datas) + 1) / (len(self.polls) + 1)


def gw_on_data(view: GwLoopView, pkt: Packet, gw_step: int) -> tuple[bool, Packet]:
    """Process a received data packet at the gateway.

    Accepts only strictly fresher generations; the age estimate becomes
    the packet's age on the gateway's own sampling grid, floored at one.
    Returns (accepted, ack); the ack echoes the generation step so the
    source can synchronize its view of the destination age.
    """
    if pkt.kind != "data":
        raise ConfigurationError("gw_on_data expects a data packet")
    accepted = pkt.gen_step > view.last_gen_step
    if accepted:
        view.last_gen_step = pkt.gen_step
        view.est_age = max(1, gw_step - pkt.gen_step)
    ack = Packet(kind="ack", src_id=GATEWAY_ID, dst_id=pkt.src_id,
                 gen_step=pkt.gen_step)
    return accepted, ack


def rr_next(t: int, N: int) -> int:
    """Round-robin: the unique loop i in 1..N with (t + N - i) mod N == 0."""
    if t < 1:
        raise ConfigurationError("slot index starts at 1")
    if N < 1:
        raise ConfigurationError("N must be >= 1")
    return (t - 1) % N + 1


def mef_build_schedule(est_ages: dict[int, int], tables: dict[int, MseTable],
                       frame_len: int = 20, use_nmse: bool = True) -> list[int]:
    """Greedy frame schedule: fill each slot with the loop of largest
    predicted error, assuming every scheduled transmission succeeds.

    The chosen loop's predicted age resets to 1 for subsequent slots;
    everyone else ages by one.  Ties go to the lowest loop id.
    """
    if frame_len < 1:
        raise ConfigurationError("frame_len must be >= 1")
    pred = dict(est_ages)
    schedule = []
    for _ in range(frame_len):
        best_id, best_val = None, None
        for i in sorted(pred):
            tab = tables[i]
            val = tab.nmse(pred[i]) if use_nmse else tab.mse(pred[i])
            if best_val is None or val > best_val:
                best_id, best_val = i, val
        schedule.append(best_id)
        for i in pred:
            pred[i] = 1 if i == best_id else pred[i] + 1
    return schedule


def wifresh_next(views: dict[int, GwLoopView], now: float) -> int:
    """Max-weight poll target: argmax of reliability x estimated age."""
    best_id, best_val = None, None
    for i in sorted(views):
        val = views[i].reliability(now) * views[i].est_age
        if best_val is None or val > best_val:
            best_id, best_val = i, val
    return best_id


def pmef_next(views: dict[int, GwLoopView], tables: dict[int, MseTable],
              now: float, use_nmse: bool = True) -> int:
    """Poll target by reliability x (normalized) estimation error."""
    best_id, best_val = None, None
    for i in sorted(views):
        tab = tables[i]
        err = tab.nmse(views[i].est_age) if use_nmse else tab.mse(views[i].est_age)
        val = views[i].reliability(now) * err
        if best_val is None or val > best_val:
            best_id, best_val = i, val
    return best_id


CONTENTION_PROTOCOLS = ("aloha", "slotted_aloha", "adra")
SCHEDULED_PROTOCOLS = ("round_robin", "mef")
POLLING_PROTOCOLS = ("wifresh", "pmef")
PROTOCOLS = CONTENTION_PROTOCOLS + SCHEDULED_PROTOCOLS + POLLING_PROTOCOLS


@dataclass(frozen=True)
class SchedulerPolicy:
    """Which medium-access rule a run uses, with its parameters."""

    variant: str
    p: float | None = None          # access probability (slotted_aloha, adra)
    threshold: int | None = None    # age threshold (adra)
    frame_len: int = 20             # beacon frame length in slots (mef)
    use_nmse: bool = True           # mef / pmef scheduling metric

    def __post_init__(self):
        if self.variant not in PROTOCOLS:
            raise ConfigurationError(
                f"unknown protocol {self.variant!r}; expected one of {PROTOCOLS}")
        # p / threshold may stay None here; they are resolved against the
        # network size where the policy is used (slotted ALOHA defaults to
        # p = 1/N, the threshold policy to its optimized pair).
        if self.p is not None and not 0.0 < self.p < 1.0:
            raise ConfigurationError(
                f"{self.variant}: access probability must be in (0,1)")
        if self.threshold is not None and self.threshold < 0:
            raise ConfigurationError("threshold must be non-negative")
        if self.frame_len < 1:
            raise ConfigurationError("frame_len must be >= 1")

    @property
    def is_contention(self):
        return self.variant in CONTENTION_PROTOCOLS

    @property
    def is_polling(self):
        return self.variant in POLLING_PROTOCOLS


def make_policy(variant: str, **params) -> SchedulerPolicy:
    return SchedulerPolicy(variant=variant, **params)
