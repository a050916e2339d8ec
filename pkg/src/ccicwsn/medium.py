"""Single-channel broadcast medium.

Every frame is a broadcast heard by all nodes within the sender's range.
Two receptions that overlap in time at the same receiver destroy each other
there (no capture). Senders are billed for every frame they put on the air,
whether or not anyone decodes it.
"""
from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

from . import wire
from .scheduler import Scheduler
from .trace import NS, EventLog, to_ns
from .wire import Kind, Packet

DATA_RATE_BPS = 250_000
PROPAGATION_SPEED = 3.0e8


@dataclass
class MediumConfig:
    data_rate: int = DATA_RATE_BPS
    propagation_speed: float = PROPAGATION_SPEED
    uj_per_bit: float = wire.ENERGY_UJ_PER_BIT
    csma: bool = True
    backoff_unit: float = 320e-6
    min_be: int = 3
    max_be: int = 5
    max_backoffs: int = 4
    collisions: bool = True
    loss_rate: float = 0.0
    trace_deliveries: bool = True
    interest_size: int = wire.INTEREST_SIZE
    data_size: int = wire.DATA_SIZE


class EnergyLedger:
    """Transmitted bits per node and packet kind."""

    def __init__(self, uj_per_bit: float = wire.ENERGY_UJ_PER_BIT):
        self.uj_per_bit = uj_per_bit
        self.bits: dict[str, dict[str, int]] = {}

    def bill(self, node: str, kind: str, nbytes: int) -> None:
        per = self.bits.setdefault(node, {"Interest": 0, "Data": 0})
        per[kind] += nbytes * 8

    def node_energy(self, node: str, kind: str) -> float:
        return wire.energy_j(self.bits.get(node, {}).get(kind, 0), self.uj_per_bit)

    def total_bits(self, kind: str) -> int:
        return sum(v[kind] for v in self.bits.values())

    def energy(self, kind: str) -> float:
        return wire.energy_j(self.total_bits(kind), self.uj_per_bit)

    @property
    def total(self) -> float:
        return self.energy("Interest") + self.energy("Data")


@dataclass
class Radio:
    node: str
    x: float
    y: float
    range: float
    on_receive: Callable[[Packet, str], None]


class _Rx:
    __slots__ = ("start", "end", "collided", "lost")

    def __init__(self, start: int, end: int):
        self.start = start
        self.end = end
        self.collided = False
        self.lost = False


class Medium:
    def __init__(self, sched: Scheduler, log: EventLog, cfg: Optional[MediumConfig] = None,
                 backoff_rng: Optional[random.Random] = None,
                 loss_rng: Optional[random.Random] = None):
        self.sched = sched
        self.log = log
        self.cfg = cfg or MediumConfig()
        self.ledger = EnergyLedger(self.cfg.uj_per_bit)
        self.backoff_rng = backoff_rng or random.Random(0)
        self.loss_rng = loss_rng or random.Random(1)
        self.radios: dict[str, Radio] = {}
        self._neighbors: dict[str, list[tuple[str, int]]] = {}
        self._queues: dict[str, deque] = {}
        self._active: dict[str, bool] = {}
        self._tx_end: dict[str, int] = {}
        self._rx: dict[str, list[_Rx]] = {}
        self.sizes: Mapping[Kind, int] = {Kind.INTEREST: self.cfg.interest_size,
                                          Kind.DATA: self.cfg.data_size}
        self._default_sizes = dict(self.sizes) == dict(wire.DEFAULT_SIZES)
        self.collisions = 0
        self.drops = 0

    # -- topology ---------------------------------------------------------
    def add(self, radio: Radio) -> None:
        self.radios[radio.node] = radio
        self._queues[radio.node] = deque()
        self._active[radio.node] = False
        self._tx_end[radio.node] = 0
        self._rx[radio.node] = []
        self._neighbors.clear()

    def move(self, node: str, x: float, y: float) -> None:
        r = self.radios[node]
        r.x, r.y = x, y
        self._neighbors.clear()

    def distance(self, a: str, b: str) -> float:
        ra, rb = self.radios[a], self.radios[b]
        return math.hypot(ra.x - rb.x, ra.y - rb.y)

    def in_range(self, sender: str, receiver: str) -> bool:
        return receiver != sender and self.distance(sender, receiver) <= self.radios[sender].range

    def neighbors(self, sender: str) -> list[tuple[str, int]]:
        nb = self._neighbors.get(sender)
        if nb is None:
            s = self.radios[sender]
            nb = []
            for r in self.radios.values():
                if r.node == sender:
                    continue
                d = math.hypot(s.x - r.x, s.y - r.y)
                if d <= s.range:
                    nb.append((r.node, int(round(d / self.cfg.propagation_speed * NS))))
            self._neighbors[sender] = nb
        return nb

    # -- timing -----------------------------------------------------------
    def frame_size(self, p: Packet) -> int:
        if self._default_sizes:
            return p.size_bytes
        return len(wire.encode(p, self.sizes))

    def duration(self, nbytes: int) -> int:
        return -(-nbytes * 8 * NS // self.cfg.data_rate)

    # -- channel access ---------------------------------------------------
    def channel_busy(self, node: str, now: int) -> bool:
        if self._tx_end[node] > now:
            return True
        for rx in self._rx[node]:
            if rx.start <= now < rx.end:
                return True
        return False

    def csma_attempt(self, node: str, now: int, attempt: int) -> Optional[int]:
        """Start time for the next try: ``now`` when the channel is idle,
        a backed-off time when busy, None once backoffs are exhausted."""
        if not self.cfg.csma or not self.channel_busy(node, now):
            return now
        if attempt >= self.cfg.max_backoffs:
            return None
        be = min(self.cfg.min_be + attempt, self.cfg.max_be)
        slots = self.backoff_rng.randrange(1, 2 ** be)
        return now + slots * to_ns(self.cfg.backoff_unit)

    def submit(self, node: str, p: Packet) -> None:
        self._queues[node].append(p)
        if not self._active[node]:
            self._active[node] = True
            self._try(node, 0)

    def _try(self, node: str, attempt: int) -> None:
        now = self.sched.now
        q = self._queues[node]
        p = q[0]
        start = self.csma_attempt(node, now, attempt)
        if start is None:
            q.popleft()
            self.drops += 1
            self.log.frame(now, p.kind.label, node, "*", p.name_str, self.frame_size(p), "dropped")
            self._next(node)
        elif start == now:
            self._transmit(node, p)
        else:
            self.sched.at(start, self._try, node, attempt + 1)

    def _next(self, node: str) -> None:
        if self._queues[node]:
            self._try(node, 0)
        else:
            self._active[node] = False

    def _transmit(self, node: str, p: Packet) -> None:
        now = self.sched.now
        nbytes = self.frame_size(p)
        dur = self.duration(nbytes)
        label = p.kind.label
        self.ledger.bill(node, label, nbytes)
        self.log.frame(now, label, node, "*", p.name_str, nbytes, "sent")
        self._tx_end[node] = now + dur
        cfg = self.cfg
        for rid, prop in self.neighbors(node):
            rx = _Rx(now + prop, now + prop + dur)
            active = self._rx[rid]
            if active:
                keep = [o for o in active if o.end > rx.start]
                if cfg.collisions:
                    for o in keep:
                        if o.start < rx.end:
                            o.collided = True
                            rx.collided = True
                keep.append(rx)
                self._rx[rid] = keep
            else:
                active.append(rx)
            if cfg.loss_rate > 0 and self.loss_rng.random() < cfg.loss_rate:
                rx.lost = True
            self.sched.at(rx.end, self._deliver, rid, node, p, rx, nbytes)
        self.sched.at(now + dur, self._tx_done, node)

    def _tx_done(self, node: str) -> None:
        self._queues[node].popleft()
        self._next(node)

    def _deliver(self, rid: str, sender: str, p: Packet, rx: _Rx, nbytes: int) -> None:
        now = self.sched.now
        if rx.collided:
            self.collisions += 1
            self.log.frame(now, p.kind.label, sender, rid, p.name_str, nbytes, "collided")
            return
        if rx.lost:
            self.log.frame(now, p.kind.label, sender, rid, p.name_str, nbytes, "dropped")
            return
        if self.cfg.trace_deliveries:
            self.log.frame(now, p.kind.label, sender, rid, p.name_str, nbytes, "delivered")
        self.radios[rid].on_receive(p, sender)

    def broadcast_duration(self, p: Packet) -> int:
        return self.duration(self.frame_size(p))
