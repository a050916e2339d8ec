"""CN and CH protocol state machines.

A :class:`Node` owns its tables and reacts to frames delivered by the
medium. Handlers that answer a packet return the response (and send it);
the return value is what unit tests inspect.
"""
from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Union

from . import wire
from .litequery import Sample, eval_query, pack_result, parse_query
from .names import (HETEROGENEOUS, ChAssocName, ChInfoName, ChName, CnName, GeoCoord, Name,
                    NamespaceKind, SyncName, classify)
from .tables import ContentStore, Fib, MemberRecord, MembersCollection, Pit, PitResult
from .wire import Kind, Packet

if TYPE_CHECKING:
    from .sim import Simulation
    from .topology import NodeSpec

STORE_CAPACITY = 1024
ACK = b"ACK"


class Role(enum.Enum):
    CH = "CH"
    CN = "CN"


class AssocState(enum.Enum):
    UNASSOCIATED = "Unassociated"
    SELECTING = "Selecting"
    ASSOCIATING = "Associating"
    ASSOCIATED = "Associated"


class ProtocolError(RuntimeError):
    pass


class RoleMismatch(ProtocolError):
    pass


class NoCandidates(ProtocolError):
    pass


class NotAssociated(ProtocolError):
    pass


@dataclass(frozen=True)
class ChInfo:
    """What a CH advertises in reply to a CH_Info Interest."""

    ch_name: str
    sink_distance: int
    cluster_type: str
    member_count: int
    load: int

    def encode(self) -> bytes:
        return (f"{self.ch_name}|{self.sink_distance}|{self.cluster_type}|"
                f"{self.member_count}|{self.load}").encode()

    @classmethod
    def decode(cls, payload: bytes) -> "ChInfo":
        name, dist, ctype, count, load = payload.decode().split("|")
        return cls(name, int(dist), ctype, int(count), int(load))


@dataclass(frozen=True)
class JoinTimers:
    start: int
    selected: int
    associated: int

    @property
    def t_selection(self) -> int:
        return self.selected - self.start

    @property
    def t_association(self) -> int:
        return self.associated - self.selected

    @property
    def t_join(self) -> int:
        return self.associated - self.start


def cn_select_ch(candidates: list[ChInfo]) -> str:
    """Fewest members first, then nearest to the sink, then by name."""
    if not candidates:
        raise NoCandidates("no CH answered the CH_Info Interest")
    best = min(candidates, key=lambda c: (c.member_count, c.sink_distance, c.ch_name))
    return best.ch_name


@dataclass
class Request:
    name: Name
    tag: str  # "req" for content, "qreq" for lite queries
    attempts: int = 1
    timer: object = None


class Node:
    def __init__(self, spec: "NodeSpec", sim: "Simulation"):
        self.id = spec.id
        self.role = Role(spec.role)
        self.resource_flag = bool(spec.resource_flag)
        if self.role is Role.CH and not self.resource_flag:
            raise RoleMismatch(f"{self.id}: a CH needs x_n = 1")
        self.x, self.y, self.range = spec.x, spec.y, spec.range
        self.home = spec.cluster
        self.data_type = spec.data_type
        self.consumer = spec.consumer
        self.sim = sim
        cfg = sim.cfg
        t = sim.timers
        self.pit = Pit(t.pit_lifetime)
        self.fib = Fib()
        self.cs = ContentStore(cfg.cs_capacity if self.role is Role.CH or sim.vanilla else 0)
        self.members = MembersCollection()
        self.directory = MembersCollection()
        self.store: list[Sample] = []
        self._store_keys: dict[tuple[str, int], None] = {}
        self.sink_distance = cfg.sink_distance
        self.cluster_type = cfg.cluster_type
        self.sync_share = cfg.ch_sync_share
        self.store_sync = cfg.cn_store_members
        if self.role is Role.CH:
            self.ch_name: Optional[str] = self.id
            self.assoc_state = AssocState.ASSOCIATED
        else:
            self.ch_name = None
            self.assoc_state = AssocState.UNASSOCIATED
        self.ch_info: Optional[ChInfo] = None
        self.candidates: list[ChInfo] = []
        self.join_traces: list[JoinTimers] = []
        self.pending: dict[Name, Request] = {}
        self.pending_fetch: dict[Name, list[Name]] = {}
        self.pending_push: dict[Name, int] = {}
        self._push_payload: dict[Name, bytes] = {}
        self._seen_sync: set[str] = set()
        self._assoc_seen: dict[str, Name] = {}
        self._join_start = 0
        self._selected_at = 0
        self._info_name: Optional[Name] = None
        self._assoc_name: Optional[Name] = None
        self._assoc_attempt = 0
        self._chosen: Optional[ChInfo] = None
        self._sensing = False

    # -- helpers ----------------------------------------------------------
    @property
    def is_ch(self) -> bool:
        return self.role is Role.CH

    @property
    def now(self) -> int:
        return self.sim.now

    @property
    def location(self) -> GeoCoord:
        return self.sim.location(self.x, self.y)

    @property
    def workload(self) -> int:
        return len(self.pit) + len(self.pending_fetch)

    def send(self, p: Packet, delay: int = 0) -> Packet:
        self.sim.send(self.id, p, delay)
        return p

    def _jitter(self) -> int:
        return self.sim.rng.randrange(self.sim.timers.broadcast_jitter + 1)

    def _mark(self, tag: str, name: Union[Name, str] = "", value: int = 0, peer: str = "-") -> None:
        self.sim.mark(self.id, tag, str(name), value, peer)

    def cn_name(self, epoch: Optional[int] = None) -> CnName:
        return CnName(self.id, self.ch_name or "", self.location, self.data_type, epoch)

    def interest(self, name: Name, payload: bytes = b"") -> Packet:
        return wire.interest(name, self.sim.new_nonce(), payload, self.sim.cfg.hop_limit)

    # -- sample store -----------------------------------------------------
    def add_sample(self, s: Sample) -> bool:
        key = (s.nid, s.epoch_time)
        if key in self._store_keys:
            return False
        self._store_keys[key] = None
        i = bisect.bisect_right([x.epoch_time for x in self.store], s.epoch_time) \
            if self.store and s.epoch_time < self.store[-1].epoch_time else len(self.store)
        self.store.insert(i, s)
        if len(self.store) > STORE_CAPACITY:
            old = self.store.pop(0)
            self._store_keys.pop((old.nid, old.epoch_time), None)
        return True

    def nearest_sample(self, epoch: Optional[int], nid: Optional[str] = None) -> Optional[Sample]:
        pool = self.store if nid is None else [s for s in self.store if s.nid == nid]
        if not pool:
            return None
        if epoch is None:
            return pool[-1]
        times = [s.epoch_time for s in pool]
        i = bisect.bisect_left(times, epoch)
        if i < len(pool) and times[i] == epoch:
            return pool[i]
        before = pool[i - 1] if i > 0 else None
        after = pool[i] if i < len(pool) else None
        if before is None:
            return after
        if after is None:
            return before
        # ties go to the earlier sample
        return before if epoch - before.epoch_time <= after.epoch_time - epoch else after

    # -- dispatch ---------------------------------------------------------
    def on_receive(self, p: Packet, sender: str) -> None:
        if self.sim.vanilla:
            from .vanilla import vanilla_receive

            vanilla_receive(self, p, sender)
            return
        kind = classify(p.name)
        if p.is_interest:
            self._on_interest(p, sender, kind)
        else:
            self._on_data(p, sender, kind)

    def _on_interest(self, p: Packet, sender: str, kind: NamespaceKind) -> None:
        if self.is_ch:
            if kind is NamespaceKind.CH_INFO:
                self.ch_handle_info(p)
            elif kind is NamespaceKind.CH_ASSOCIATION:
                self.ch_handle_assoc(p)
            elif kind is NamespaceKind.SYNC:
                self.handle_sync(p, sender)
            elif kind is NamespaceKind.CH_CONTENT:
                if p.payload and p.name.first == self.id:
                    self.ch_handle_push(p, sender)
                else:
                    self.ch_serve(p, sender)
        else:
            if kind is NamespaceKind.SYNC:
                self.handle_sync(p, sender)
            elif kind is NamespaceKind.CN_CONTENT:
                self.cn_serve(p)

    def _on_data(self, p: Packet, sender: str, kind: NamespaceKind) -> None:
        if self.is_ch:
            if kind is NamespaceKind.CN_CONTENT:
                self._ch_member_data(p)
            elif kind is NamespaceKind.CH_CONTENT:
                self._ch_forward_data(p)
            return
        if kind is NamespaceKind.CH_INFO:
            self._cn_info_data(p, sender)
        elif kind is NamespaceKind.CH_ASSOCIATION:
            self._cn_assoc_data(p)
        elif kind is NamespaceKind.CH_CONTENT:
            if p.name in self.pending_push:
                del self.pending_push[p.name]
                self._push_payload.pop(p.name, None)
                self._mark("push_ack", p.name)
            else:
                self.satisfy(p)

    # -- join: selection --------------------------------------------------
    def start_join(self) -> Optional[Packet]:
        if self.is_ch:
            raise RoleMismatch(f"{self.id} is a CH and does not join")
        if self.assoc_state is not AssocState.UNASSOCIATED:
            return None
        self.assoc_state = AssocState.SELECTING
        self.candidates = []
        self._join_start = self.now
        name = ChInfoName(self.id, self.location, self.data_type, self.sim.epoch()).to_name()
        self._info_name = name
        self._mark("join_start", name)
        self.sim.after(self.sim.timers.selection_window, self._selection_done)
        return self.send(self.interest(name))

    def ch_handle_info(self, p: Packet) -> Optional[Packet]:
        info = ChInfoName.from_name(p.name)
        if self.workload >= self.sim.cfg.workload_threshold:
            return None
        if self.cluster_type != HETEROGENEOUS and info.data_type != self.cluster_type:
            return None
        reply = ChInfo(self.id, self.sink_distance, self.cluster_type, len(self.members),
                       self.workload)
        return self.send(wire.data(p.name, reply.encode()), self._jitter())

    def _cn_info_data(self, p: Packet, sender: str) -> None:
        if self.assoc_state is not AssocState.SELECTING or p.name != self._info_name:
            return
        info = ChInfo.decode(p.payload)
        if all(c.ch_name != info.ch_name for c in self.candidates):
            self.candidates.append(info)
            self.fib.add(info.ch_name, sender)

    def _selection_done(self) -> None:
        if self.assoc_state is not AssocState.SELECTING:
            return
        try:
            chosen = cn_select_ch(self.candidates)
        except NoCandidates:
            self.assoc_state = AssocState.UNASSOCIATED
            self._mark("join_retry")
            self.sim.after(self.sim.timers.join_backoff, self.start_join)
            return
        self._chosen = next(c for c in self.candidates if c.ch_name == chosen)
        self._selected_at = self.now
        self._mark("ch_selected", chosen, peer=chosen)
        self.cn_associate(chosen)

    # -- join: association ------------------------------------------------
    def cn_associate(self, ch_unique_name: str) -> Packet:
        self.assoc_state = AssocState.ASSOCIATING
        name = ChAssocName(ch_unique_name, self.id, self.location, self.data_type,
                           self.sim.epoch()).to_name()
        self._assoc_name = name
        self._assoc_attempt = 1
        self.sim.after(self.sim.timers.assoc_timeout, self._assoc_timeout, name, 1)
        return self.send(self.interest(name))

    def _assoc_timeout(self, name: Name, attempt: int) -> None:
        if self.assoc_state is not AssocState.ASSOCIATING or self._assoc_name != name \
                or self._assoc_attempt != attempt:
            return
        if attempt < self.sim.cfg.assoc_retries:
            self._assoc_attempt = attempt + 1
            self._mark("assoc_retx", name, attempt + 1)
            self.send(self.interest(name))
            self.sim.after(self.sim.timers.assoc_timeout, self._assoc_timeout, name, attempt + 1)
        else:
            self.assoc_state = AssocState.UNASSOCIATED
            self._mark("join_fail", name)
            self.sim.after(self.sim.timers.join_backoff, self.start_join)

    def ch_handle_assoc(self, p: Packet) -> Optional[tuple[Packet, Optional[Packet]]]:
        a = ChAssocName.from_name(p.name)
        if a.ch_unique_name != self.id:
            # overheard: the CN is moving to another CH
            if a.node_id in self.members:
                self.members.remove(a.node_id)
                self._mark("member_removed", a.node_id, peer=a.ch_unique_name)
            return None
        if self.cluster_type != HETEROGENEOUS and a.data_type != self.cluster_type:
            return None
        ack = wire.data(p.name, ACK)
        if self._assoc_seen.get(a.node_id) == p.name and a.node_id in self.members:
            return self.send(ack), None
        self._assoc_seen[a.node_id] = p.name
        rec = MemberRecord(a.node_id, self.id, a.location, a.data_type, self.now)
        fresh = a.node_id not in self.members
        self.members.upsert(rec)
        self.directory.remove(a.node_id)
        if fresh:
            self._mark("member_added", a.node_id)
        self.send(ack)
        return ack, self.ch_sync_new_member(rec)

    def _cn_assoc_data(self, p: Packet) -> None:
        if self.assoc_state is not AssocState.ASSOCIATING or p.name != self._assoc_name:
            return
        chosen = self._chosen
        self.ch_name = chosen.ch_name
        self.ch_info = chosen
        self.assoc_state = AssocState.ASSOCIATED
        jt = JoinTimers(self._join_start, self._selected_at, self.now)
        self.join_traces.append(jt)
        self._mark("joined", p.name, jt.t_join, peer=chosen.ch_name)
        self.start_sensing()

    # -- synchronization --------------------------------------------------
    def ch_sync_new_member(self, rec: MemberRecord) -> Packet:
        name = SyncName(CnName(rec.cn_id, rec.ch_name, rec.location, rec.data_type,
                               self.sim.epoch(rec.joined_at))).to_name()
        self._seen_sync.add(str(name))
        self._mark("sync_start", name, len(self.members))
        return self.send(self.interest(name))

    def handle_sync(self, p: Packet, sender: str) -> Optional[Packet]:
        member = SyncName.from_name(p.name).member
        key = p.name_str
        if self.is_ch:
            if member.ch_name == self.id or sender != member.ch_name or key in self._seen_sync:
                return None
            self._seen_sync.add(key)
            self.directory.upsert(MemberRecord(member.cn_id, member.ch_name, member.location,
                                               member.data_type, self.now))
            self.fib.add(member.ch_name, sender)
            if member.cn_id in self.members:
                self.members.remove(member.cn_id)
                self._mark("member_removed", member.cn_id, peer=member.ch_name)
            self._mark("sync_recv", p.name, peer=sender)
            if self.sync_share:
                self.send(self.interest(p.name), self._jitter())
            return self.send(wire.data(p.name, ACK), self._jitter())
        if sender != self.ch_name or key in self._seen_sync:
            return None
        self._seen_sync.add(key)
        self._mark("sync_recv", p.name, peer=sender)
        if not self.store_sync:
            return None
        self.directory.upsert(MemberRecord(member.cn_id, member.ch_name, member.location,
                                           member.data_type, self.now))
        return self.send(wire.data(p.name, ACK), self._jitter())

    # -- mobility ---------------------------------------------------------
    def cn_mobility_rejoin(self, x: float, y: float) -> Optional[Packet]:
        if self.assoc_state is not AssocState.ASSOCIATED or self.is_ch:
            raise NotAssociated(f"{self.id} must be an associated CN to move")
        old = self.ch_name
        self.sim.move(self.id, x, y)
        self.assoc_state = AssocState.UNASSOCIATED
        self.ch_name = None
        self._mark("move", value=0, peer=old or "-")
        return self.start_join()

    # -- sensing and CN serving ------------------------------------------
    def start_sensing(self) -> None:
        if self._sensing or self.sim.timers.sense_interval <= 0:
            return
        self._sensing = True
        self.sim.after(0, self._sense_tick)

    def _sense_tick(self) -> None:
        value = round(15 + 20 * self.sim.rng.random(), 1)
        self.cn_sense(self.data_type[:3], value)
        self.sim.after(self.sim.timers.sense_interval, self._sense_tick)

    def cn_sense(self, task: str, value: float, epoch: Optional[int] = None) -> Sample:
        s = Sample(self.id, task, self.sim.epoch() if epoch is None else epoch, value,
                   self.location)
        self.add_sample(s)
        return s

    def cn_serve(self, p: Packet) -> Optional[Packet]:
        cn = CnName.from_name(p.name)
        if cn.cn_id != self.id or cn.ch_name != self.ch_name:
            return None
        s = self.nearest_sample(cn.epoch_time)
        if s is None:
            return None
        if cn.epoch_time is None:
            d = wire.data(Name(p.name.components + (str(s.epoch_time),)), wire.encode_value(s.value))
        else:
            extra = None if s.epoch_time == cn.epoch_time else s.epoch_time
            d = wire.data(p.name, wire.encode_value(s.value, extra))
        return self.send(d, self.sim.timers.processing_delay)

    # -- CH serving and forwarding ---------------------------------------
    def ch_serve(self, p: Packet, sender: str) -> Optional[Packet]:
        ch = ChName.from_name(p.name)
        if ch.ch_prefix != self.id:
            return self._forward_foreign(p, sender)
        if ch.is_query:
            return self._answer_query(p, ch)
        tail: CnName = ch.tail
        if tail.ch_name != self.id:
            return None
        tail_name = tail.to_name()
        cached = self.cs.lookup(tail_name)
        if cached is None:
            cached = self.cs.lookup(p.name)
        if cached is None and tail.epoch_time is not None:
            s = next((x for x in self.store
                      if x.nid == tail.cn_id and x.epoch_time == tail.epoch_time), None)
            if s is not None:
                cached = wire.encode_value(s.value)
        if cached is not None:
            self.pit.insert_or_aggregate(p.name, p.nonce, sender, self.now)
            self.pit.consume(p.name, self.now)
            return self.send(wire.data(p.name, cached), self.sim.timers.processing_delay)
        retx = self._has_face(p.name, sender)
        r = self.pit.insert_or_aggregate(p.name, p.nonce, sender, self.now)
        if r is PitResult.DUPLICATE_NONCE:
            return None
        waiting = self.pending_fetch.setdefault(tail_name, [])
        if p.name not in waiting:
            waiting.append(p.name)
        if r is PitResult.NEW or retx:
            # scenario (a) leg: fetch from the member one hop away
            return self.send(self.interest(tail_name))
        return None

    def _has_face(self, name: Name, face: str) -> bool:
        e = self.pit.get(name, self.now)
        return e is not None and face in e.faces

    def _forward_foreign(self, p: Packet, sender: str) -> Optional[Packet]:
        # only Interests from our own members leave the cluster
        if sender not in self.members or p.hop_limit == 0:
            return None
        if not self.fib.lookup(p.name):
            return None
        retx = self._has_face(p.name, sender)
        r = self.pit.insert_or_aggregate(p.name, p.nonce, sender, self.now)
        if r is PitResult.DUPLICATE_NONCE or (r is PitResult.AGGREGATED and not retx):
            return None
        fwd = wire.interest(p.name, p.nonce, p.payload, p.hop_limit - 1)
        return self.send(fwd)

    def _answer_query(self, p: Packet, ch: ChName) -> Optional[Packet]:
        cached = self.cs.lookup(p.name)
        if cached is None:
            q = parse_query(ch.tail)
            result = eval_query(q, self.store)
            cached, _ = pack_result(result, wire.payload_budget(Kind.DATA, p.name))
            self.cs.insert(p.name, cached, self.now)
        return self.send(wire.data(p.name, cached), self.sim.timers.processing_delay)

    def _ch_member_data(self, p: Packet) -> None:
        cn = CnName.from_name(p.name)
        value, actual = wire.decode_value(p.payload)
        if cn.epoch_time is not None:
            self.add_sample(Sample(cn.cn_id, cn.data_type[:3], actual or cn.epoch_time, value,
                                   cn.location))
        self.cs.insert(p.name, p.payload, self.now)
        self.satisfy(p)
        keys = [p.name]
        if len(p.name) == 5:
            keys.append(Name(p.name.components[:4], open_tail=True))
        for k in keys:
            for chname in self.pending_fetch.pop(k, ()):
                if self.pit.consume(chname, self.now):
                    self.send(wire.data(chname, p.payload))

    def _ch_forward_data(self, p: Packet) -> None:
        self.satisfy(p)
        faces = self.pit.match_data(p.name, self.now)
        if not faces:
            return
        self.cs.insert(p.name, p.payload, self.now)
        self.send(wire.data(p.name, p.payload))

    # -- consumer side ----------------------------------------------------
    def request(self, name: Name, tag: str = "req") -> Packet:
        req = Request(name, tag)
        self.pending[name] = req
        self._mark(tag, name)
        req.timer = self.sim.after(self.sim.timers.interest_timeout, self._request_timeout, name, 1)
        return self._emit_request(name)

    def _emit_request(self, name: Name) -> Packet:
        p = self.send(self.interest(name))
        if self.sim.vanilla:
            # the flooded copies coming back must not look new
            from .vanilla import APP_FACE

            self.pit.insert_or_aggregate(name, p.nonce, APP_FACE, self.now)
        return p

    def _request_timeout(self, name: Name, attempt: int) -> None:
        req = self.pending.get(name)
        if req is None or req.attempts != attempt:
            return
        if attempt > self.sim.cfg.interest_retries:
            del self.pending[name]
            self._mark("timeout", name, attempt)
            return
        req.attempts += 1
        self._mark("retx", name, req.attempts)
        req.timer = self.sim.after(self.sim.timers.interest_timeout, self._request_timeout,
                                   name, req.attempts)
        self._emit_request(name)

    def satisfy(self, p: Packet) -> bool:
        req = self.pending.pop(p.name, None)
        if req is None and len(p.name) > 1:
            req = self.pending.pop(Name(p.name.components[:-1], open_tail=True), None)
        if req is None:
            return False
        if req.timer is not None:
            req.timer.cancel()
        if req.tag == "qreq":
            # per-object fetches come back as a bare sensor value
            objects = wire.result_objects(p.payload) if p.payload[:1] in b"RSBE" else 1
            self._mark("qsat", req.name, objects)
        else:
            self._mark("sat", req.name, 1)
        return True

    def pull(self, rec: MemberRecord) -> Packet:
        """Scenario (a): the CH fetches the latest sample of one member."""
        name = CnName(rec.cn_id, self.id, rec.location, rec.data_type).to_name()
        return self.request(name)

    # -- push -------------------------------------------------------------
    def cn_push(self, sample: Sample) -> Packet:
        if self.assoc_state is not AssocState.ASSOCIATED or self.is_ch:
            raise NotAssociated(f"{self.id} cannot push before associating")
        info = self.ch_info
        name = ChName(self.ch_name, info.sink_distance if info else self.sink_distance,
                      info.cluster_type if info else self.cluster_type,
                      self.cn_name(sample.epoch_time)).to_name()
        payload = wire.encode_value(sample.value)
        self.pending_push[name] = 1
        self._push_payload[name] = payload
        self._mark("push", name)
        self.sim.after(self.sim.timers.push_timeout, self._push_timeout, name, 1)
        return self.send(self.interest(name, payload))

    def _push_timeout(self, name: Name, attempt: int) -> None:
        if self.pending_push.get(name) != attempt:
            return
        if attempt >= self.sim.cfg.push_retries:
            del self.pending_push[name]
            self._push_payload.pop(name, None)
            self._mark("push_fail", name)
            return
        self.pending_push[name] = attempt + 1
        self.send(self.interest(name, self._push_payload[name]))
        self.sim.after(self.sim.timers.push_timeout, self._push_timeout, name, attempt + 1)

    def ch_handle_push(self, p: Packet, sender: str) -> Optional[Packet]:
        ch = ChName.from_name(p.name)
        if ch.is_query or ch.ch_prefix != self.id:
            return None
        tail: CnName = ch.tail
        value, _ = wire.decode_value(p.payload)
        fresh = self.add_sample(Sample(tail.cn_id, tail.data_type[:3], tail.epoch_time or 0,
                                       value, tail.location))
        if fresh:
            self._mark("push_recv", p.name, peer=sender)
        return self.send(wire.data(p.name, ACK))
