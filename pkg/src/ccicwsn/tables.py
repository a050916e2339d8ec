"""Forwarder state: PIT, FIB, CS, and the members collection.

All times are integer nanoseconds of simulation time.
"""
from __future__ import annotations

import enum
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .names import GeoCoord, Name

PIT_LIFETIME_NS = 4_000_000_000
CS_CAPACITY = 64


class PitResult(enum.Enum):
    NEW = "New"
    AGGREGATED = "Aggregated"
    DUPLICATE_NONCE = "DuplicateNonce"


@dataclass
class PitEntry:
    name: Name
    created: int
    expiry: int
    nonces: set[int] = field(default_factory=set)
    # dict keeps arrival order deterministic
    faces: dict[str, None] = field(default_factory=dict)


class Pit:
    def __init__(self, lifetime_ns: int = PIT_LIFETIME_NS):
        self.lifetime = lifetime_ns
        self._entries: dict[Name, PitEntry] = {}
        # nonces of satisfied/expired entries, kept one lifetime to catch
        # late copies of a flooded Interest
        self._dead: dict[tuple[Name, int], int] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, name: Name) -> bool:
        return name in self._entries

    def entries(self) -> Iterator[PitEntry]:
        return iter(list(self._entries.values()))

    def get(self, name: Name, now: int) -> Optional[PitEntry]:
        e = self._entries.get(name)
        if e is not None and now >= e.expiry:
            self._retire(e, now)
            return None
        return e

    def insert_or_aggregate(self, name: Name, nonce: int, face: str, now: int) -> PitResult:
        dead = self._dead.get((name, nonce))
        if dead is not None:
            if now < dead:
                return PitResult.DUPLICATE_NONCE
            del self._dead[(name, nonce)]
        e = self.get(name, now)
        if e is None:
            e = PitEntry(name, now, now + self.lifetime)
            e.nonces.add(nonce)
            e.faces[face] = None
            self._entries[name] = e
            return PitResult.NEW
        if nonce in e.nonces:
            return PitResult.DUPLICATE_NONCE
        e.nonces.add(nonce)
        e.faces[face] = None
        return PitResult.AGGREGATED

    def consume(self, name: Name, now: int) -> list[str]:
        """Remove a live entry and return its arrival faces (empty if none)."""
        e = self._entries.get(name)
        if e is None:
            return []
        self._retire(e, now)
        if now >= e.expiry:
            return []
        return list(e.faces)

    def match_data(self, name: Name, now: int) -> list[str]:
        """Consume the entry for a Data name, or for the open-tail Interest
        that asked for the latest sample under the same prefix."""
        faces = self.consume(name, now)
        if len(name) > 1:
            prefix = Name(name.components[:-1], open_tail=True)
            for f in self.consume(prefix, now):
                if f not in faces:
                    faces.append(f)
        return faces

    def sweep(self, now: int) -> int:
        gone = [e for e in self._entries.values() if e.expiry <= now]
        for e in gone:
            self._retire(e, now)
        for k in [k for k, t in self._dead.items() if t <= now]:
            del self._dead[k]
        return len(gone)

    def _retire(self, e: PitEntry, now: int) -> None:
        self._entries.pop(e.name, None)
        until = max(e.expiry, now) + self.lifetime
        for n in e.nonces:
            self._dead[(e.name, n)] = until


class Fib:
    """First-component prefix routes."""

    def __init__(self) -> None:
        self._routes: dict[str, dict[str, None]] = {}

    def add(self, prefix: str, next_hop: str) -> None:
        self._routes.setdefault(prefix, {})[next_hop] = None

    def remove(self, prefix: str) -> None:
        self._routes.pop(prefix, None)

    def lookup(self, name: Name) -> list[str]:
        return list(self._routes.get(name.first, ()))

    def items(self) -> Iterator[tuple[str, list[str]]]:
        for p, hops in self._routes.items():
            yield p, list(hops)

    def __len__(self) -> int:
        return len(self._routes)


@dataclass
class CsEntry:
    name: Name
    payload: bytes
    stored_at: int


class ContentStore:
    """Exact-name cache with FIFO replacement."""

    def __init__(self, capacity: int = CS_CAPACITY):
        self.capacity = capacity
        self._entries: OrderedDict[Name, CsEntry] = OrderedDict()

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, name: Name) -> Optional[bytes]:
        e = self._entries.get(name)
        return None if e is None else e.payload

    def insert(self, name: Name, payload: bytes, now: int) -> None:
        if self.capacity <= 0:
            return
        if name in self._entries:
            self._entries[name] = CsEntry(name, payload, self._entries[name].stored_at)
            return
        while len(self._entries) >= self.capacity:
            self._entries.popitem(last=False)
        self._entries[name] = CsEntry(name, payload, now)

    def entries(self) -> Iterator[CsEntry]:
        return iter(list(self._entries.values()))


@dataclass(frozen=True)
class MemberRecord:
    cn_id: str
    ch_name: str
    location: GeoCoord
    data_type: str
    joined_at: int


class MembersCollection:
    def __init__(self) -> None:
        self._records: dict[str, MemberRecord] = {}

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, cn_id: str) -> bool:
        return cn_id in self._records

    def __iter__(self) -> Iterator[MemberRecord]:
        return iter(list(self._records.values()))

    def upsert(self, rec: MemberRecord) -> None:
        self._records[rec.cn_id] = rec

    def remove(self, cn_id: str) -> Optional[MemberRecord]:
        return self._records.pop(cn_id, None)

    def lookup(self, cn_id: str) -> Optional[MemberRecord]:
        return self._records.get(cn_id)


TABLE_DUMP_HEADER = ("time", "node", "table", "name", "detail")


def dump_rows(node_id: str, now_s: str, pit: Pit, fib: Fib, cs: ContentStore,
              members: MembersCollection) -> list[tuple]:
    rows = []
    for e in pit.entries():
        rows.append((now_s, node_id, "pit", str(e.name),
                     f"faces={' '.join(e.faces)};expiry={e.expiry}"))
    for p, hops in fib.items():
        rows.append((now_s, node_id, "fib", p, f"next_hops={' '.join(hops)}"))
    for e in cs.entries():
        rows.append((now_s, node_id, "cs", str(e.name), f"bytes={len(e.payload)};stored_at={e.stored_at}"))
    for m in members:
        rows.append((now_s, node_id, "members", m.cn_id,
                     f"ch={m.ch_name};loc={m.location.render()};type={m.data_type};joined_at={m.joined_at}"))
    return rows
