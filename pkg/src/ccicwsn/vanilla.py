"""Vanilla NDN over a broadcast medium: every node floods every Interest it
cannot answer, and Data retraces whatever PIT state the flood left behind.

Content names are ``producer/type/epoch``.
"""
from __future__ import annotations

from typing import TYPE_CHECKING, Optional

from . import wire
from .names import Name
from .tables import PitResult
from .wire import Packet

if TYPE_CHECKING:
    from .node import Node

APP_FACE = "@app"


def content_name(producer: str, data_type: str, epoch: int) -> Name:
    return Name((producer, data_type, str(epoch)))


def _flood_jitter(node: "Node") -> int:
    return node.sim.rng.randrange(node.sim.timers.flood_jitter + 1)


def vanilla_receive(node: "Node", p: Packet, sender: str) -> None:
    if p.is_interest:
        vanilla_forward(node, p, sender)
    else:
        vanilla_data(node, p, sender)


def vanilla_forward(node: "Node", p: Packet, sender: str) -> Optional[Packet]:
    """Answer, rebroadcast or drop one received Interest."""
    now = node.now
    name = p.name
    if len(name) == 3 and name[0] == node.id:
        return _produce(node, p, sender)
    cached = node.cs.lookup(name)
    if cached is not None:
        if node.pit.insert_or_aggregate(name, p.nonce, sender, now) is PitResult.DUPLICATE_NONCE:
            return None
        node.pit.consume(name, now)
        return node.send(wire.data(name, cached), node.sim.timers.processing_delay)
    if p.hop_limit == 0:
        return None
    r = node.pit.insert_or_aggregate(name, p.nonce, sender, now)
    if r is PitResult.DUPLICATE_NONCE:
        return None
    fwd = wire.interest(name, p.nonce, p.payload, p.hop_limit - 1)
    return node.send(fwd, _flood_jitter(node))


def _produce(node: "Node", p: Packet, sender: str) -> Optional[Packet]:
    if node.pit.insert_or_aggregate(p.name, p.nonce, sender, node.now) is PitResult.DUPLICATE_NONCE:
        return None
    node.pit.consume(p.name, node.now)
    try:
        epoch = int(p.name[2])
    except ValueError:
        epoch = None
    s = node.nearest_sample(epoch)
    if s is None:
        return None
    extra = None if s.epoch_time == epoch else s.epoch_time
    return node.send(wire.data(p.name, wire.encode_value(s.value, extra)),
                     node.sim.timers.processing_delay)


def vanilla_data(node: "Node", p: Packet, sender: str) -> None:
    faces = node.pit.consume(p.name, node.now)
    if not faces:
        return
    node.cs.insert(p.name, p.payload, node.now)
    if APP_FACE in faces:
        node.satisfy(p)
        faces = [f for f in faces if f != APP_FACE]
    if faces:
        node.send(wire.data(p.name, p.payload), _flood_jitter(node))
