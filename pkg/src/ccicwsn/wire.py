"""Compact frame codec sized for a 127-byte 802.15.4 MTU.

Layout (big-endian)::

    kind:1  hop_limit:1  [nonce:4, Interest only]
    name_len:2  name  payload_len:2  payload  zero padding

Frames shorter than the per-kind target (48 bytes Interest, 96 bytes Data)
are zero-padded up to it; the padded length is what the radio transmits and
what the energy model bills.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Optional, Sequence

from .names import MTU, Name, parse_name, render_name

INTEREST_SIZE = 48
DATA_SIZE = 96
DEFAULT_HOP_LIMIT = 8
ENERGY_UJ_PER_BIT = 0.5

_HDR = struct.Struct(">BB")
_NONCE = struct.Struct(">I")
_LEN = struct.Struct(">H")


class WireError(ValueError):
    pass


class Oversize(WireError):
    pass


class Truncated(WireError):
    pass


class BadKindTag(WireError):
    pass


class BadLength(WireError):
    pass


class Kind(enum.IntEnum):
    INTEREST = 0x05
    DATA = 0x06

    @property
    def label(self) -> str:
        return "Interest" if self is Kind.INTEREST else "Data"


DEFAULT_SIZES: Mapping[Kind, int] = {Kind.INTEREST: INTEREST_SIZE, Kind.DATA: DATA_SIZE}


def overhead(kind: Kind) -> int:
    return 10 if kind is Kind.INTEREST else 6


@dataclass(frozen=True)
class Packet:
    kind: Kind
    name: Name
    nonce: int = 0
    payload: bytes = b""
    hop_limit: int = DEFAULT_HOP_LIMIT

    def __post_init__(self) -> None:
        if not 0 <= self.nonce < 2**32:
            raise WireError(f"nonce {self.nonce} outside 32 bits")
        if self.kind is Kind.DATA and self.nonce:
            raise WireError("Data packets carry no nonce")
        if not 0 <= self.hop_limit < 256:
            raise WireError(f"hop limit {self.hop_limit} outside one byte")

    @property
    def is_interest(self) -> bool:
        return self.kind is Kind.INTEREST

    @cached_property
    def frame(self) -> bytes:
        return encode(self)

    @property
    def size_bytes(self) -> int:
        return len(self.frame)

    @cached_property
    def name_str(self) -> str:
        return render_name(self.name)


def interest(name: Name, nonce: int = 0, payload: bytes = b"",
             hop_limit: int = DEFAULT_HOP_LIMIT) -> Packet:
    return Packet(Kind.INTEREST, name, nonce, payload, hop_limit)


def data(name: Name, payload: bytes = b"", hop_limit: int = DEFAULT_HOP_LIMIT) -> Packet:
    return Packet(Kind.DATA, name, 0, payload, hop_limit)


def encode(p: Packet, sizes: Mapping[Kind, int] = DEFAULT_SIZES) -> bytes:
    name = render_name(p.name).encode("utf-8")
    raw_len = overhead(p.kind) + len(name) + len(p.payload)
    if raw_len > MTU:
        raise Oversize(f"{p.kind.label} needs {raw_len} bytes, MTU is {MTU}")
    parts = [_HDR.pack(int(p.kind), p.hop_limit)]
    if p.kind is Kind.INTEREST:
        parts.append(_NONCE.pack(p.nonce))
    parts += [_LEN.pack(len(name)), name, _LEN.pack(len(p.payload)), p.payload]
    out = b"".join(parts)
    target = min(sizes.get(p.kind, 0), MTU)
    if len(out) < target:
        out += bytes(target - len(out))
    return out


def decode(b: bytes) -> Packet:
    if len(b) < _HDR.size:
        raise Truncated("frame shorter than header")
    if len(b) > MTU:
        raise BadLength(f"frame of {len(b)} bytes exceeds MTU")
    tag, hop = _HDR.unpack_from(b, 0)
    try:
        kind = Kind(tag)
    except ValueError:
        raise BadKindTag(f"unknown kind tag 0x{tag:02x}") from None
    off = _HDR.size
    nonce = 0
    if kind is Kind.INTEREST:
        if len(b) < off + _NONCE.size:
            raise Truncated("missing nonce")
        (nonce,) = _NONCE.unpack_from(b, off)
        off += _NONCE.size
    name_b, off = _read_block(b, off)
    payload, off = _read_block(b, off)
    if any(b[off:]):
        raise BadLength("non-zero bytes after payload")
    try:
        name = parse_name(name_b.decode("utf-8"), max_len=MTU)
    except (UnicodeDecodeError, ValueError) as e:
        raise BadLength(f"bad name field: {e}") from None
    return Packet(kind, name, nonce, payload, hop)


def _read_block(b: bytes, off: int) -> tuple[bytes, int]:
    if len(b) < off + _LEN.size:
        raise Truncated("missing length field")
    (n,) = _LEN.unpack_from(b, off)
    off += _LEN.size
    if len(b) < off + n:
        raise Truncated(f"block of {n} bytes runs past end of frame")
    return bytes(b[off:off + n]), off + n


def energy_j(bits: int, uj_per_bit: float = ENERGY_UJ_PER_BIT) -> float:
    # bill in microjoules first: the per-bit constant is exact there
    return bits * uj_per_bit / 1e6


def tx_energy(p: Packet, uj_per_bit: float = ENERGY_UJ_PER_BIT) -> float:
    """Transmission energy of one frame in joules."""
    return energy_j(p.size_bytes * 8, uj_per_bit)


def payload_budget(kind: Kind, name: Name) -> int:
    return MTU - overhead(kind) - name.encoded_len


# -- payload encodings ------------------------------------------------------
# Query results: b"R" count rows..., b"S" float64, b"E" (empty aggregate),
# b"B" 0|1. Each row is nid_len:1 nid epoch:4 value:8.

_ROW_TAIL = struct.Struct(">Id")
ROWS_HEADER = 2


def row_size(nid: str) -> int:
    return 1 + len(nid.encode("utf-8")) + _ROW_TAIL.size


def rows_that_fit(rows: Sequence, budget: int) -> int:
    used = ROWS_HEADER
    n = 0
    for r in rows[:255]:
        used += row_size(r.nid)
        if used > budget:
            break
        n += 1
    return n


def encode_rows(rows: Sequence) -> bytes:
    out = [b"R", bytes([len(rows)])]
    for r in rows:
        nid = r.nid.encode("utf-8")
        out += [bytes([len(nid)]), nid, _ROW_TAIL.pack(r.epoch_time, float(r.value))]
    return b"".join(out)


def decode_rows(b: bytes) -> list[tuple[str, int, float]]:
    if not b or b[:1] != b"R":
        raise BadKindTag("not a row payload")
    n = b[1]
    off = 2
    rows = []
    for _ in range(n):
        k = b[off]
        nid = b[off + 1: off + 1 + k].decode("utf-8")
        off += 1 + k
        epoch, val = _ROW_TAIL.unpack_from(b, off)
        off += _ROW_TAIL.size
        rows.append((nid, epoch, val))
    return rows


def encode_scalar(v: Optional[float]) -> bytes:
    if v is None:
        return b"E"
    return b"S" + struct.pack(">d", float(v))


def encode_boolean(v: bool) -> bytes:
    return b"B" + (b"\x01" if v else b"\x00")


def result_objects(payload: bytes) -> int:
    """Number of content objects a query Data payload carries."""
    if not payload:
        return 0
    tag = payload[:1]
    if tag == b"R":
        return payload[1]
    if tag in (b"S", b"B"):
        return 1
    return 0


def encode_value(value: float, epoch: Optional[int] = None) -> bytes:
    v = float(value)
    s = str(int(v)) if v.is_integer() else repr(v)
    if epoch is not None:
        s += f"|{epoch}"
    return s.encode("ascii")


def decode_value(payload: bytes) -> tuple[float, Optional[int]]:
    text = payload.decode("ascii")
    if "|" in text:
        v, t = text.split("|", 1)
        return float(v), int(t)
    return float(text), None
