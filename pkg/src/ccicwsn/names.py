"""Hierarchical names and the four cluster namespaces.

Display form is ``/``-separated text. A trailing separator marks an open
tail, e.g. a content Interest that omits the time component and therefore
asks for the most recent sample.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Union

SEP = "/"
MTU = 127
# Largest name an Interest frame can carry: MTU minus kind, hop limit,
# nonce, and the two length fields.
MAX_NAME_LEN = MTU - 10
MAX_ID_LEN = 8

CH_INFO = "CH_Info"
CH_ASSOCIATION = "CH_Association"
NODE_SYNC = "Node_Sync_Message"
HETEROGENEOUS = "heterogeneous"


class NameFormatError(ValueError):
    """Base class for malformed names."""


class EmptyComponent(NameFormatError):
    pass


class OversizeName(NameFormatError):
    pass


class BadComponent(NameFormatError):
    pass


@dataclass(frozen=True)
class Name:
    components: tuple[str, ...]
    open_tail: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.components, tuple):
            object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise EmptyComponent("a name needs at least one component")
        for c in self.components:
            if not c:
                raise EmptyComponent("empty name component")
            if SEP in c:
                raise BadComponent(f"component {c!r} contains {SEP!r}")

    def __len__(self) -> int:
        return len(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __str__(self) -> str:
        return render_name(self)

    @property
    def encoded_len(self) -> int:
        return len(render_name(self).encode("utf-8"))

    @property
    def first(self) -> str:
        return self.components[0]

    def append(self, *comps: str) -> "Name":
        return Name(self.components + tuple(comps))

    def is_prefix_of(self, other: "Name") -> bool:
        n = len(self.components)
        return other.components[:n] == self.components


def parse_name(text: str, max_len: int = MAX_NAME_LEN) -> Name:
    if not text:
        raise EmptyComponent("empty name")
    if len(text.encode("utf-8")) > max_len:
        raise OversizeName(f"name is {len(text)} bytes, budget is {max_len}")
    open_tail = text.endswith(SEP) and len(text) > 1
    body = text[:-1] if open_tail else text
    return Name(tuple(body.split(SEP)), open_tail)


def render_name(name: Name) -> str:
    s = SEP.join(name.components)
    return s + SEP if name.open_tail else s


# -- geographic coordinates -------------------------------------------------

def _fmt_coord(v: float, digits: int) -> str:
    s = f"{abs(v):.{digits}f}"
    return "m" + s if v < 0 else s


def _parse_coord(s: str) -> tuple[float, int]:
    neg = s.startswith("m")
    if neg:
        s = s[1:]
    if not s or s.startswith(("+", "-")):
        raise BadComponent(f"bad coordinate {s!r}")
    try:
        v = float(s)
    except ValueError:
        raise BadComponent(f"bad coordinate {s!r}") from None
    digits = len(s.split(".", 1)[1]) if "." in s else 0
    return (-v if neg else v), digits


@dataclass(frozen=True)
class GeoCoord:
    """Latitude/longitude rendered as ``lat-lon`` at fixed precision."""

    lat: float
    lon: float
    lat_digits: int = 3
    lon_digits: int = 6

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise BadComponent("coordinates must be finite")

    def render(self) -> str:
        return f"{_fmt_coord(self.lat, self.lat_digits)}-{_fmt_coord(self.lon, self.lon_digits)}"

    @classmethod
    def parse(cls, text: str) -> "GeoCoord":
        parts = text.split("-")
        if len(parts) != 2:
            raise BadComponent(f"bad location {text!r}")
        lat, ld = _parse_coord(parts[0])
        lon, od = _parse_coord(parts[1])
        return cls(lat, lon, ld, od)


def looks_like_location(text: str) -> bool:
    try:
        GeoCoord.parse(text)
    except NameFormatError:
        return False
    return True


def check_id(ident: str) -> str:
    if not ident or len(ident.encode("utf-8")) > MAX_ID_LEN:
        raise BadComponent(f"id {ident!r} must be 1..{MAX_ID_LEN} bytes")
    if SEP in ident or "|" in ident or not ident.isprintable():
        raise BadComponent(f"id {ident!r} has a forbidden character")
    return ident


def _epoch(t: Optional[int]) -> Optional[str]:
    if t is None:
        return None
    if isinstance(t, bool) or not isinstance(t, int) or t < 0:
        raise BadComponent(f"epoch time must be a non-negative integer, got {t!r}")
    return str(t)


# -- namespaces ---------------------------------------------------------------

@dataclass(frozen=True)
class CnName:
    """Child-node content name: CN-ID / CH-name / location / type / time."""

    cn_id: str
    ch_name: str
    location: GeoCoord
    data_type: str
    epoch_time: Optional[int] = None

    def to_name(self) -> Name:
        comps = [self.cn_id, self.ch_name, self.location.render(), self.data_type]
        t = _epoch(self.epoch_time)
        if t is None:
            return Name(tuple(comps), open_tail=True)
        return Name(tuple(comps) + (t,))

    @classmethod
    def from_components(cls, comps: tuple[str, ...]) -> "CnName":
        if len(comps) not in (4, 5):
            raise BadComponent(f"CN name needs 4 or 5 components, got {len(comps)}")
        t = None
        if len(comps) == 5:
            if not comps[4].isdigit():
                raise BadComponent(f"bad epoch time {comps[4]!r}")
            t = int(comps[4])
        return cls(comps[0], comps[1], GeoCoord.parse(comps[2]), comps[3], t)

    @classmethod
    def from_name(cls, name: Name) -> "CnName":
        return cls.from_components(name.components)

    def with_time(self, t: Optional[int]) -> "CnName":
        return CnName(self.cn_id, self.ch_name, self.location, self.data_type, t)


@dataclass(frozen=True)
class ChName:
    """Cluster-head name: prefix / sink distance / cluster type / tail.

    The tail is either a lite-query string or a :class:`CnName`.
    """

    ch_prefix: str
    sink_distance: int
    cluster_type: str
    tail: Union[str, CnName]

    def to_name(self) -> Name:
        head = (self.ch_prefix, str(self.sink_distance), self.cluster_type)
        if isinstance(self.tail, CnName):
            t = self.tail.to_name()
            return Name(head + t.components, t.open_tail)
        return Name(head + (self.tail,))

    @property
    def is_query(self) -> bool:
        return isinstance(self.tail, str)

    @classmethod
    def from_name(cls, name: Name) -> "ChName":
        c = name.components
        if len(c) < 4 or not c[1].isdigit():
            raise BadComponent(f"not a CH name: {render_name(name)!r}")
        if len(c) == 4 and not name.open_tail:
            return cls(c[0], int(c[1]), c[2], c[3])
        return cls(c[0], int(c[1]), c[2], CnName.from_components(c[3:]))


@dataclass(frozen=True)
class ChInfoName:
    node_id: str
    location: GeoCoord
    data_type: str
    access_time: int

    def to_name(self) -> Name:
        return Name((CH_INFO, self.node_id, self.location.render(), self.data_type,
                     _epoch(self.access_time)))

    @classmethod
    def from_name(cls, name: Name) -> "ChInfoName":
        c = name.components
        if len(c) != 5 or c[0] != CH_INFO:
            raise BadComponent("not a CH_Info name")
        return cls(c[1], GeoCoord.parse(c[2]), c[3], int(c[4]))


@dataclass(frozen=True)
class ChAssocName:
    ch_unique_name: str
    node_id: str
    location: GeoCoord
    data_type: str
    access_time: int

    def to_name(self) -> Name:
        return Name((CH_ASSOCIATION, self.ch_unique_name, self.node_id,
                     self.location.render(), self.data_type, _epoch(self.access_time)))

    @classmethod
    def from_name(cls, name: Name) -> "ChAssocName":
        c = name.components
        if len(c) != 6 or c[0] != CH_ASSOCIATION:
            raise BadComponent("not a CH_Association name")
        return cls(c[1], c[2], GeoCoord.parse(c[3]), c[4], int(c[5]))


@dataclass(frozen=True)
class SyncName:
    member: CnName

    def to_name(self) -> Name:
        inner = self.member.to_name()
        return Name((NODE_SYNC,) + inner.components, inner.open_tail)

    @classmethod
    def from_name(cls, name: Name) -> "SyncName":
        c = name.components
        if c[0] != NODE_SYNC:
            raise BadComponent("not a sync name")
        return cls(CnName.from_components(c[1:]))


class NamespaceKind(enum.Enum):
    CN_CONTENT = "CnContent"
    CH_CONTENT = "ChContent"
    CH_INFO = "ChInfo"
    CH_ASSOCIATION = "ChAssociation"
    SYNC = "Sync"
    OTHER = "Other"


_MARKERS = {
    CH_INFO: NamespaceKind.CH_INFO,
    CH_ASSOCIATION: NamespaceKind.CH_ASSOCIATION,
    NODE_SYNC: NamespaceKind.SYNC,
}


def _is_cn_shape(comps: tuple[str, ...], open_tail: bool) -> bool:
    if len(comps) == 4 and open_tail:
        return looks_like_location(comps[2])
    if len(comps) == 5 and not open_tail:
        return comps[4].isdigit() and looks_like_location(comps[2])
    return False


def classify(name: Name) -> NamespaceKind:
    c = name.components
    kind = _MARKERS.get(c[0])
    if kind is not None:
        return kind
    if _is_cn_shape(c, name.open_tail):
        return NamespaceKind.CN_CONTENT
    if len(c) >= 4 and c[1].isdigit():
        if len(c) == 4 and not name.open_tail:
            from .litequery import is_query

            if is_query(c[3]):
                return NamespaceKind.CH_CONTENT
        elif _is_cn_shape(c[3:], name.open_tail):
            return NamespaceKind.CH_CONTENT
    return NamespaceKind.OTHER


def make_name(parts: Iterable[str]) -> Name:
    return Name(tuple(parts))
