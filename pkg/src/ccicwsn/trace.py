"""Event log shared by the medium, the nodes, and the metrics pass.

One row per event, ``time,kind,sender,receiver,name,bytes,outcome``:

* frame rows: ``kind`` is ``Interest`` or ``Data``; the transmission itself
  has receiver ``*`` and outcome ``sent``; per-receiver rows carry
  ``delivered``, ``collided`` or ``dropped``. A CSMA give-up is a ``*`` row
  with outcome ``dropped``.
* marker rows: ``kind`` is ``mark``, ``outcome`` is the protocol tag
  (``req``, ``sat``, ``join_start``, ``sync_recv``, ...) and ``bytes`` holds
  the tag's integer argument (objects delivered, attempt number, ...).
"""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Optional, Union

HEADER = ("time", "kind", "sender", "receiver", "name", "bytes", "outcome")
NS = 1_000_000_000


class Row(NamedTuple):
    time: int  # ns
    kind: str
    sender: str
    receiver: str
    name: str
    nbytes: int
    outcome: str


def fmt_time(ns: int) -> str:
    return f"{ns // NS}.{ns % NS:09d}"


def parse_time(text: str) -> int:
    whole, _, frac = text.partition(".")
    return int(whole) * NS + int((frac + "000000000")[:9])


def to_ns(seconds: float) -> int:
    return int(round(seconds * NS))


class EventLog:
    def __init__(self, rows: Optional[Iterable[Row]] = None):
        self.rows: list[Row] = list(rows or ())

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[Row]:
        return iter(self.rows)

    def frame(self, t: int, kind: str, sender: str, receiver: str, name: str,
              nbytes: int, outcome: str) -> None:
        self.rows.append(Row(t, kind, sender, receiver, name, nbytes, outcome))

    def mark(self, t: int, node: str, tag: str, name: str = "", value: int = 0,
             peer: str = "-") -> None:
        self.rows.append(Row(t, "mark", node, peer, name, value, tag))

    def marks(self, tag: str) -> list[Row]:
        return [r for r in self.rows if r.kind == "mark" and r.outcome == tag]

    def sent(self) -> list[Row]:
        return [r for r in self.rows if r.receiver == "*" and r.outcome == "sent"]

    def write_csv(self, dest: Union[str, Path, io.TextIOBase]) -> None:
        if isinstance(dest, (str, Path)):
            with open(dest, "w", newline="") as f:
                self._write(f)
        else:
            self._write(dest)

    def _write(self, f) -> None:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(HEADER)
        for r in self.rows:
            w.writerow((fmt_time(r.time), r.kind, r.sender, r.receiver, r.name, r.nbytes, r.outcome))

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        self._write(buf)
        return buf.getvalue()

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "EventLog":
        with open(path, newline="") as f:
            rd = csv.reader(f)
            header = next(rd)
            if tuple(header) != HEADER:
                raise ValueError(f"unexpected events.csv header {header}")
            return cls(Row(parse_time(t), k, s, r, n, int(b), o) for t, k, s, r, n, b, o in rd)
