"""Evaluation metrics computed from an event log.

Everything here is a pure function of the log, so a run can be re-scored
from its ``events.csv`` alone.
"""
from __future__ import annotations

import csv
import io
import logging
from collections import defaultdict, deque
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from statistics import fmean
from typing import Iterable, Optional, Union

from . import wire
from .trace import NS, EventLog, Row

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DelayStats:
    isd: tuple[float, ...]
    qsd: tuple[float, ...]
    interests_generated: int
    interests_satisfied: int
    queries_generated: int
    queries_satisfied: int
    query_objects: int
    unmatched: int


@dataclass
class MetricsReport:
    strategy: str
    seed: int
    topology_id: str
    energy_interest_J: float
    energy_data_J: float
    energy_total_J: float
    isr: Optional[float]
    qsr: Optional[float]
    query_objects: int
    isd_mean_s: Optional[float]
    qsd_mean_s: Optional[float]
    assoc_time_mean_s: Optional[float]
    sync_time_mean_s: Optional[float]
    interests_generated: int
    interests_satisfied: int
    queries_generated: int
    queries_satisfied: int
    interest_frames: int
    data_frames: int
    collisions: int
    drops: int

    def row(self) -> list[str]:
        return [_fmt(v) for v in asdict(self).values()]


METRICS_HEADER = tuple(f.name for f in fields(MetricsReport))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _mean(xs) -> Optional[float]:
    return fmean(xs) if xs else None


def sent_bits(log: Iterable[Row]) -> dict[str, int]:
    bits = {"Interest": 0, "Data": 0}
    for r in log:
        if r.receiver == "*" and r.outcome == "sent":
            bits[r.kind] += r.nbytes * 8
    return bits


def compute_energy(log: Iterable[Row], uj_per_bit: float = wire.ENERGY_UJ_PER_BIT
                   ) -> tuple[float, float]:
    bits = sent_bits(log)
    return wire.energy_j(bits["Interest"], uj_per_bit), wire.energy_j(bits["Data"], uj_per_bit)


def compute_delays(log: Iterable[Row]) -> DelayStats:
    """Pair each request marker with the next satisfaction marker of the
    same (consumer, name). Retransmissions carry their own tag, so every
    request is counted once."""
    open_req: dict[tuple[str, str, str], deque] = defaultdict(deque)
    isd, qsd = [], []
    counts = {"req": 0, "qreq": 0}
    objects = 0
    unmatched = 0
    for r in log:
        if r.kind != "mark":
            continue
        tag = r.outcome
        if tag in ("req", "qreq"):
            counts[tag] += 1
            open_req[(tag, r.sender, r.name)].append(r.time)
        elif tag in ("sat", "qsat"):
            q = open_req.get(("req" if tag == "sat" else "qreq", r.sender, r.name))
            if not q:
                unmatched += 1
                log_unmatched(r)
                continue
            dt = (r.time - q.popleft()) / NS
            if tag == "sat":
                isd.append(dt)
            else:
                qsd.append(dt)
                objects += r.nbytes
    return DelayStats(tuple(isd), tuple(qsd), counts["req"], len(isd), counts["qreq"],
                      len(qsd), objects, unmatched)


def log_unmatched(r: Row) -> None:
    log.debug("unmatched Data for %s at %s", r.name, r.sender)


def compute_assoc_sync(log: Iterable[Row]) -> tuple[Optional[float], Optional[float]]:
    """Mean join time over completed joins, and mean sync time measured from
    the CH's first Sync Interest on the air to the last receiver storing
    the record."""
    joins, syncs = sync_times(log)
    return _mean(joins), _mean(list(syncs.values()))


def sync_times(log: Iterable[Row]) -> tuple[list[float], dict[str, float]]:
    rows = list(log)
    joins = []
    origin: dict[str, str] = {}
    for r in rows:
        if r.kind == "mark" and r.outcome == "joined":
            joins.append(r.nbytes / NS)
        elif r.kind == "mark" and r.outcome == "sync_start":
            origin.setdefault(r.name, r.sender)
    start: dict[str, int] = {}
    last: dict[str, int] = {}
    for r in rows:
        if r.name not in origin:
            continue
        if r.receiver == "*" and r.outcome == "sent" and r.sender == origin[r.name]:
            start.setdefault(r.name, r.time)
        elif r.kind == "mark" and r.outcome == "sync_recv":
            last[r.name] = max(last.get(r.name, 0), r.time)
    return joins, {n: (last[n] - t) / NS for n, t in start.items() if n in last}


def sync_receivers(log: Iterable[Row]) -> dict[str, set[str]]:
    """Distinct nodes that stored each sync record."""
    out: dict[str, set[str]] = defaultdict(set)
    for r in log:
        if r.kind == "mark" and r.outcome == "sync_recv":
            out[r.name].add(r.sender)
    return dict(out)


def compute_metrics(log: EventLog, strategy: str, seed: int, topology_id: str,
                    uj_per_bit: float = wire.ENERGY_UJ_PER_BIT) -> MetricsReport:
    rows = log.rows
    ei, ed = compute_energy(rows, uj_per_bit)
    d = compute_delays(rows)
    assoc, sync = compute_assoc_sync(rows)
    frames = {"Interest": 0, "Data": 0}
    collisions = drops = 0
    for r in rows:
        if r.kind == "mark":
            continue
        if r.receiver == "*":
            if r.outcome == "sent":
                frames[r.kind] += 1
            else:
                drops += 1
        elif r.outcome == "collided":
            collisions += 1
        elif r.outcome == "dropped":
            drops += 1
    return MetricsReport(
        strategy=strategy, seed=seed, topology_id=topology_id,
        energy_interest_J=ei, energy_data_J=ed, energy_total_J=ei + ed,
        isr=d.interests_satisfied / d.interests_generated if d.interests_generated else None,
        qsr=d.queries_satisfied / d.queries_generated if d.queries_generated else None,
        query_objects=d.query_objects,
        isd_mean_s=_mean(d.isd), qsd_mean_s=_mean(d.qsd),
        assoc_time_mean_s=assoc, sync_time_mean_s=sync,
        interests_generated=d.interests_generated, interests_satisfied=d.interests_satisfied,
        queries_generated=d.queries_generated, queries_satisfied=d.queries_satisfied,
        interest_frames=frames["Interest"], data_frames=frames["Data"],
        collisions=collisions, drops=drops,
    )


def metrics_csv_text(reports: Iterable[MetricsReport], extra: Optional[dict] = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    extra_cols = list(extra or {})
    w.writerow(extra_cols + list(METRICS_HEADER))
    for rep in reports:
        w.writerow([str(v) for v in (extra or {}).values()] + rep.row())
    return buf.getvalue()


def read_metrics(path: Union[str, Path]) -> list[dict[str, str]]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
