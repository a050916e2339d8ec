"""Simulation engine: wires topology, medium and nodes together, generates
the workload, and writes the run directory.
"""
from __future__ import annotations

import csv
import io
import math
import os
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from . import wire
from .config import RunConfig, parse_mobility
from .litequery import Sample
from .medium import Medium, MediumConfig, Radio
from .metrics import MetricsReport, compute_metrics, metrics_csv_text
from .names import ChName, CnName, GeoCoord, Name
from .node import AssocState, ChInfo, Node, Role
from .scheduler import Scheduler
from .tables import TABLE_DUMP_HEADER, MemberRecord, dump_rows
from .topology import NodeSpec, Topology, build_topology
from .trace import NS, EventLog, fmt_time, to_ns
from .vanilla import content_name

EPOCH_BASE = 1578391803  # sim time 0 on the sensors' clocks
PRELOAD_EPOCH = EPOCH_BASE - 100_000
OUTPUT_ROOT_ENV = "CCIC_OUTPUT_ROOT"
METERS_PER_DEG = 111_320.0
PROBE_ID = "PRB"

NODES_HEADER = ("time", "node", "role", "x", "y", "ch_name", "assoc_state", "members",
                "directory", "pit", "fib", "cs", "store", "tx_interest_bits", "tx_data_bits")


@dataclass(frozen=True)
class Timers:
    pit_lifetime: int
    selection_window: int
    assoc_timeout: int
    join_backoff: int
    processing_delay: int
    broadcast_jitter: int
    flood_jitter: int
    interest_timeout: int
    push_timeout: int
    sense_interval: int

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "Timers":
        return cls(**{f: to_ns(getattr(cfg, f)) for f in cls.__dataclass_fields__})


@dataclass
class RunResult:
    log: EventLog
    metrics: MetricsReport
    nodes: dict[str, Node]
    sim: "Simulation"


class Simulation:
    def __init__(self, cfg: RunConfig, topology: Optional[Topology] = None):
        cfg.validate()
        self.cfg = cfg
        self.vanilla = cfg.strategy == "vanilla"
        self.topology = topology or build_topology(cfg)
        seed = cfg.seed
        self.rng = random.Random(f"{seed}:proto")
        self.workload_rng = random.Random(f"{seed}:workload")
        self.sched = Scheduler()
        self.log = EventLog()
        self.timers = Timers.from_config(cfg)
        mcfg = MediumConfig(cfg.data_rate, cfg.propagation_speed, cfg.uj_per_bit, cfg.csma,
                            cfg.backoff_unit, cfg.min_be, cfg.max_be, cfg.max_backoffs,
                            cfg.collisions, cfg.loss_rate, cfg.trace_deliveries,
                            cfg.interest_size, cfg.data_size)
        self.medium = Medium(self.sched, self.log, mcfg, random.Random(f"{seed}:backoff"),
                             random.Random(f"{seed}:loss"))
        self._geo_cos = math.cos(math.radians(cfg.geo_origin_lat))
        if cfg.ch_in_range > 0 and not self.vanilla:
            self.topology.nodes.append(probe_spec(self.topology, cfg.ch_in_range, cfg))
        self.nodes: dict[str, Node] = {}
        for spec in self.topology.nodes:
            n = Node(spec, self)
            self.nodes[spec.id] = n
            self.medium.add(Radio(spec.id, spec.x, spec.y, spec.range, n.on_receive))
        self._started = False
        self._snapshots: list[tuple] = []
        self._tables: list[tuple] = []

    # -- services used by nodes ------------------------------------------
    @property
    def now(self) -> int:
        return self.sched.now

    def after(self, delay: int, fn, *args):
        return self.sched.after(delay, fn, *args)

    def send(self, node: str, p: wire.Packet, delay: int = 0) -> None:
        if delay > 0:
            self.sched.after(delay, self.medium.submit, node, p)
        else:
            self.medium.submit(node, p)

    def mark(self, node: str, tag: str, name: str = "", value: int = 0, peer: str = "-") -> None:
        self.log.mark(self.sched.now, node, tag, name, value, peer)

    def new_nonce(self) -> int:
        return self.rng.getrandbits(32)

    def epoch(self, t: Optional[int] = None) -> int:
        return EPOCH_BASE + (self.sched.now if t is None else t) // NS

    def location(self, x: float, y: float) -> GeoCoord:
        lat = self.cfg.geo_origin_lat + y / METERS_PER_DEG
        lon = self.cfg.geo_origin_lon + x / (METERS_PER_DEG * self._geo_cos)
        return GeoCoord(round(lat, 3), round(lon, 6))

    def move(self, node: str, x: float, y: float) -> None:
        n = self.nodes[node]
        n.x, n.y = x, y
        self.medium.move(node, x, y)

    # -- setup ------------------------------------------------------------
    @property
    def heads(self) -> list[Node]:
        return [n for n in self.nodes.values() if n.is_ch]

    @property
    def producers(self) -> list[Node]:
        return [n for n in self.nodes.values()
                if n.role is Role.CN and not n.consumer and n.id != PROBE_ID]

    @property
    def consumers(self) -> list[Node]:
        return [n for n in self.nodes.values() if n.consumer]

    def start(self) -> None:
        """Schedule bootstrap, workload and housekeeping. Idempotent."""
        if self._started:
            return
        self._started = True
        cfg = self.cfg
        if self.vanilla:
            for n in self.nodes.values():
                if n.role is Role.CN:
                    n.start_sensing()
        elif cfg.bootstrap == "instant":
            self._instant_bootstrap()
        else:
            window = to_ns(cfg.join_window)
            for n in self.nodes.values():
                if n.role is Role.CN and n.id != PROBE_ID:
                    self.sched.at(self.workload_rng.randrange(window + 1), n.start_join)
        if PROBE_ID in self.nodes:
            self.sched.at(to_ns(cfg.probe_time), self.nodes[PROBE_ID].start_join)
        if not self.vanilla:
            self._preload()
            self._schedule_pulls()
            self._schedule_pushes()
        self._schedule_workload()
        for t, node, x, y in parse_mobility(cfg.mobility):
            self.sched.at(to_ns(t), self._mobility, node, x, y)
        self.sched.at(self.timers.pit_lifetime, self._sweep)

    def _instant_bootstrap(self) -> None:
        heads = {n.id: n for n in self.heads}
        for n in self.nodes.values():
            if n.role is not Role.CN or n.id == PROBE_ID:
                continue
            ch = heads[n.home]
            n.ch_name = ch.id
            n.ch_info = ChInfo(ch.id, ch.sink_distance, ch.cluster_type, 0, 0)
            n.assoc_state = AssocState.ASSOCIATED
            ch.members.upsert(MemberRecord(n.id, ch.id, n.location, n.data_type, 0))
            n.start_sensing()
        for h in heads.values():
            for other in heads.values():
                if other is h or not self.medium.in_range(other.id, h.id):
                    continue
                h.fib.add(other.id, other.id)
                for m in other.members:
                    h.directory.upsert(m)

    def _preload(self) -> None:
        # pre-recorded objects each CH can answer queries over
        rng = self.workload_rng
        for h in self.heads:
            ids = [s.id for s in self.topology.members(h.id)] or [h.id]
            for i in range(self.cfg.unique_objects):
                h.add_sample(Sample(ids[i % len(ids)], "tem", PRELOAD_EPOCH + i,
                                    round(15 + 20 * rng.random(), 1)))

    def _sweep(self) -> None:
        for n in self.nodes.values():
            n.pit.sweep(self.now)
        self.sched.after(self.timers.pit_lifetime, self._sweep)

    def _mobility(self, node: str, x: float, y: float) -> None:
        n = self.nodes[node]
        if not self.vanilla and n.role is Role.CN and n.assoc_state is AssocState.ASSOCIATED:
            n.cn_mobility_rejoin(x, y)
        else:
            self.move(node, x, y)

    # -- workload ---------------------------------------------------------
    def _arrival_gap(self, rate: float) -> int:
        if self.cfg.arrivals == "poisson":
            return max(1, to_ns(self.workload_rng.expovariate(rate)))
        return to_ns(1.0 / rate)

    def _schedule_workload(self) -> None:
        start = to_ns(self.cfg.workload_start)
        for c in self.consumers:
            if self.cfg.interest_rate > 0:
                phase = self.workload_rng.randrange(to_ns(1.0 / self.cfg.interest_rate))
                self.sched.at(start + phase, self._content_tick, c)
            if self.cfg.query_rate > 0 and not self.vanilla:
                phase = self.workload_rng.randrange(to_ns(1.0 / self.cfg.query_rate))
                self.sched.at(start + phase, self._query_tick, c)

    def _content_tick(self, c: Node) -> None:
        self.sched.after(self._arrival_gap(self.cfg.interest_rate), self._content_tick, c)
        name = self.content_request_name(c)
        if name is not None:
            c.request(name)

    def content_request_name(self, c: Node) -> Optional[Name]:
        rng = self.workload_rng
        pool = [p for p in self.producers if p is not c]
        if not pool:
            return None
        target = rng.choice(pool)
        lag = rng.randint(1, max(1, self.cfg.request_lag_max))
        epoch = max(EPOCH_BASE, self.epoch() - lag)
        if self.vanilla:
            return content_name(target.id, target.data_type, epoch)
        if c.assoc_state is not AssocState.ASSOCIATED or target.assoc_state is not AssocState.ASSOCIATED:
            return None
        ch = self.nodes[target.ch_name]
        tail = CnName(target.id, ch.id, target.location, target.data_type, epoch)
        return ChName(ch.id, ch.sink_distance, ch.cluster_type, tail).to_name()

    def _query_tick(self, c: Node) -> None:
        self.sched.after(self._arrival_gap(self.cfg.query_rate), self._query_tick, c)
        if c.assoc_state is not AssocState.ASSOCIATED:
            return
        rng = self.workload_rng
        ch = rng.choice(self.heads)
        k = self.cfg.objects_per_query
        first = rng.randrange(self.cfg.unique_objects - k + 1)
        if self.cfg.query_mode == "lite":
            q = f"tem.time_gt_{PRELOAD_EPOCH + first - 1}_limit_{k}_asc"
            c.request(ChName(ch.id, ch.sink_distance, ch.cluster_type, q).to_name(), "qreq")
            return
        objs = [s for s in ch.store if PRELOAD_EPOCH <= s.epoch_time < EPOCH_BASE]
        for s in objs[first:first + k]:
            spec = self.topology.by_id().get(s.nid)
            loc = self.location(spec.x, spec.y) if spec else ch.location
            tail = CnName(s.nid, ch.id, loc, "tem", s.epoch_time)
            c.request(ChName(ch.id, ch.sink_distance, ch.cluster_type, tail).to_name(), "qreq")

    def _schedule_pulls(self) -> None:
        if self.cfg.pull_period <= 0:
            return
        period = to_ns(self.cfg.pull_period)
        start = to_ns(self.cfg.workload_start)
        for i, h in enumerate(self.heads):
            self.sched.at(start + i * period // (4 * max(1, len(self.heads))), self._pull_cycle, h)

    def _pull_cycle(self, h: Node) -> None:
        period = to_ns(self.cfg.pull_period)
        recs = list(h.members)
        for i, rec in enumerate(recs):
            self.sched.after(i * period // len(recs), self._pull_one, h, rec.cn_id)
        self.sched.after(period, self._pull_cycle, h)

    def _pull_one(self, h: Node, cn_id: str) -> None:
        rec = h.members.lookup(cn_id)
        if rec is not None:
            h.pull(rec)

    def _schedule_pushes(self) -> None:
        if self.cfg.push_interval <= 0:
            return
        gap = to_ns(self.cfg.push_interval)
        start = to_ns(self.cfg.workload_start)
        for p in self.producers:
            self.sched.at(start + self.workload_rng.randrange(gap), self._push_tick, p)

    def _push_tick(self, n: Node) -> None:
        self.sched.after(to_ns(self.cfg.push_interval), self._push_tick, n)
        if n.assoc_state is AssocState.ASSOCIATED and n.store:
            n.cn_push(n.store[-1])

    # -- running ----------------------------------------------------------
    def run(self, until: Optional[float] = None) -> RunResult:
        self.start()
        end = to_ns(self.cfg.duration if until is None else until)
        for t in self.cfg.checkpoint_times():
            tn = to_ns(t)
            if self.now <= tn <= end:
                self.sched.run(tn)
                self._checkpoint()
        self.sched.run(end)
        self._checkpoint()
        return RunResult(self.log, self.metrics(), self.nodes, self)

    def metrics(self) -> MetricsReport:
        return compute_metrics(self.log, self.cfg.strategy, self.cfg.seed,
                               self.topology.fingerprint(), self.cfg.uj_per_bit)

    def _checkpoint(self) -> None:
        now_s = fmt_time(self.now)
        bits = self.medium.ledger.bits
        for n in self.nodes.values():
            b = bits.get(n.id, {"Interest": 0, "Data": 0})
            self._snapshots.append((now_s, n.id, n.role.value, f"{n.x:.3f}", f"{n.y:.3f}",
                                    n.ch_name or "", n.assoc_state.value, len(n.members),
                                    len(n.directory), len(n.pit), len(n.fib), len(n.cs),
                                    len(n.store), b["Interest"], b["Data"]))
            self._tables.extend(dump_rows(n.id, now_s, n.pit, n.fib, n.cs, n.members))

    # -- output -----------------------------------------------------------
    def nodes_csv_text(self) -> str:
        return _csv_text(NODES_HEADER, self._snapshots)

    def tables_csv_text(self) -> str:
        return _csv_text(TABLE_DUMP_HEADER, self._tables)

    def write(self, out_dir: Union[str, Path], metrics: Optional[MetricsReport] = None) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.log.write_csv(out / "events.csv")
        (out / "metrics.csv").write_text(metrics_csv_text([metrics or self.metrics()]))
        (out / "nodes.csv").write_text(self.nodes_csv_text())
        (out / "tables.csv").write_text(self.tables_csv_text())
        return out


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def probe_spec(topo: Topology, k: int, cfg: RunConfig) -> NodeSpec:
    """A late-joining CN near the first CH whose range covers exactly the k
    nearest CHs."""
    heads = topo.heads
    if not 1 <= k <= len(heads):
        raise ValueError(f"ch_in_range={k} but the topology has {len(heads)} CHs")
    h0 = heads[0]
    x, y = h0.x + 0.1 * cfg.cn_range, h0.y + 0.05 * cfg.cn_range
    dists = sorted(math.hypot(h.x - x, h.y - y) for h in heads)
    rng = (dists[k - 1] + dists[k]) / 2 if k < len(dists) else dists[-1] + 1.0
    return NodeSpec(PROBE_ID, "CN", x, y, rng, h0.id, "tem")


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def run(cfg: RunConfig, topology: Optional[Topology] = None) -> RunResult:
    return Simulation(cfg, topology).run()
