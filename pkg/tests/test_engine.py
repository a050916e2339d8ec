import math

import pytest

from ccicwsn.config import RunConfig
from ccicwsn.names import parse_name
from ccicwsn.scheduler import Scheduler, SchedulingError
from ccicwsn.sim import EPOCH_BASE, PROBE_ID, Simulation, probe_spec
from ccicwsn.topology import InfeasibleRange, build_topology, cluster_label
from ccicwsn.trace import fmt_time, parse_time, to_ns
from ccicwsn.vanilla import APP_FACE, content_name, vanilla_forward
from ccicwsn import wire


def test_scheduler_orders_ties_by_insertion():
    s = Scheduler()
    out = []
    s.at(5, out.append, "b")
    s.at(1, out.append, "a")
    s.at(5, out.append, "c")
    ev = s.at(3, out.append, "x")
    ev.cancel()
    s.run(10)
    assert out == ["a", "b", "c"] and s.now == 10
    with pytest.raises(SchedulingError):
        s.at(2, out.append, "late")


def test_time_format_round_trip():
    for ns in (0, 1, 1_536_000, 123_456_789_012):
        assert parse_time(fmt_time(ns)) == ns
    assert fmt_time(to_ns(1.5)) == "1.500000000"


def test_default_topology_shape():
    cfg = RunConfig()
    topo = build_topology(cfg)
    heads = topo.heads
    assert [h.id for h in heads] == ["CH-A", "CH-B", "CH-C", "CH-D"]
    assert len(topo.nodes) == 100
    for n in topo.nodes:
        if n.role == "CN":
            h = topo.by_id()[n.cluster]
            assert math.hypot(n.x - h.x, n.y - h.y) <= cfg.cn_range
    assert len(topo.consumers) == 4
    assert build_topology(cfg).fingerprint() == topo.fingerprint()
    assert build_topology(cfg.replace(seed=2)).fingerprint() != topo.fingerprint()


def test_cluster_labels():
    assert [cluster_label(i) for i in (0, 25, 26, 27)] == ["A", "Z", "AA", "AB"]


def test_infeasible_ranges():
    with pytest.raises(InfeasibleRange):
        build_topology(RunConfig().replace(ch_range=5.0))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_probe_hears_exactly_k_heads(k):
    cfg = RunConfig()
    topo = build_topology(cfg)
    p = probe_spec(topo, k, cfg)
    assert sum(math.hypot(h.x - p.x, h.y - p.y) <= p.range for h in topo.heads) == k
    assert PROBE_ID in Simulation(cfg.replace(ch_in_range=k)).nodes


def test_vanilla_rules():
    s = Simulation(RunConfig().replace(strategy="vanilla", nodes=20, interest_rate=0.0))
    s.start()
    s.sched.run(to_ns(3))
    prod = next(n for n in s.producers)
    other = next(n for n in s.nodes.values() if n is not prod and n.id != prod.id)
    name = content_name(prod.id, prod.data_type, s.epoch() - 1)
    p = wire.interest(name, 42, hop_limit=3)
    fwd = vanilla_forward(other, p, "X")
    assert fwd.is_interest and fwd.hop_limit == 2 and fwd.nonce == 42
    assert vanilla_forward(other, p, "Y") is None           # same nonce seen
    assert vanilla_forward(other, wire.interest(name, 43, hop_limit=0), "X") is None
    answer = vanilla_forward(prod, wire.interest(name, 44), "X")
    assert not answer.is_interest and wire.decode_value(answer.payload)[0] > 0


def test_vanilla_end_to_end_and_caching():
    s = Simulation(RunConfig().replace(strategy="vanilla", nodes=20, interest_rate=0.0))
    s.start()
    s.sched.run(to_ns(3))
    c = s.consumers[0]
    prod = next(n for n in s.producers if n.home != c.home)
    name = content_name(prod.id, prod.data_type, s.epoch() - 1)
    c.request(name)
    s.sched.run(s.now + to_ns(3))
    assert len(s.log.marks("sat")) == 1
    assert sum(1 for n in s.nodes.values() if n.cs.lookup(name) is not None) >= 1
    assert APP_FACE not in [f for e in c.pit.entries() for f in e.faces]


def test_epoch_clock():
    s = Simulation(RunConfig().replace(nodes=20))
    assert s.epoch(0) == EPOCH_BASE
    assert s.epoch(to_ns(2.5)) == EPOCH_BASE + 2


def test_ccic_run_is_sane():
    res = Simulation(RunConfig().replace(duration=20.0, nodes=40)).run()
    m = res.metrics
    assert m.interests_generated > 0 and 0 < m.isr <= 1
    assert m.energy_total_J == m.energy_interest_J + m.energy_data_J
    assert m.assoc_time_mean_s > 0 and m.sync_time_mean_s > 0
