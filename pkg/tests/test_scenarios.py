"""Frame-by-frame walkthroughs of the four retrieval patterns on an idle medium."""
from collections import Counter

from ccicwsn.names import ChName
from ccicwsn.sim import PRELOAD_EPOCH
from helpers import content_name, member_of, quiet_sim, sent_since, settle


def test_ch_pulls_from_member():
    s = quiet_sim()
    h = s.nodes["CH-A"]
    rec = next(iter(h.members))
    t0 = s.now
    h.pull(rec)
    settle(s)
    sent = sent_since(s, t0)
    assert [(r.kind, r.sender) for r in sent] == [("Interest", "CH-A"), ("Data", rec.cn_id)]
    assert any(x.nid == rec.cn_id for x in h.store)


def test_intra_cluster_fetch_then_cache_hit():
    s = quiet_sim()
    c = member_of(s, "CH-A", consumer=True)
    producer = member_of(s, "CH-A").id
    name = content_name(s, producer)
    t0 = s.now
    c.request(name)
    settle(s)
    sent = sent_since(s, t0)
    assert [(r.kind, r.sender) for r in sent] == [
        ("Interest", c.id), ("Interest", "CH-A"), ("Data", producer), ("Data", "CH-A")]
    assert len(s.log.marks("sat")) == 1
    t1 = s.now
    c.request(name)
    settle(s)
    assert [(r.kind, r.sender) for r in sent_since(s, t1)] == [("Interest", c.id), ("Data", "CH-A")]
    assert len(s.log.marks("sat")) == 2


def test_inter_cluster_fetch_is_six_frames():
    s = quiet_sim()
    c = member_of(s, "CH-B", consumer=True)
    producer = member_of(s, "CH-A").id
    t0 = s.now
    c.request(content_name(s, producer))
    settle(s)
    by = Counter(r.sender for r in sent_since(s, t0))
    assert by == Counter({"CH-B": 2, "CH-A": 2, c.id: 1, producer: 1})
    assert len(s.log.marks("sat")) == 1


def test_inter_ch_lite_query_returns_four_objects():
    s = quiet_sim()
    d, a = s.nodes["CH-D"], s.nodes["CH-A"]
    q = f"tem.time_gt_{PRELOAD_EPOCH - 1}_limit_4_asc"
    t0 = s.now
    d.request(ChName(a.id, a.sink_distance, a.cluster_type, q).to_name(), "qreq")
    settle(s)
    assert [(r.kind, r.sender) for r in sent_since(s, t0)] == [("Interest", "CH-D"), ("Data", "CH-A")]
    (sat,) = s.log.marks("qsat")
    assert sat.nbytes == 4


def test_open_tail_latest_sample():
    s = quiet_sim()
    h = s.nodes["CH-C"]
    rec = next(iter(h.members))
    latest = s.nodes[rec.cn_id].store[-1]
    h.pull(rec)
    settle(s)
    assert (rec.cn_id, latest.epoch_time) in {(x.nid, x.epoch_time) for x in h.store}


def test_push_is_stored_and_acked():
    s = quiet_sim()
    n = member_of(s, "CH-B")
    sample = n.store[-1]
    n.cn_push(sample)
    settle(s)
    assert len(s.log.marks("push_recv")) == 1 and len(s.log.marks("push_ack")) == 1
    assert any(x.nid == n.id and x.epoch_time == sample.epoch_time for x in s.nodes["CH-B"].store)
