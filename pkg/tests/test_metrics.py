from ccicwsn.metrics import (METRICS_HEADER, compute_delays, compute_energy, compute_metrics,
                             metrics_csv_text, read_metrics, sync_receivers, sync_times)
from ccicwsn.trace import EventLog

MS = 1_000_000


def sample_log():
    log = EventLog()
    log.frame(0, "Interest", "A1", "*", "x", 48, "sent")
    log.frame(1 * MS, "Interest", "A1", "B", "x", 48, "delivered")
    log.frame(2 * MS, "Data", "B", "*", "x", 96, "sent")
    log.frame(3 * MS, "Data", "B", "A1", "x", 96, "collided")
    log.frame(4 * MS, "Data", "C", "*", "x", 96, "dropped")
    log.mark(0, "A1", "req", "x")
    log.mark(10 * MS, "A1", "sat", "x", 1)
    log.mark(20 * MS, "A1", "req", "y")
    log.mark(30 * MS, "A1", "qreq", "q")
    log.mark(70 * MS, "A1", "qsat", "q", 4)
    return log


def test_energy_counts_only_transmitted_frames():
    assert compute_energy(sample_log().rows) == (48 * 8 * 0.5e-6, 96 * 8 * 0.5e-6)


def test_delays_and_rates():
    d = compute_delays(sample_log().rows)
    assert d.isd == (0.01,) and d.qsd == (0.04,)
    assert (d.interests_generated, d.interests_satisfied) == (2, 1)
    assert d.query_objects == 4


def test_report_fields():
    m = compute_metrics(sample_log(), "ccic", 1, "t")
    assert m.isr == 0.5 and m.qsr == 1.0
    assert (m.interest_frames, m.data_frames, m.collisions, m.drops) == (1, 1, 1, 1)
    assert m.assoc_time_mean_s is None
    assert tuple(m.__dataclass_fields__) == METRICS_HEADER


def test_sync_time_from_first_air_frame():
    log = EventLog()
    name = "Node_Sync_Message/A1/CH-A/1.0-2.0/tem/5"
    log.mark(0, "CH-A", "sync_start", name, 3)
    log.frame(2 * MS, "Interest", "CH-A", "*", name, 60, "sent")
    log.mark(5 * MS, "A2", "sync_recv", name, peer="CH-A")
    log.mark(9 * MS, "CH-B", "sync_recv", name, peer="CH-A")
    log.mark(9 * MS, "CN-X", "joined", "n", 55 * MS)
    joins, syncs = sync_times(log.rows)
    assert joins == [0.055] and syncs == {name: 0.007}
    assert sync_receivers(log.rows) == {name: {"A2", "CH-B"}}


def test_csv_round_trip(tmp_path):
    m = compute_metrics(sample_log(), "ccic", 1, "t")
    p = tmp_path / "metrics.csv"
    p.write_text(metrics_csv_text([m]))
    (row,) = read_metrics(p)
    assert row["isr"] == "0.5" and row["assoc_time_mean_s"] == ""


def test_event_log_csv_round_trip(tmp_path):
    log = sample_log()
    log.write_csv(tmp_path / "e.csv")
    assert EventLog.read_csv(tmp_path / "e.csv").rows == log.rows
