"""Acceptance suite. Each test records one PASS/FAIL line, printed in the
terminal summary, then asserts."""
import random
import time
from statistics import fmean

import pytest

from ccicwsn import wire
from ccicwsn.config import RunConfig
from ccicwsn.litequery import Sample, eval_query, parse_query
from ccicwsn.medium import Medium, MediumConfig, Radio
from ccicwsn.metrics import compute_energy, sync_receivers
from ccicwsn.names import MTU, Name, parse_name
from ccicwsn.node import AssocState
from ccicwsn.scheduler import Scheduler
from ccicwsn.sim import Simulation
from ccicwsn.trace import EventLog, to_ns
from conftest import CRITERIA
from helpers import QUIET, content_name, member_of, quiet_sim, sent_since, settle
from oracles import eq4, naive_query
from test_litequery import FORMS, random_store, result_tuple

# pinned tolerances
WIRE_BUDGET_S = 5.0
PACKING_MIN = 3.5
ENERGY_RATIO_MAX = 0.30
SWEEP_BUDGET_S = 600.0
ASSOC_RATIO_MAX = 1.5
SWEEP_SECONDS = 30.0


def record(n, ok, detail):
    CRITERIA.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def random_packet(rng):
    comps = ["".join(rng.choice("abcdefghij0123456789-.") for _ in range(rng.randint(1, 10)))
             for _ in range(rng.randint(1, 6))]
    name = Name(tuple(comps), open_tail=rng.random() < 0.2)
    payload = bytes(rng.randrange(256) for _ in range(rng.randint(0, 40)))
    hop = rng.randrange(256)
    if rng.random() < 0.5:
        return wire.interest(name, rng.getrandbits(32), payload, hop)
    return wire.data(name, payload, hop)


def test_c1_wire_exactness():
    rng = random.Random(1)
    t0 = time.perf_counter()
    bad = oversize = 0
    for _ in range(10_000):
        p = random_packet(rng)
        try:
            b = wire.encode(p)
        except wire.Oversize:
            oversize += 1
            continue
        if len(b) > MTU or wire.decode(b) != p or wire.encode(wire.decode(b)) != b:
            bad += 1
    dt = time.perf_counter() - t0
    i = wire.interest(parse_name("A1/x"), 1).size_bytes
    d = wire.data(parse_name("A1/x"), b"1").size_bytes
    record(1, bad == 0 and (i, d) == (48, 96) and dt < WIRE_BUDGET_S,
           f"{10_000 - oversize} round-trips, {bad} mismatches, {oversize} rejected oversize, "
           f"defaults {i}/{d} B, {dt:.2f} s (< {WIRE_BUDGET_S} s)")


def test_c2_energy_oracle():
    sched, log = Scheduler(), EventLog()
    m = Medium(sched, log, MediumConfig())
    m.add(Radio("a", 0, 0, 50, lambda p, s: None))
    m.add(Radio("b", 20, 0, 50, lambda p, s: None))
    name = parse_name("A1/x")
    for k in range(10):
        sched.at(k * 10_000_000, m.submit, "a", wire.interest(name, k + 1))
        sched.at(k * 10_000_000 + 5_000_000, m.submit, "b", wire.data(name, b"1"))
    sched.run(to_ns(1))
    ei, ed = compute_energy(log)
    idle_ok = (ei, ed) == (1.92e-3, 3.84e-3)

    res = Simulation(RunConfig().replace(duration=20.0, seed=3)).run()
    led = res.sim.medium.ledger
    run_ok = (res.metrics.energy_interest_J == led.energy("Interest")
              and res.metrics.energy_data_J == led.energy("Data"))
    frames_ok = led.total_bits("Interest") == sum(r.nbytes * 8 for r in res.log.sent()
                                                  if r.kind == "Interest")
    record(2, idle_ok and run_ok and frames_ok,
           f"idle 10+10: {ei * 1e3:.2f} mJ + {ed * 1e3:.2f} mJ; 20 s run metrics == ledger: {run_ok}")


def test_c3_scenario_frame_counts():
    got = {}
    s = quiet_sim()
    h = s.nodes["CH-A"]
    t0 = s.now
    h.pull(next(iter(h.members)))
    settle(s)
    got["a"] = [r.sender for r in sent_since(s, t0)]

    s = quiet_sim()
    c = member_of(s, "CH-A", consumer=True)
    prod = member_of(s, "CH-A").id
    name = content_name(s, prod)
    t0 = s.now
    c.request(name)
    settle(s)
    got["b-fetch"] = [r.sender for r in sent_since(s, t0)]
    t0 = s.now
    c.request(name)
    settle(s)
    got["b-cache"] = [r.sender for r in sent_since(s, t0)]

    s = quiet_sim()
    cb = member_of(s, "CH-B", consumer=True)
    t0 = s.now
    cb.request(content_name(s, prod))
    settle(s)
    got["c"] = [r.sender for r in sent_since(s, t0)]

    s = quiet_sim()
    a = s.nodes["CH-A"]
    from ccicwsn.names import ChName
    from ccicwsn.sim import PRELOAD_EPOCH
    q = f"tem.time_gt_{PRELOAD_EPOCH - 1}_limit_4_asc"
    t0 = s.now
    s.nodes["CH-D"].request(ChName("CH-A", a.sink_distance, a.cluster_type, q).to_name(), "qreq")
    settle(s)
    got["d"] = [r.sender for r in sent_since(s, t0)]

    want = {"a": ["CH-A", got["a"][1] if len(got["a"]) > 1 else "?"],
            "b-fetch": [c.id, "CH-A", prod, "CH-A"], "b-cache": [c.id, "CH-A"],
            "c": [cb.id, "CH-B", "CH-A", prod, "CH-A", "CH-B"], "d": ["CH-D", "CH-A"]}
    ok = all(got[k] == want[k] for k in want)
    counts = ", ".join(f"({k})={len(v)}" for k, v in got.items())
    record(3, ok, f"{counts}; no other node transmitted: {ok}")


def eq4_trial(seed):
    """Re-join one CN on an ideal medium (no collisions, no channel-access
    failures) and count who hears the sync."""
    rng = random.Random(seed)
    k = rng.randint(2, 9)
    cfg = RunConfig().replace(
        bootstrap="instant", interest_rate=0.0, pull_period=0.0, collisions=False, csma=False,
        clusters=k, nodes=k + rng.randint(k, 6 * k), width=rng.uniform(200, 500),
        height=rng.uniform(150, 400), ch_range=rng.uniform(120, 260), seed=seed)
    s = Simulation(cfg)
    s.start()
    for h in s.heads:
        h.sync_share = rng.random() < 0.6
    s.sched.run(to_ns(1))
    cns = [n for n in s.nodes.values() if not n.is_ch]
    n = rng.choice(cns)
    s.nodes[n.ch_name].members.remove(n.id)
    n.assoc_state, n.ch_name = AssocState.UNASSOCIATED, None
    n.start_join()
    settle(s, 2.0)
    (start,) = s.log.marks("sync_start")
    h = s.nodes[start.sender]
    nbrs = [o for o in s.heads if o is not h and s.medium.in_range(h.id, o.id)]
    expected = eq4(len(h.members), [(int(o.sync_share), len(o.members)) for o in nbrs])
    got = len(sync_receivers(s.log).get(start.name, ()))
    return expected, got


def eq3_violations(log):
    """Check every recorded join time against the selection and association
    phases rebuilt from the marker rows."""
    bad = checked = 0
    last_start, last_sel = {}, {}
    for r in log:
        if r.kind != "mark":
            continue
        if r.outcome == "join_start":
            last_start[r.sender] = r.time
        elif r.outcome == "ch_selected":
            last_sel[r.sender] = r.time
        elif r.outcome == "joined":
            t_sel = last_sel[r.sender] - last_start[r.sender]
            t_assoc = r.time - last_sel[r.sender]
            checked += 1
            bad += r.nbytes != t_sel + t_assoc or t_sel < 0 or t_assoc < 0
    return checked, bad


def test_c4_join_and_sync_equations():
    res = Simulation(RunConfig().replace(duration=10.0, seed=5, interest_rate=0.0)).run()
    checked, bad = eq3_violations(res.log)
    traces = [jt for n in res.nodes.values() for jt in n.join_traces]
    bad += sum(jt.t_join != jt.t_selection + jt.t_association for jt in traces)
    trials = [eq4_trial(1000 + i) for i in range(50)]
    wrong = [(e, g) for e, g in trials if e != g]
    record(4, checked > 0 and bad == 0 and not wrong,
           f"join identity: {checked} joins, {bad} violations; sync receivers: "
           f"{50 - len(wrong)}/50 topologies exact")


def test_c5_litequery_oracle():
    rng = random.Random(11)
    mismatches = 0
    for _ in range(1000):
        store = random_store(rng, rng.randrange(101))
        for form in FORMS:
            text = form.format(a=rng.randrange(60), b=rng.randrange(60), k=rng.randrange(1, 12),
                               t=1578391803 + rng.randrange(60), u=1578391803 + rng.randrange(60),
                               i=rng.randrange(12))
            mismatches += result_tuple(eval_query(parse_query(text), store)) != naive_query(text, store)
    vals = [10, 25, 26, 30, 50, 51, 9, 14, 12]
    st = [Sample(f"n{i}", "tem", 100 + i, v) for i, v in enumerate(vals)]
    fam = {q: eval_query(parse_query(q), st) for q in
           ("tem.val_gt_25", "tem.val_bet_25_and_50", "tem.val_gt_25_limit_10_dsc",
            "tem.val_gt_25_count", "tem.val_bet_9_and_14_avg")}
    fam_ok = ([x.value for x in fam["tem.val_gt_25"].rows] == [26, 30, 50, 51]
              and [x.value for x in fam["tem.val_bet_25_and_50"].rows] == [25, 26, 30, 50]
              and [x.value for x in fam["tem.val_gt_25_limit_10_dsc"].rows] == [51, 50, 30, 26]
              and fam["tem.val_gt_25_count"].scalar == 4
              and fam["tem.val_bet_9_and_14_avg"].scalar == (10 + 9 + 14 + 12) / 4)
    record(5, mismatches == 0 and fam_ok,
           f"{1000 * len(FORMS)} evaluations over 1000 stores, {mismatches} mismatches; "
           f"gt_25 family: {fam_ok}")


def interests_per_object(mode):
    cfg = RunConfig().replace(**{**QUIET, "nodes": 100}, query_rate=0.5, query_mode=mode,
                              objects_per_query=4, duration=30.0, seed=1)
    res = Simulation(cfg).run()
    # no other traffic runs in this workload, so every Interest frame is query traffic
    frames = sum(1 for r in res.log.sent() if r.kind == "Interest")
    return frames / res.metrics.query_objects, res.metrics.query_objects


def test_c6_query_packing_gain():
    lite, n_lite = interests_per_object("lite")
    per, n_per = interests_per_object("per_object")
    gain = per / lite
    record(6, gain >= PACKING_MIN,
           f"Interest frames per delivered object: per-object {per:.3f} ({n_per} objects), "
           f"lite {lite:.3f} ({n_lite} objects); gain {gain:.2f}x (>= {PACKING_MIN})")


@pytest.fixture(scope="module")
def csma_off_sweep():
    t0 = time.perf_counter()
    out = {}
    for rate in range(2, 21, 2):
        for strat in ("ccic", "vanilla"):
            cfg = RunConfig().replace(strategy=strat, interest_rate=float(rate), csma=False,
                                      duration=SWEEP_SECONDS, seed=1)
            out[rate, strat] = Simulation(cfg).run().metrics
    return out, time.perf_counter() - t0


def test_c7_energy_versus_flooding(csma_off_sweep):
    sweep, dt = csma_off_sweep
    ratios = {r: sweep[r, "ccic"].energy_total_J / sweep[r, "vanilla"].energy_total_J
              for r in range(2, 21, 2)}
    worst = max(ratios.values())
    band = (100 * (1 - max(ratios.values())), 100 * (1 - min(ratios.values())))
    record(7, worst <= ENERGY_RATIO_MAX and dt < SWEEP_BUDGET_S,
           f"CCIC/vanilla energy at 2..20/s: {min(ratios.values()):.3f}..{worst:.3f} "
           f"(<= {ENERGY_RATIO_MAX}); reduction band {band[0]:.1f}-{band[1]:.1f}%; "
           f"sweep {dt:.0f} s")


def test_c8_vanilla_crossover():
    m = {}
    for rate in (2.0, 20.0):
        cfg = RunConfig().replace(strategy="vanilla", interest_rate=rate,
                                  duration=SWEEP_SECONDS, seed=1)
        m[rate] = Simulation(cfg).run().metrics
    lo, hi = m[2.0], m[20.0]
    record(8, lo.energy_data_J > lo.energy_interest_J and hi.energy_interest_J > hi.energy_data_J,
           f"default medium: 2/s Interest {lo.energy_interest_J:.3f} J < Data "
           f"{lo.energy_data_J:.3f} J; 20/s Interest {hi.energy_interest_J:.3f} J > Data "
           f"{hi.energy_data_J:.3f} J")


def test_c9_association_and_sync_scale():
    assoc = {}
    for k in (1, 2, 3):
        cfg = RunConfig().replace(**{**QUIET, "nodes": 100}, ch_in_range=k, duration=10.0, seed=1)
        assoc[k] = Simulation(cfg).run().metrics.assoc_time_mean_s
    ratio = max(assoc.values()) / min(assoc.values())
    sync = {}
    for n in (20, 50, 100, 150, 200):
        vals = []
        for seed in (1, 2, 3):
            cfg = RunConfig().replace(nodes=n, interest_rate=0.0, pull_period=0.0,
                                      duration=7.0, seed=seed)
            vals.append(Simulation(cfg).run().metrics.sync_time_mean_s)
        sync[n] = fmean(vals)
    seq = [sync[n] for n in sorted(sync)]
    mono = all(a <= b for a, b in zip(seq, seq[1:]))
    record(9, ratio < ASSOC_RATIO_MAX and mono,
           "association " + ", ".join(f"{k} CH {1e3 * v:.1f} ms" for k, v in assoc.items())
           + f" (max/min {ratio:.2f} < {ASSOC_RATIO_MAX}); sync "
           + ", ".join(f"{n}: {1e3 * v:.1f} ms" for n, v in sync.items()))


def test_c10_determinism(tmp_path):
    cfg = RunConfig().replace(duration=30.0, seed=7, query_rate=0.2, push_interval=5.0,
                              mobility="15:A2:150:150", checkpoints="10")
    outs = []
    for i in range(2):
        sim = Simulation(cfg)
        res = sim.run()
        outs.append(sim.write(tmp_path / str(i), res.metrics))
    same = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
               for f in ("events.csv", "metrics.csv", "nodes.csv", "tables.csv"))
    rows = len((outs[0] / "events.csv").read_text().splitlines())
    record(10, same, f"two runs, {rows} event rows: outputs byte-identical: {same}")
