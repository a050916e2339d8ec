"""Small deterministic deployments for protocol-level tests."""
from __future__ import annotations

from ccicwsn.config import RunConfig
from ccicwsn.names import ChName, CnName
from ccicwsn.sim import Simulation
from ccicwsn.trace import to_ns

QUIET = dict(bootstrap="instant", interest_rate=0.0, pull_period=0.0, nodes=20, clusters=4)


def quiet_sim(**kw) -> Simulation:
    """Instant-bootstrap simulation with no background traffic, settled for 5 s."""
    cfg = RunConfig().replace(**{**QUIET, **kw})
    s = Simulation(cfg)
    s.start()
    s.sched.run(to_ns(5))
    return s


def settle(s: Simulation, seconds: float = 3.0) -> None:
    s.sched.run(s.now + to_ns(seconds))


def content_name(s: Simulation, producer: str, lag: int = 1):
    p = s.nodes[producer]
    ch = s.nodes[p.ch_name]
    tail = CnName(p.id, ch.id, p.location, p.data_type, s.epoch() - lag)
    return ChName(ch.id, ch.sink_distance, ch.cluster_type, tail).to_name()


def sent_since(s: Simulation, t0: int) -> list:
    return [r for r in s.log if r.time >= t0 and r.receiver == "*" and r.outcome == "sent"]


def member_of(s: Simulation, ch: str, consumer: bool = False):
    return next(n for n in s.nodes.values()
                if n.ch_name == ch and n.consumer == consumer and not n.is_ch)
