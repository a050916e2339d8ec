"""Run configuration: an INI-style file of ``[section]`` blocks and
``key = value`` lines. Every key has a default; unknown keys are errors.
"""
from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Union


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line else msg)


def _opt(default, section: str, doc: str = ""):
    return field(default=default, metadata={"section": section, "doc": doc})


@dataclass
class RunConfig:
    # [run]
    seed: int = _opt(1, "run")
    duration: float = _opt(1800.0, "run", "simulated seconds")
    strategy: str = _opt("ccic", "run", "ccic | vanilla")
    output_dir: str = _opt("", "run")
    trace_deliveries: bool = _opt(True, "run", "log one row per decoded reception")
    checkpoints: str = _opt("", "run", "comma-separated times for nodes.csv dumps")

    # [topology]
    width: float = _opt(300.0, "topology")
    height: float = _opt(200.0, "topology")
    nodes: int = _opt(100, "topology")
    clusters: int = _opt(4, "topology")
    cn_range: float = _opt(50.0, "topology")
    ch_range: float = _opt(190.0, "topology")
    consumers_per_cluster: int = _opt(1, "topology")
    data_types: str = _opt("tem", "topology", "comma-separated, assigned round-robin")
    sink_distance: int = _opt(1, "topology")
    cluster_type: str = _opt("heterogeneous", "topology")
    geo_origin_lat: float = _opt(39.273, "topology")
    geo_origin_lon: float = _opt(11.130647, "topology")
    cs_capacity: int = _opt(64, "topology", "per CH; CNs never cache")
    ch_sync_share: bool = _opt(True, "topology", "a(i): CHs relay sync to their CNs")
    cn_store_members: bool = _opt(False, "topology", "CNs store and ack sync records")
    bootstrap: str = _opt("join", "topology", "join | instant")
    join_window: float = _opt(5.0, "topology", "CNs start joining uniformly in [0, w]")
    ch_in_range: int = _opt(0, "topology", "late probe node hears this many CHs (0 = no probe)")
    probe_time: float = _opt(8.0, "topology")

    # [workload]
    interest_rate: float = _opt(2.0, "workload", "Interests/s per consumer")
    arrivals: str = _opt("fixed", "workload", "fixed | poisson")
    workload_start: float = _opt(6.0, "workload")
    request_lag_max: int = _opt(5, "workload", "request samples up to this many seconds old")
    query_rate: float = _opt(0.0, "workload", "lite queries/s per consumer")
    query_mode: str = _opt("lite", "workload", "lite | per_object")
    unique_objects: int = _opt(20, "workload", "pre-recorded samples per cluster")
    objects_per_query: int = _opt(4, "workload")
    push_interval: float = _opt(0.0, "workload", "0 disables push traffic")
    mobility: str = _opt("", "workload", "time:node:x:y entries separated by ';'")
    sense_interval: float = _opt(1.0, "workload")
    pull_period: float = _opt(10.0, "workload", "CH pull cycle over its members")

    # [timers]
    pit_lifetime: float = _opt(4.0, "timers")
    selection_window: float = _opt(0.05, "timers")
    assoc_timeout: float = _opt(0.1, "timers")
    assoc_retries: int = _opt(3, "timers")
    join_backoff: float = _opt(0.1, "timers")
    processing_delay: float = _opt(0.001, "timers")
    broadcast_jitter: float = _opt(0.01, "timers")
    flood_jitter: float = _opt(0.1, "timers", "vanilla rebroadcast defer, uniform in [0, j]")
    interest_timeout: float = _opt(1.0, "timers")
    interest_retries: int = _opt(2, "timers")
    push_timeout: float = _opt(0.1, "timers")
    push_retries: int = _opt(3, "timers")
    workload_threshold: int = _opt(16, "timers")

    # [packets]
    interest_size: int = _opt(48, "packets")
    data_size: int = _opt(96, "packets")
    hop_limit: int = _opt(8, "packets")

    # [medium]
    uj_per_bit: float = _opt(0.5, "medium", "energy per transmitted bit, microjoules")
    data_rate: int = _opt(250_000, "medium", "bit/s")
    propagation_speed: float = _opt(3.0e8, "medium", "m/s")
    csma: bool = _opt(True, "medium")
    backoff_unit: float = _opt(320e-6, "medium")
    min_be: int = _opt(3, "medium")
    max_be: int = _opt(5, "medium")
    max_backoffs: int = _opt(4, "medium")
    collisions: bool = _opt(True, "medium")
    loss_rate: float = _opt(0.0, "medium")

    def replace(self, **kw: Any) -> "RunConfig":
        cfg = dataclasses.replace(self, **kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.strategy not in ("ccic", "vanilla"):
            raise ConfigError(f"strategy must be ccic or vanilla, got {self.strategy!r}")
        if self.bootstrap not in ("join", "instant"):
            raise ConfigError(f"bootstrap must be join or instant, got {self.bootstrap!r}")
        if self.arrivals not in ("fixed", "poisson"):
            raise ConfigError(f"arrivals must be fixed or poisson, got {self.arrivals!r}")
        if self.query_mode not in ("lite", "per_object"):
            raise ConfigError(f"query_mode must be lite or per_object, got {self.query_mode!r}")
        for name in ("duration", "width", "height", "interest_rate", "query_rate",
                     "pit_lifetime", "processing_delay", "loss_rate"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.clusters < 1 or self.nodes < self.clusters:
            raise ConfigError("need at least one cluster and one node per cluster")
        if not 0 <= self.loss_rate <= 1:
            raise ConfigError("loss_rate must be in [0, 1]")
        if self.data_rate <= 0 or self.propagation_speed <= 0:
            raise ConfigError("data_rate and propagation_speed must be positive")
        if self.objects_per_query < 1 or self.unique_objects < self.objects_per_query:
            raise ConfigError("need 1 <= objects_per_query <= unique_objects")
        parse_mobility(self.mobility)
        self.checkpoint_times()

    def checkpoint_times(self) -> list[float]:
        if not self.checkpoints.strip():
            return []
        try:
            return sorted(float(x) for x in self.checkpoints.split(","))
        except ValueError:
            raise ConfigError(f"bad checkpoints {self.checkpoints!r}") from None

    def data_type_list(self) -> list[str]:
        return [t.strip() for t in self.data_types.split(",") if t.strip()]


def parse_mobility(text: str) -> list[tuple[float, str, float, float]]:
    out = []
    for item in filter(None, (s.strip() for s in text.split(";"))):
        parts = item.split(":")
        if len(parts) != 4:
            raise ConfigError(f"mobility entry {item!r} must be time:node:x:y")
        try:
            out.append((float(parts[0]), parts[1], float(parts[2]), float(parts[3])))
        except ValueError:
            raise ConfigError(f"mobility entry {item!r} has a bad number") from None
    return out


FIELDS = {f.name: f for f in fields(RunConfig)}
SECTIONS: dict[str, list[str]] = {}
for _f in fields(RunConfig):
    SECTIONS.setdefault(_f.metadata["section"], []).append(_f.name)


def _coerce(f: dataclasses.Field, raw: str) -> Any:
    typ = f.type if isinstance(f.type, str) else f.type.__name__
    if typ == "bool":
        v = raw.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if typ == "int":
        return int(raw)
    if typ == "float":
        return float(raw)
    return raw.strip()


def _line_of(text: str, section: str, key: str) -> int | None:
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            cur = m.group(1).strip()
        elif cur == section and re.match(rf"{re.escape(key)}\s*=", s, re.IGNORECASE):
            return i
    return None


def loads(text: str, base: RunConfig | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                   inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(str(e).splitlines()[0], getattr(e, "lineno", None)) from None
    values = dataclasses.asdict(base or RunConfig())
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", _section_line(text, section))
        for key, raw in cp.items(section):
            line = _line_of(text, section, key)
            if key not in SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", line)
            try:
                values[key] = _coerce(FIELDS[key], raw)
            except ValueError as e:
                raise ConfigError(f"{key}: {e}", line) from None
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def _section_line(text: str, section: str) -> int | None:
    for i, line in enumerate(text.splitlines(), 1):
        if line.strip() == f"[{section}]":
            return i
    return None


def load(path: Union[str, Path]) -> RunConfig:
    return loads(Path(path).read_text())


def dumps(cfg: RunConfig) -> str:
    out = []
    for section, names in SECTIONS.items():
        out.append(f"[{section}]")
        for n in names:
            v = getattr(cfg, n)
            if isinstance(v, bool):
                v = "true" if v else "false"
            out.append(f"{n} = {v}")
        out.append("")
    return "\n".join(out)
