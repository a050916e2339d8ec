"""Clustered deployments: one CH at the centre of each grid cell, CNs placed
uniformly inside a disc the CH covers and that stays within CN range."""
from __future__ import annotations

import math
import random
import string
from dataclasses import dataclass, field
from typing import Optional

from .config import RunConfig


class InfeasibleRange(ValueError):
    pass


@dataclass
class NodeSpec:
    id: str
    role: str  # "CH" | "CN"
    x: float
    y: float
    range: float
    cluster: str  # id of the CH the node belongs to (CHs: themselves)
    data_type: str = "tem"
    consumer: bool = False
    resource_flag: Optional[bool] = None  # x_n; defaults to role == CH

    def __post_init__(self) -> None:
        if self.resource_flag is None:
            self.resource_flag = self.role == "CH"


@dataclass
class Topology:
    width: float
    height: float
    nodes: list[NodeSpec] = field(default_factory=list)

    def by_id(self) -> dict[str, NodeSpec]:
        return {n.id: n for n in self.nodes}

    @property
    def heads(self) -> list[NodeSpec]:
        return [n for n in self.nodes if n.role == "CH"]

    def members(self, ch: str) -> list[NodeSpec]:
        return [n for n in self.nodes if n.role == "CN" and n.cluster == ch]

    @property
    def consumers(self) -> list[NodeSpec]:
        return [n for n in self.nodes if n.consumer]

    @property
    def producers(self) -> list[NodeSpec]:
        return [n for n in self.nodes if n.role == "CN" and not n.consumer]

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for n in self.nodes:
            h.update(f"{n.id},{n.role},{n.x:.6f},{n.y:.6f},{n.range},{n.cluster};".encode())
        return h.hexdigest()[:12]


def cluster_label(i: int) -> str:
    letters = string.ascii_uppercase
    s = ""
    i += 1
    while i:
        i, r = divmod(i - 1, 26)
        s = letters[r] + s
    return s


def grid_shape(k: int, width: float, height: float) -> tuple[int, int]:
    cols = max(1, min(k, int(round(math.sqrt(k * width / height)))))
    rows = math.ceil(k / cols)
    return rows, cols


def placement_radius(cfg: RunConfig, cell_w: float, cell_h: float) -> float:
    return min(0.9 * cfg.cn_range, 0.45 * min(cell_w, cell_h))


def build_topology(cfg: RunConfig, seed: Optional[int] = None) -> Topology:
    seed = cfg.seed if seed is None else seed
    rng = random.Random(f"{seed}:topology")
    k = cfg.clusters
    if cfg.nodes < k:
        raise ValueError(f"{cfg.nodes} nodes cannot form {k} clusters")
    if cfg.cn_range <= 0:
        raise InfeasibleRange("CN range must be positive to reach a CH")
    rows, cols = grid_shape(k, cfg.width, cfg.height)
    cw, chh = cfg.width / cols, cfg.height / rows
    rad = placement_radius(cfg, cw, chh)
    if rad <= 0 or cfg.ch_range < rad:
        raise InfeasibleRange("CH range does not cover its cluster")
    types = cfg.data_type_list() or ["tem"]
    n_cn = cfg.nodes - k
    topo = Topology(cfg.width, cfg.height)
    t_i = 0
    for c in range(k):
        r, q = divmod(c, cols)
        cx, cy = (q + 0.5) * cw, (r + 0.5) * chh
        label = cluster_label(c)
        ch_id = f"CH-{label}"
        topo.nodes.append(NodeSpec(ch_id, "CH", cx, cy, cfg.ch_range, ch_id, "tem"))
        count = n_cn // k + (1 if c < n_cn % k else 0)
        members = []
        for j in range(count):
            d = rad * math.sqrt(rng.random())
            a = 2 * math.pi * rng.random()
            x, y = cx + d * math.cos(a), cy + d * math.sin(a)
            members.append(NodeSpec(f"{label}{j + 1}", "CN", x, y, cfg.cn_range, ch_id,
                                    types[t_i % len(types)]))
            t_i += 1
        # consumers come from the bottom half of the cluster
        bottom = [m for m in members if m.y < cy] or members
        for m in rng.sample(bottom, min(cfg.consumers_per_cluster, len(bottom))):
            m.consumer = True
        topo.nodes.extend(members)
    return topo
