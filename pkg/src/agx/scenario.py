"""Synthetic scenario generation and network/inventory file ingestion.

Topology families: mesh (complete digraph), random(p) (independent ordered
pairs), power_law(m) (preferential attachment made bidirectional).
Vulnerability counts per host follow a configurable distribution; host
vulnerability identity is controlled by a heterogeneity level between 0%
(one shared set) and 100% (pairwise disjoint sets).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .cvss import CvssMetrics, CvssParseError, parse_vector, serialize_vector
from .model import ReachabilityGraph, Vulnerability, VulnerabilityInventory

HETEROGENEITY_LEVELS = (0, 25, 50, 75, 100)
TOPOLOGY_KINDS = ("mesh", "random", "power_law")
DISTRIBUTION_KINDS = ("uniform", "pareto", "binomial", "poisson")


class ScenarioError(ValueError):
    pass


class PoolSizingError(ScenarioError):
    """The vulnerability catalog cannot cover the requested assignment."""


class SchemaError(ValueError):
    """Ingestion-file violation; `pointer` locates the fault (JSON pointer)."""

    def __init__(self, message: str, pointer: str):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer


@dataclass(frozen=True)
class TopologySpec:
    kind: str = "random"
    p: float = 0.3   # random: edge probability per ordered pair
    m: int = 2       # power_law: out-links per new node

    def __post_init__(self):
        if self.kind not in TOPOLOGY_KINDS:
            raise ScenarioError(f"unknown topology {self.kind!r}")
        if not (0.0 <= self.p <= 1.0):
            raise ScenarioError("edge probability must be in [0, 1]")
        if self.m < 1:
            raise ScenarioError("power_law m must be >= 1")


@dataclass(frozen=True)
class DistributionSpec:
    """Per-host vulnerability-count distribution; params default from the mean."""

    kind: str = "uniform"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DISTRIBUTION_KINDS:
            raise ScenarioError(f"unknown distribution {self.kind!r}")

    def draw_counts(self, rng: np.random.Generator, hosts: int, mean: int) -> np.ndarray:
        if self.kind == "uniform":
            low = int(self.params.get("low", max(0, 1 if mean > 0 else 0)))
            high = int(self.params.get("high", max(low, 2 * mean - 1)))
            counts = rng.integers(low, high + 1, size=hosts)
        elif self.kind == "poisson":
            lam = float(self.params.get("lam", mean))
            counts = rng.poisson(lam, size=hosts)
        elif self.kind == "binomial":
            n = int(self.params.get("n", 2 * mean))
            p = float(self.params.get("p", 0.5))
            counts = rng.binomial(n, p, size=hosts)
        else:  # pareto: Lomax + 1, scaled back to the requested mean
            alpha = float(self.params.get("alpha", 2.0))
            scale = mean * (alpha - 1.0) / alpha
            counts = np.rint((rng.pareto(alpha, size=hosts) + 1.0) * scale)
        return np.maximum(counts, 0).astype(np.int64)


@dataclass(frozen=True)
class ScenarioSpec:
    hosts: int
    topology: TopologySpec = TopologySpec()
    vulns_per_host: int = 3
    distribution: DistributionSpec = DistributionSpec()
    heterogeneity: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.hosts < 2:
            raise ScenarioError("need at least two hosts")
        if self.vulns_per_host < 0:
            raise ScenarioError("vulns_per_host must be >= 0")
        if self.heterogeneity not in HETEROGENEITY_LEVELS:
            raise ScenarioError(f"heterogeneity must be one of {HETEROGENEITY_LEVELS}")

    @staticmethod
    def from_dict(data: dict) -> "ScenarioSpec":
        topo = data.get("topology", {})
        if isinstance(topo, str):
            topo = {"kind": topo}
        dist = data.get("distribution", {})
        if isinstance(dist, str):
            dist = {"kind": dist}
        dist = dict(dist)
        kind = dist.pop("kind", "uniform")
        return ScenarioSpec(
            hosts=int(data["hosts"]),
            topology=TopologySpec(**topo),
            vulns_per_host=int(data.get("vulns_per_host", 3)),
            distribution=DistributionSpec(kind=kind, params=dist),
            heterogeneity=int(data.get("heterogeneity", 50)),
            seed=int(data.get("seed", 0)),
        )


@dataclass(frozen=True)
class VulnerabilityPool:
    """Catalog of template vulnerabilities (real published CVSS vectors)."""

    templates: tuple[tuple[str, CvssMetrics], ...]

    def __len__(self) -> int:
        return len(self.templates)


def default_pool() -> VulnerabilityPool:
    raw = json.loads(resources.files("agx.data").joinpath("vuln_pool.json").read_text())
    return VulnerabilityPool(
        templates=tuple((item["id"], parse_vector(item["cvss"])) for item in raw)
    )


def host_name(index: int, total: int) -> str:
    width = max(2, len(str(total - 1)))
    return f"h{index:0{width}d}"


def generate_topology(spec: ScenarioSpec) -> ReachabilityGraph:
    rng = np.random.default_rng(spec.seed)
    n = spec.hosts
    names = [host_name(i, n) for i in range(n)]
    edges: list[tuple[str, str]] = []

    kind = spec.topology.kind
    if kind == "mesh":
        edges = [(names[a], names[b]) for a in range(n) for b in range(n) if a != b]
    elif kind == "random":
        p = spec.topology.p
        for a in range(n):
            for b in range(n):
                if a != b and rng.random() < p:
                    edges.append((names[a], names[b]))
    else:  # power_law: preferential attachment, degree + 1 weighting
        degree = np.zeros(n, dtype=np.int64)
        for new in range(1, n):
            links = min(spec.topology.m, new)
            available = list(range(new))
            for _ in range(links):
                weights = np.asarray([degree[t] + 1 for t in available], dtype=np.float64)
                weights = weights / weights.sum()
                choice = rng.choice(len(available), p=weights)
                target = available.pop(int(choice))
                edges.append((names[new], names[target]))
                edges.append((names[target], names[new]))
                degree[new] += 1
                degree[target] += 1
    return ReachabilityGraph.of(names, edges)


def assign_vulnerabilities(
    spec: ScenarioSpec, pool: VulnerabilityPool | None = None
) -> VulnerabilityInventory:
    """Draw per-host counts and assign templates per the heterogeneity level.

    A host's draws split into a shared part (a prefix of one common subset,
    (100 - h)% of its count) and a private part from catalog regions disjoint
    across hosts.
    """
    pool = pool or default_pool()
    rng = np.random.default_rng(spec.seed + 1)  # independent of the topology stream
    n = spec.hosts
    counts = spec.distribution.draw_counts(rng, n, spec.vulns_per_host)

    shared_fraction = (100 - spec.heterogeneity) / 100.0
    shared_needs = [int(round(c * shared_fraction)) for c in counts]
    private_needs = [int(c) - s for c, s in zip(counts, shared_needs)]

    order = rng.permutation(len(pool))
    shared_size = max(shared_needs, default=0)
    total_need = shared_size + sum(private_needs)
    if total_need > len(pool):
        raise PoolSizingError(
            f"catalog of {len(pool)} templates cannot cover {total_need} "
            f"(shared {shared_size} + private {sum(private_needs)})"
        )

    by_host: dict[str, list[Vulnerability]] = {}
    cursor = shared_size
    for i in range(n):
        host = host_name(i, n)
        picks = [int(order[k]) for k in range(shared_needs[i])]
        picks.extend(int(order[k]) for k in range(cursor, cursor + private_needs[i]))
        cursor += private_needs[i]
        vulns = []
        for t in picks:
            tid, metrics = pool.templates[t]
            vulns.append(Vulnerability(id=tid, cvss=metrics, host=host))
        by_host[host] = vulns
    return VulnerabilityInventory(by_host=by_host)


def generate_scenario(
    spec: ScenarioSpec, pool: VulnerabilityPool | None = None
) -> tuple[ReachabilityGraph, VulnerabilityInventory]:
    net = generate_topology(spec)
    inv = assign_vulnerabilities(spec, pool)
    inv.validate_against(net)
    return net, inv


# -- JSON ingestion contracts -------------------------------------------------


def network_to_dict(net: ReachabilityGraph) -> dict:
    return {
        "hosts": [{"id": h} for h in sorted(net.nodes)],
        "edges": sorted([a, b] for a, b in net.edges),
    }


def inventory_to_dict(inv: VulnerabilityInventory) -> dict:
    return {
        host: [{"id": v.id, "cvss": serialize_vector(v.cvss)} for v in vulns]
        for host, vulns in sorted(inv.by_host.items())
    }


def network_from_dict(data: dict) -> ReachabilityGraph:
    if not isinstance(data, dict):
        raise SchemaError("expected an object", "")
    hosts = data.get("hosts")
    if not isinstance(hosts, list) or not hosts:
        raise SchemaError("expected a non-empty array", "/hosts")
    ids: list[str] = []
    for i, item in enumerate(hosts):
        if not isinstance(item, dict) or not isinstance(item.get("id"), str) or not item["id"]:
            raise SchemaError("expected an object with a non-empty string 'id'", f"/hosts/{i}")
        ids.append(item["id"])
    if len(set(ids)) != len(ids):
        raise SchemaError("duplicate host ids", "/hosts")
    edges = data.get("edges", [])
    if not isinstance(edges, list):
        raise SchemaError("expected an array", "/edges")
    pairs: list[tuple[str, str]] = []
    known = set(ids)
    for i, edge in enumerate(edges):
        if not isinstance(edge, list) or len(edge) != 2:
            raise SchemaError("expected a [src, dst] pair", f"/edges/{i}")
        for j, endpoint in enumerate(edge):
            if not isinstance(endpoint, str) or endpoint not in known:
                raise SchemaError(f"unknown host {endpoint!r}", f"/edges/{i}/{j}")
        if edge[0] == edge[1]:
            raise SchemaError("self-loop edges are not allowed", f"/edges/{i}")
        pairs.append((edge[0], edge[1]))
    return ReachabilityGraph.of(ids, pairs)


def inventory_from_dict(data: dict, net: ReachabilityGraph | None = None) -> VulnerabilityInventory:
    if not isinstance(data, dict):
        raise SchemaError("expected an object keyed by host id", "")
    by_host: dict[str, list[Vulnerability]] = {}
    for host, vulns in data.items():
        if net is not None and host not in net.nodes:
            raise SchemaError(f"host {host!r} absent from the network", f"/{host}")
        if not isinstance(vulns, list):
            raise SchemaError("expected an array of vulnerabilities", f"/{host}")
        out = []
        for i, item in enumerate(vulns):
            if not isinstance(item, dict):
                raise SchemaError("expected an object", f"/{host}/{i}")
            vid = item.get("id")
            if not isinstance(vid, str) or not vid:
                raise SchemaError("expected a non-empty string 'id'", f"/{host}/{i}/id")
            vector = item.get("cvss")
            if not isinstance(vector, str):
                raise SchemaError("expected a CVSS vector string", f"/{host}/{i}/cvss")
            try:
                metrics = parse_vector(vector)
            except CvssParseError as exc:
                raise SchemaError(str(exc), f"/{host}/{i}/cvss") from exc
            out.append(Vulnerability(id=vid, cvss=metrics, host=host))
        by_host[host] = out
    inv = VulnerabilityInventory(by_host=by_host)
    if net is not None:
        inv.validate_against(net)
    return inv


def load_network(path: str | Path) -> ReachabilityGraph:
    return network_from_dict(json.loads(Path(path).read_text()))


def load_inventory(path: str | Path, net: ReachabilityGraph | None = None) -> VulnerabilityInventory:
    return inventory_from_dict(json.loads(Path(path).read_text()), net)


def save_network(net: ReachabilityGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net), indent=2, sort_keys=True) + "\n")


def save_inventory(inv: VulnerabilityInventory, path: str | Path) -> None:
    Path(path).write_text(json.dumps(inventory_to_dict(inv), indent=2, sort_keys=True) + "\n")
