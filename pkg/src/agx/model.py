"""Network, inventory, attack-graph, and attack-path data model.

The attack graph is a directed multigraph over per-host security conditions:
for every reachability edge (a, b) and every vulnerability u of host b there
is one labeled edge (a, b, u). Condition ids coincide with host ids (one
"attacker controls host" condition per host).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator

from .cvss import CvssMetrics


class ModelError(ValueError):
    pass


class InvalidPathError(ModelError):
    pass


class InventoryError(ModelError):
    pass


@dataclass(frozen=True)
class ReachabilityGraph:
    """Directed graph of hosts and their communication links."""

    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]

    def __post_init__(self):
        for n in self.nodes:
            if not n:
                raise ModelError("host ids must be non-empty")
        for a, b in self.edges:
            if a == b:
                raise ModelError(f"self-loop edge on host {a!r}")
            if a not in self.nodes or b not in self.nodes:
                raise ModelError(f"edge ({a!r}, {b!r}) references an unknown host")

    @staticmethod
    def of(nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> "ReachabilityGraph":
        return ReachabilityGraph(
            nodes=frozenset(nodes),
            edges=frozenset((a, b) for a, b in edges),
        )

    @cached_property
    def successors(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {n: [] for n in self.nodes}
        for a, b in self.edges:
            out[a].append(b)
        return {n: tuple(sorted(s)) for n, s in out.items()}


@dataclass(frozen=True)
class Vulnerability:
    id: str
    cvss: CvssMetrics
    host: str

    def __post_init__(self):
        if not self.id:
            raise ModelError("vulnerability id must be non-empty")


@dataclass
class VulnerabilityInventory:
    """Per-host vulnerability lists (the scanner output)."""

    by_host: dict[str, list[Vulnerability]]

    def validate_against(self, net: ReachabilityGraph) -> None:
        for host, vulns in self.by_host.items():
            if host not in net.nodes:
                raise InventoryError(f"inventory host {host!r} absent from the network")
            for v in vulns:
                if v.host != host:
                    raise InventoryError(
                        f"vulnerability {v.id!r} listed under {host!r} but carries host {v.host!r}"
                    )

    def get(self, host: str, vuln_id: str) -> Vulnerability | None:
        for v in self.by_host.get(host, ()):
            if v.id == vuln_id:
                return v
        return None

    def all_vulns(self) -> Iterator[Vulnerability]:
        for vulns in self.by_host.values():
            yield from vulns


@dataclass(frozen=True)
class AttackGraph:
    """Directed multigraph of security conditions with vulnerability-labeled edges."""

    nodes: frozenset[str]
    edges: frozenset[tuple[str, str, str]]

    @cached_property
    def multi_edges(self) -> dict[tuple[str, str], tuple[str, ...]]:
        """Vulnerability labels per (source, target) condition pair, sorted."""
        grouped: dict[tuple[str, str], list[str]] = {}
        for a, b, u in self.edges:
            grouped.setdefault((a, b), []).append(u)
        return {k: tuple(sorted(v)) for k, v in grouped.items()}


def build_attack_graph(net: ReachabilityGraph, inv: VulnerabilityInventory) -> AttackGraph:
    """One edge per reachability link and destination-host vulnerability."""
    inv.validate_against(net)
    edges = frozenset(
        (a, b, v.id)
        for a, b in net.edges
        for v in inv.by_host.get(b, ())
    )
    return AttackGraph(nodes=net.nodes, edges=edges)


@dataclass(frozen=True)
class AttackPath:
    """A simple exploit sequence: n >= 2 states interleaved by n-1 vulnerabilities."""

    states: tuple[str, ...]
    vulns: tuple[str, ...]

    def __post_init__(self):
        if len(self.states) < 2:
            raise InvalidPathError("an attack path needs at least two states")
        if len(self.vulns) != len(self.states) - 1:
            raise InvalidPathError("need exactly one vulnerability per transition")
        if len(set(self.states)) != len(self.states):
            raise InvalidPathError("attack paths are simple: states must be distinct")

    def steps(self) -> Iterator[tuple[str, str, str]]:
        for k, u in enumerate(self.vulns):
            yield self.states[k], self.states[k + 1], u


def _escape(part: str) -> str:
    if "\\" in part or "|" in part:
        return part.replace("\\", "\\\\").replace("|", "\\|")
    return part


def path_signature(path: AttackPath) -> str:
    """Canonical dedup key: states and vulnerabilities interleaved with '|'."""
    parts: list[str] = [_escape(path.states[0])]
    for k, u in enumerate(path.vulns):
        parts.append(_escape(u))
        parts.append(_escape(path.states[k + 1]))
    return "|".join(parts)


class PartialAttackGraph:
    """The deduplicated set of attack paths sampled so far.

    Mutated only by a single generation loop; node/edge unions are kept
    incrementally so snapshots are cheap.
    """

    def __init__(self, graph: AttackGraph):
        self.graph = graph
        self.iteration = 0
        self._paths: dict[str, AttackPath] = {}
        self._nodes: set[str] = set()
        self._edges: set[tuple[str, str, str]] = set()

    def __len__(self) -> int:
        return len(self._paths)

    def __contains__(self, signature: str) -> bool:
        return signature in self._paths

    @property
    def paths(self) -> tuple[AttackPath, ...]:
        return tuple(self._paths.values())

    @property
    def signatures(self) -> frozenset[str]:
        return frozenset(self._paths)

    @property
    def nodes(self) -> frozenset[str]:
        return frozenset(self._nodes)

    @property
    def edges(self) -> frozenset[tuple[str, str, str]]:
        return frozenset(self._edges)

    def add(self, path: AttackPath) -> bool:
        """Insert `path` after validating it against the attack graph.

        Returns True when the path was new. Raises InvalidPathError naming
        the offending step when an edge is not in the graph.
        """
        for k, (a, b, u) in enumerate(path.steps()):
            if (a, b, u) not in self.graph.edges:
                raise InvalidPathError(
                    f"step {k}: edge ({a!r} -> {b!r} via {u!r}) is not in the attack graph"
                )
        return self._add_trusted(path_signature(path), path)

    def _add_trusted(self, signature: str, path: AttackPath) -> bool:
        if signature in self._paths:
            return False
        self._paths[signature] = path
        self._nodes.update(path.states)
        self._edges.update(path.steps())
        return True


def add_path(pag: PartialAttackGraph, path: AttackPath) -> tuple[PartialAttackGraph, bool]:
    """Functional wrapper over PartialAttackGraph.add."""
    was_new = pag.add(path)
    return pag, was_new
