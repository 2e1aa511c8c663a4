"""Progressive attack-path generation by batched random-walk sampling.

Each iteration runs a batch of walks over the reachability structure,
labels steps with vulnerabilities, deduplicates the resulting attack paths
into the partial attack graph, and updates the cumulative likelihood/impact
distributions plus their per-iteration stability.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .cvss import serialize_vector
from .kernels import _walk_py
from .model import (
    AttackGraph,
    AttackPath,
    PartialAttackGraph,
    ReachabilityGraph,
    VulnerabilityInventory,
    build_attack_graph,
    path_signature,
)
from .risk import AggregationStrategy, PathFeatures, VulnFeatures, combine_features, vuln_features
from .stats import DEFAULT_PHASE_WINDOW, Ecdf, ks_distance, phase_from_series

TRACKED_FEATURES = ("likelihood", "impact")


class WalkRng:
    """Standalone splitmix64 stream with the draw helpers the kernels use."""

    def __init__(self, seed: int):
        self.state = seed & kernels.MASK64

    def next_u64(self) -> int:
        self.state, z = _walk_py.rng_next(self.state)
        return z

    def next_double(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53

    def next_below(self, k: int) -> int:
        return self.next_u64() % k


@dataclass
class WalkParams:
    """Random-walk sampling parameters for one generation run."""

    stop_probability: float = 0.15
    batch_size: int = 100
    max_length: int | None = None
    entry_nodes: tuple[str, ...] | None = None  # None: every host is an entry
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.stop_probability < 1.0):
            raise ValueError("stop_probability must be in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.entry_nodes is not None and len(self.entry_nodes) == 0:
            raise ValueError("entry_nodes must be non-empty when given")


class IndexedAttackGraph:
    """Array form of a network + inventory for the walk kernels.

    Hosts are indexed by sorted id; the vulnerability table groups rows by
    host (vptr slices it), sorted by vulnerability id and deduplicated.
    """

    def __init__(self, net: ReachabilityGraph, inv: VulnerabilityInventory):
        inv.validate_against(net)
        self.net = net
        self.inv = inv
        self.host_ids: tuple[str, ...] = tuple(sorted(net.nodes))
        self.host_index = {h: i for i, h in enumerate(self.host_ids)}
        n = len(self.host_ids)

        indptr = np.zeros(n + 1, dtype=np.int32)
        succ: list[int] = []
        for i, h in enumerate(self.host_ids):
            targets = sorted(self.host_index[b] for b in net.successors.get(h, ()))
            succ.extend(targets)
            indptr[i + 1] = len(succ)
        self.indptr = indptr
        self.succ = np.asarray(succ, dtype=np.int32)

        vptr = np.zeros(n + 1, dtype=np.int32)
        vuln_ids: list[str] = []
        features: list[VulnFeatures] = []
        cvss_texts: list[str] = []
        for i, h in enumerate(self.host_ids):
            seen: set[str] = set()
            for v in sorted(inv.by_host.get(h, ()), key=lambda v: v.id):
                if v.id in seen:
                    continue
                seen.add(v.id)
                vuln_ids.append(v.id)
                features.append(vuln_features(v.cvss))
                cvss_texts.append(serialize_vector(v.cvss))
            vptr[i + 1] = len(vuln_ids)
        self.vptr = vptr
        self.vuln_ids: tuple[str, ...] = tuple(vuln_ids)
        self.vuln_cvss: tuple[str, ...] = tuple(cvss_texts)
        self.features: tuple[VulnFeatures, ...] = tuple(features)
        self.likelihood_v = np.asarray([f.likelihood_v for f in features], dtype=np.float64)
        self.impact_v = np.asarray([f.impact_v for f in features], dtype=np.float64)
        self.vectors = np.asarray([f.vector() for f in features], dtype=np.float64).reshape(
            len(features), -1
        )

        self._row_lookup: dict[tuple[int, str], int] = {}
        for h in range(n):
            for r in range(int(vptr[h]), int(vptr[h + 1])):
                self._row_lookup[(h, self.vuln_ids[r])] = r

    @property
    def n_hosts(self) -> int:
        return len(self.host_ids)

    @property
    def n_vulns(self) -> int:
        return len(self.vuln_ids)

    def rows_for_path(self, path: AttackPath) -> tuple[int, ...]:
        """Vulnerability-table rows labeling each step of `path`."""
        rows = []
        for k, vuln_id in enumerate(path.vulns):
            host_idx = self.host_index[path.states[k + 1]]
            row = self._row_lookup.get((host_idx, vuln_id))
            if row is None:
                raise KeyError(
                    f"vulnerability {vuln_id!r} not in inventory of {path.states[k + 1]!r}"
                )
            rows.append(row)
        return tuple(rows)

    def node_indices(self, path: AttackPath) -> tuple[int, ...]:
        return tuple(self.host_index[s] for s in path.states)

    def attack_graph(self) -> AttackGraph:
        return build_attack_graph(self.net, self.inv)

    def entry_indices(self, entry_nodes: Sequence[str] | None) -> np.ndarray:
        if entry_nodes is None:
            return np.arange(self.n_hosts, dtype=np.int32)
        missing = [e for e in entry_nodes if e not in self.host_index]
        if missing:
            raise ValueError(f"entry nodes not in the network: {missing}")
        return np.asarray(sorted(self.host_index[e] for e in set(entry_nodes)), dtype=np.int32)

    def path_from_rows(self, node_idx: Sequence[int], rows: Sequence[int]) -> AttackPath:
        return AttackPath(
            states=tuple(self.host_ids[j] for j in node_idx),
            vulns=tuple(self.vuln_ids[r] for r in rows),
        )

    def features_for_rows(self, rows: Sequence[int], strat: AggregationStrategy) -> PathFeatures:
        likelihoods = [self.likelihood_v[r] for r in rows]
        impacts = [self.impact_v[r] for r in rows]
        return combine_features(likelihoods, impacts, strat)


@dataclass(frozen=True)
class EdgeFilter:
    """Admissibility mask over vulnerability-table rows, with exploration escape."""

    match: np.ndarray  # uint8 per vulnerability row
    epsilon_explore: float = 0.1


@dataclass(frozen=True)
class PathRecord:
    path: AttackPath
    features: PathFeatures
    signature: str
    rows: tuple[int, ...]


@dataclass(frozen=True)
class IterationReport:
    iteration: int
    new_paths: int
    total_paths: int
    stability: dict[str, float] | None
    phase: str
    new_records: tuple[PathRecord, ...] = ()

    def to_record(self) -> dict:
        return {
            "iter": self.iteration,
            "new_paths": self.new_paths,
            "total_paths": self.total_paths,
            "stability": self.stability,
            "phase": self.phase,
        }


class GenerationState:
    """Mutable state owned by one generation loop."""

    def __init__(
        self,
        ix: IndexedAttackGraph,
        params: WalkParams,
        strat: AggregationStrategy = AggregationStrategy(),
        phase_window: int = DEFAULT_PHASE_WINDOW,
        backend: str | None = None,
    ):
        self.ix = ix
        self.params = params
        self.strat = strat
        self.phase_window = phase_window
        self.kernel = kernels.get_backend(backend) if backend else kernels
        self.pag = PartialAttackGraph(ix.attack_graph())
        self.iteration = 0
        self.rng_state = params.seed & kernels.MASK64
        self.edge_filter: EdgeFilter | None = None
        self.entries = ix.entry_indices(params.entry_nodes)
        self.feature_values: dict[str, list[float]] = {f: [] for f in TRACKED_FEATURES}
        self._seen: set[tuple[tuple[int, ...], tuple[int, ...]]] = set()
        self._prev: dict[str, np.ndarray] | None = None
        self.stability_series: dict[str, list[float]] = {f: [] for f in TRACKED_FEATURES}
        self.min_stability_series: list[float] = []
        self.records: list[PathRecord] = []

    def ecdf(self, feature: str) -> Ecdf:
        return Ecdf(self.feature_values[feature])

    def current_phase(self) -> str:
        return phase_from_series(self.min_stability_series, self.phase_window)


def iterate(state: GenerationState, params: WalkParams | None = None) -> IterationReport:
    """Run one batch of walk attempts and update distributions and stability."""
    p = params or state.params
    ix = state.ix
    max_len = p.max_length if p.max_length is not None else ix.n_hosts
    filt = state.edge_filter
    match = filt.match if filt is not None else None
    eps = filt.epsilon_explore if filt is not None else 0.0

    nodes, vulns, noff, voff, state.rng_state = state.kernel.walk_batch(
        state.ix.indptr,
        state.ix.succ,
        state.ix.vptr,
        match,
        state.entries,
        p.stop_probability,
        eps,
        max_len,
        p.batch_size,
        state.rng_state,
    )

    new_records: list[PathRecord] = []
    for i in range(len(noff) - 1):
        seq = tuple(int(x) for x in nodes[noff[i]:noff[i + 1]])
        rows = tuple(int(x) for x in vulns[voff[i]:voff[i + 1]])
        key = (seq, rows)
        if key in state._seen:
            continue
        state._seen.add(key)
        path = ix.path_from_rows(seq, rows)
        record = PathRecord(
            path=path,
            features=ix.features_for_rows(rows, state.strat),
            signature=path_signature(path),
            rows=rows,
        )
        state.pag._add_trusted(record.signature, path)
        state.records.append(record)
        state.feature_values["likelihood"].append(record.features.likelihood)
        state.feature_values["impact"].append(record.features.impact)
        new_records.append(record)

    state.iteration += 1
    state.pag.iteration = state.iteration

    curr = {f: np.sort(np.asarray(state.feature_values[f], dtype=np.float64))
            for f in TRACKED_FEATURES}
    stability_now: dict[str, float] | None = None
    if state._prev is not None:
        stability_now = {}
        for f in TRACKED_FEATURES:
            prev_arr, curr_arr = state._prev[f], curr[f]
            if prev_arr.size == 0 and curr_arr.size == 0:
                value = 1.0  # nothing sampled yet on either side
            elif prev_arr.size == 0 or curr_arr.size == 0:
                value = 0.0  # mass appeared from nothing: maximally unstable
            else:
                value = 1.0 - ks_distance(Ecdf.from_sorted(prev_arr), Ecdf.from_sorted(curr_arr))
            stability_now[f] = value
            state.stability_series[f].append(value)
        state.min_stability_series.append(min(stability_now.values()))
    state._prev = curr

    return IterationReport(
        iteration=state.iteration,
        new_paths=len(new_records),
        total_paths=len(state.pag),
        stability=stability_now,
        phase=state.current_phase(),
        new_records=tuple(new_records),
    )


def phase(state: GenerationState, window: int = DEFAULT_PHASE_WINDOW) -> str:
    """Phase of the run from the smoothed cross-feature stability minimum."""
    return phase_from_series(state.min_stability_series, window)


def sample_walk(
    graph: ReachabilityGraph,
    params: WalkParams,
    edge_filter: Callable[[str, str], bool] | None = None,
    rng: WalkRng | None = None,
) -> list[str]:
    """Sample one simple walk over the reachability graph.

    The start node is uniform over the entry nodes; each step is uniform over
    the unvisited successors passing `edge_filter`; the walk ends at a dead
    end, at max_length, or on a stop event (probability stop_probability per
    step once at least one step was taken).
    """
    rng = rng or WalkRng(params.seed)
    entries = sorted(params.entry_nodes) if params.entry_nodes is not None else sorted(graph.nodes)
    max_len = params.max_length if params.max_length is not None else len(graph.nodes)
    max_len = min(max_len, len(graph.nodes))

    walk = [entries[rng.next_below(len(entries))]]
    visited = {walk[0]}
    while len(walk) < max_len:
        if len(walk) >= 2 and rng.next_double() < params.stop_probability:
            break
        cur = walk[-1]
        cands = [
            s
            for s in graph.successors.get(cur, ())
            if s not in visited and (edge_filter is None or edge_filter(cur, s))
        ]
        if not cands:
            break
        nxt = cands[rng.next_below(len(cands))]
        walk.append(nxt)
        visited.add(nxt)
    return walk


def construct_path(walk: Sequence[str], ag: AttackGraph, rng: WalkRng) -> AttackPath | None:
    """Label a walk with one uniformly chosen vulnerability per step.

    A consecutive pair with no multi-edge truncates the walk at the last
    valid step; fewer than two remaining nodes means no path.
    """
    if len(walk) < 2:
        return None
    states: list[str] = [walk[0]]
    vulns: list[str] = []
    for a, b in zip(walk, walk[1:]):
        labels = ag.multi_edges.get((a, b), ())
        if not labels:
            break
        vulns.append(labels[rng.next_below(len(labels))])
        states.append(b)
    if len(states) < 2:
        return None
    return AttackPath(states=tuple(states), vulns=tuple(vulns))
