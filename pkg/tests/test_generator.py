"""Walk sampling, path construction, iteration reports, kernel parity."""

import itertools

import numpy as np
import pytest

from agx import kernels
from agx.cvss import parse_vector
from agx.generator import (
    EdgeFilter,
    GenerationState,
    IndexedAttackGraph,
    WalkParams,
    WalkRng,
    construct_path,
    iterate,
    phase,
    sample_walk,
)
from agx.model import (
    AttackPath,
    ReachabilityGraph,
    Vulnerability,
    VulnerabilityInventory,
    build_attack_graph,
    path_signature,
)

RCE = parse_vector("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H")
LEAK = parse_vector("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:L/I:N/A:N")


def make_net(edges, nodes=None):
    nodes = nodes or {n for e in edges for n in e}
    return ReachabilityGraph.of(nodes, edges)


def make_inv(spec):
    by_host = {}
    for host, vids in spec.items():
        by_host[host] = [Vulnerability(id=v, cvss=RCE, host=host) for v in vids]
    return VulnerabilityInventory(by_host)


def brute_force_paths(net, inv, entries=None):
    """Oracle: DFS over simple sequences crossed with per-step vuln choices."""
    ag = build_attack_graph(net, inv)
    found = set()
    entries = sorted(entries or net.nodes)

    def extend(seq, vulns):
        if len(seq) >= 2:
            found.add(path_signature(AttackPath(tuple(seq), tuple(vulns))))
        for nxt in net.successors.get(seq[-1], ()):
            if nxt in seq:
                continue
            for u in ag.multi_edges.get((seq[-1], nxt), ()):
                extend(seq + [nxt], vulns + [u])

    for entry in entries:
        extend([entry], [])
    return found


class TestSampleWalk:
    def test_unique_continuation_chain(self):
        net = make_net([("A", "B"), ("B", "C")])
        walk = sample_walk(net, WalkParams(stop_probability=0.0, seed=7, entry_nodes=("A",)))
        assert walk == ["A", "B", "C"]

    def test_isolated_entry(self):
        net = make_net([("B", "C")], nodes={"A", "B", "C"})
        walk = sample_walk(net, WalkParams(stop_probability=0.0, seed=1, entry_nodes=("A",)))
        assert walk == ["A"]

    def test_no_repeated_nodes(self):
        net = make_net([("A", "B"), ("B", "A"), ("B", "C"), ("C", "A")])
        for seed in range(50):
            walk = sample_walk(net, WalkParams(stop_probability=0.2, seed=seed))
            assert len(set(walk)) == len(walk)

    def test_first_step_uniform(self):
        net = make_net([("A", "B"), ("A", "C")])
        rng = WalkRng(42)
        params = WalkParams(stop_probability=0.0, entry_nodes=("A",))
        hits = 0
        n = 10_000
        for _ in range(n):
            walk = sample_walk(net, params, rng=rng)
            if walk[1] == "B":
                hits += 1
        assert abs(hits / n - 0.5) < 0.02

    def test_edge_filter_restricts_steps(self):
        net = make_net([("A", "B"), ("A", "C")])
        walk = sample_walk(
            net,
            WalkParams(stop_probability=0.0, seed=3, entry_nodes=("A",)),
            edge_filter=lambda a, b: b != "B",
        )
        assert walk == ["A", "C"]

    def test_stop_event_keeps_minimum_two_nodes(self):
        net = make_net([("A", "B"), ("B", "C"), ("C", "D")])
        lengths = set()
        rng = WalkRng(5)
        for _ in range(500):
            walk = sample_walk(net, WalkParams(stop_probability=0.9, entry_nodes=("A",)), rng=rng)
            lengths.add(len(walk))
        assert 2 in lengths  # stop can fire only after the first step
        assert min(lengths) >= 2


class TestConstructPath:
    def setup_method(self):
        self.net = make_net([("A", "B")])
        self.inv = make_inv({"B": ["u1", "u2"]})
        self.ag = build_attack_graph(self.net, self.inv)

    def test_single_edge_deterministic(self):
        inv = make_inv({"B": ["u1"]})
        ag = build_attack_graph(self.net, inv)
        p = construct_path(["A", "B"], ag, WalkRng(0))
        assert p == AttackPath(states=("A", "B"), vulns=("u1",))

    def test_multi_edge_uniform(self):
        rng = WalkRng(9)
        n = 10_000
        hits = sum(
            1 for _ in range(n) if construct_path(["A", "B"], self.ag, rng).vulns[0] == "u1"
        )
        assert abs(hits / n - 0.5) < 0.02

    def test_short_walk_gives_none(self):
        assert construct_path(["A"], self.ag, WalkRng(0)) is None

    def test_truncates_at_missing_multi_edge(self):
        net = make_net([("A", "B"), ("B", "C")])
        inv = make_inv({"B": ["u1"], "C": []})
        ag = build_attack_graph(net, inv)
        p = construct_path(["A", "B", "C"], ag, WalkRng(0))
        assert p == AttackPath(states=("A", "B"), vulns=("u1",))

    def test_truncation_to_single_node_gives_none(self):
        net = make_net([("A", "B")])
        inv = make_inv({"B": []})
        ag = build_attack_graph(net, inv)
        assert construct_path(["A", "B"], ag, WalkRng(0)) is None


class TestIterate:
    def setup_method(self):
        self.net = make_net([("A", "B")])
        self.inv = make_inv({"B": ["u1"]})
        self.ix = IndexedAttackGraph(self.net, self.inv)

    def test_first_iteration_has_no_stability(self):
        state = GenerationState(self.ix, WalkParams(seed=1, batch_size=10))
        report = iterate(state)
        assert report.stability is None
        assert report.total_paths == 1  # only one path exists

    def test_saturated_graph_stability_one(self):
        state = GenerationState(self.ix, WalkParams(seed=1, batch_size=10))
        iterate(state)
        report = iterate(state)  # no new paths possible
        assert report.new_paths == 0
        assert report.stability == {"likelihood": 1.0, "impact": 1.0}

    def test_determinism_identical_seeds(self):
        def run():
            net = make_net([("A", "B"), ("B", "C"), ("A", "C"), ("C", "D")])
            inv = make_inv({"B": ["u1", "u2"], "C": ["u3"], "D": ["u4", "u5"]})
            state = GenerationState(IndexedAttackGraph(net, inv), WalkParams(seed=42, batch_size=20))
            sigs = []
            for _ in range(10):
                report = iterate(state)
                sigs.append(tuple(r.signature for r in report.new_records))
            return sigs

        assert run() == run()

    def test_phase_reads_stability_series(self):
        state = GenerationState(self.ix, WalkParams(seed=1, batch_size=10))
        assert phase(state) == "early"
        iterate(state)
        for _ in range(12):
            iterate(state)
        assert phase(state) == "definitive"  # saturated: stability pinned at 1.0


class TestSamplerCompleteness:
    @pytest.mark.parametrize("seed", [0, 1])
    def test_reaches_every_simple_path(self, seed):
        net = make_net([("A", "B"), ("B", "C"), ("A", "C"), ("C", "A"), ("B", "A")])
        inv = make_inv({"A": ["a1"], "B": ["b1", "b2"], "C": ["c1"]})
        expected = brute_force_paths(net, inv)
        state = GenerationState(IndexedAttackGraph(net, inv), WalkParams(seed=seed, batch_size=50))
        for _ in range(400):
            iterate(state)
            if state.pag.signatures == expected:
                break
        assert state.pag.signatures == expected

    def test_ks_to_truth_zero_at_completion(self):
        from agx.stats import Ecdf, ks_distance
        from agx.risk import AggregationStrategy, path_features

        net = make_net([("A", "B"), ("B", "C")])
        inv = make_inv({"B": ["b1", "b2"], "C": ["c1"]})
        expected = brute_force_paths(net, inv)
        state = GenerationState(IndexedAttackGraph(net, inv), WalkParams(seed=3, batch_size=50))
        for _ in range(200):
            iterate(state)
            if state.pag.signatures == expected:
                break
        assert state.pag.signatures == expected
        gt_likelihoods = []
        for p in state.pag.paths:
            gt_likelihoods.append(path_features(p, inv, AggregationStrategy()).likelihood)
        d = ks_distance(Ecdf(state.feature_values["likelihood"]), Ecdf(gt_likelihoods))
        assert d == 0.0


@pytest.mark.skipif(
    kernels.BACKEND != "compiled", reason="compiled kernel unavailable; parity is vacuous"
)
class TestKernelParity:
    def _graph_arrays(self):
        net = make_net([("A", "B"), ("B", "C"), ("A", "C"), ("C", "D"), ("D", "A"), ("B", "D")])
        by_host = {
            "B": [Vulnerability(id="b1", cvss=RCE, host="B"),
                  Vulnerability(id="b2", cvss=LEAK, host="B")],
            "C": [Vulnerability(id="c1", cvss=RCE, host="C")],
            "D": [Vulnerability(id="d1", cvss=LEAK, host="D"),
                  Vulnerability(id="d2", cvss=RCE, host="D")],
        }
        ix = IndexedAttackGraph(net, VulnerabilityInventory(by_host))
        return ix

    @pytest.mark.parametrize("steered", [False, True])
    @pytest.mark.parametrize("seed", [0, 7, 12345])
    def test_backends_bit_identical(self, steered, seed):
        ix = self._graph_arrays()
        match = None
        if steered:
            match = np.zeros(ix.n_vulns, dtype=np.uint8)
            match[::2] = 1
        entries = ix.entry_indices(None)
        args = (ix.indptr, ix.succ, ix.vptr, match, entries, 0.15, 0.1, ix.n_hosts, 200, seed)
        py = kernels.get_backend("python").walk_batch(*args)
        cc = kernels.get_backend("compiled").walk_batch(*args)
        assert list(map(int, py[0])) == list(map(int, cc[0]))  # nodes
        assert list(map(int, py[1])) == list(map(int, cc[1]))  # vulns
        assert list(map(int, py[2])) == list(map(int, cc[2]))  # node offsets
        assert list(map(int, py[3])) == list(map(int, cc[3]))  # vuln offsets
        assert int(py[4]) == int(cc[4])  # final rng state

    def test_max_len_clamp_parity(self):
        ix = self._graph_arrays()
        entries = ix.entry_indices(None)
        args = (ix.indptr, ix.succ, ix.vptr, None, entries, 0.0, 0.0, 99, 50, 3)
        py = kernels.get_backend("python").walk_batch(*args)
        cc = kernels.get_backend("compiled").walk_batch(*args)
        assert list(map(int, py[0])) == list(map(int, cc[0]))
        assert int(py[4]) == int(cc[4])


class TestEdgeFilterSemantics:
    def _state(self, match, eps=0.0):
        net = make_net([("A", "B"), ("A", "C")])
        by_host = {
            "B": [Vulnerability(id="match", cvss=RCE, host="B")],
            "C": [Vulnerability(id="other", cvss=LEAK, host="C")],
        }
        ix = IndexedAttackGraph(net, VulnerabilityInventory(by_host))
        state = GenerationState(ix, WalkParams(seed=11, batch_size=300, entry_nodes=("A",)))
        mask = np.zeros(ix.n_vulns, dtype=np.uint8)
        for i, vid in enumerate(ix.vuln_ids):
            if vid in match:
                mask[i] = 1
        state.edge_filter = EdgeFilter(match=mask, epsilon_explore=eps)
        return state

    def test_filter_restricts_sampling(self):
        state = self._state(match={"match"}, eps=0.0)
        report = iterate(state)
        assert report.total_paths == 1
        assert state.pag.paths[0].vulns == ("match",)

    def test_exploration_escapes_filter(self):
        state = self._state(match={"match"}, eps=0.3)
        for _ in range(5):
            iterate(state)
        vuln_sets = {p.vulns[0] for p in state.pag.paths}
        assert vuln_sets == {"match", "other"}

    def test_zero_match_falls_back_to_everything(self):
        state = self._state(match=set(), eps=0.0)
        for _ in range(5):
            iterate(state)
        assert {p.vulns[0] for p in state.pag.paths} == {"match", "other"}
