"""Topology generation, vulnerability assignment, and file ingestion."""

import json

import numpy as np
import pytest

from agx.cvss import serialize_vector
from agx.scenario import (
    DistributionSpec,
    PoolSizingError,
    ScenarioSpec,
    SchemaError,
    TopologySpec,
    assign_vulnerabilities,
    default_pool,
    generate_scenario,
    generate_topology,
    inventory_from_dict,
    inventory_to_dict,
    load_inventory,
    load_network,
    network_from_dict,
    network_to_dict,
    save_inventory,
    save_network,
)


def spec(**kwargs):
    defaults = dict(hosts=4, seed=0)
    defaults.update(kwargs)
    return ScenarioSpec(**defaults)


class TestTopology:
    def test_mesh_edge_count(self):
        net = generate_topology(spec(hosts=4, topology=TopologySpec(kind="mesh")))
        assert len(net.edges) == 12  # n(n-1)

    def test_random_p1_is_mesh(self):
        dense = generate_topology(spec(hosts=4, topology=TopologySpec(kind="random", p=1.0)))
        mesh = generate_topology(spec(hosts=4, topology=TopologySpec(kind="mesh")))
        assert dense.edges == mesh.edges

    def test_random_p0_is_empty(self):
        net = generate_topology(spec(hosts=4, topology=TopologySpec(kind="random", p=0.0)))
        assert len(net.edges) == 0

    def test_power_law_m1_attachment_count(self):
        net = generate_topology(spec(hosts=10, topology=TopologySpec(kind="power_law", m=1)))
        assert len(net.edges) == 18  # 9 attachments, bidirectional

    def test_power_law_m2_attachment_count(self):
        net = generate_topology(spec(hosts=10, topology=TopologySpec(kind="power_law", m=2)))
        assert len(net.edges) == 2 * (1 + 2 * 8)  # first node gets 1 link, the rest 2

    def test_seeded_determinism(self):
        a = generate_topology(spec(hosts=8, topology=TopologySpec(kind="random", p=0.4), seed=5))
        b = generate_topology(spec(hosts=8, topology=TopologySpec(kind="random", p=0.4), seed=5))
        assert a.edges == b.edges

    def test_seed_changes_graph(self):
        a = generate_topology(spec(hosts=8, topology=TopologySpec(kind="random", p=0.4), seed=5))
        b = generate_topology(spec(hosts=8, topology=TopologySpec(kind="random", p=0.4), seed=6))
        assert a.edges != b.edges


class TestDistributions:
    def test_poisson_mean(self):
        rng = np.random.default_rng(1)
        counts = DistributionSpec(kind="poisson").draw_counts(rng, 1000, 5)
        assert abs(counts.mean() - 5) < 0.25

    def test_binomial_mean(self):
        rng = np.random.default_rng(2)
        counts = DistributionSpec(kind="binomial").draw_counts(rng, 1000, 4)
        assert abs(counts.mean() - 4) < 0.3

    def test_uniform_bounds(self):
        rng = np.random.default_rng(3)
        counts = DistributionSpec(kind="uniform").draw_counts(rng, 1000, 3)
        assert counts.min() >= 1 and counts.max() <= 5
        assert abs(counts.mean() - 3) < 0.25

    def test_pareto_mean_scaled(self):
        rng = np.random.default_rng(4)
        counts = DistributionSpec(kind="pareto", params={"alpha": 3.0}).draw_counts(rng, 4000, 6)
        assert abs(counts.mean() - 6) < 0.8

    def test_counts_never_negative(self):
        rng = np.random.default_rng(5)
        for kind in ("uniform", "poisson", "binomial", "pareto"):
            counts = DistributionSpec(kind=kind).draw_counts(rng, 200, 1)
            assert counts.min() >= 0


class TestHeterogeneity:
    def test_zero_all_hosts_identical(self):
        s = spec(hosts=3, vulns_per_host=2,
                 distribution=DistributionSpec("uniform", {"low": 2, "high": 2}),
                 heterogeneity=0)
        inv = assign_vulnerabilities(s)
        sets = [frozenset(v.id for v in vulns) for vulns in inv.by_host.values()]
        assert len(set(sets)) == 1
        assert len(sets[0]) == 2

    def test_hundred_pairwise_disjoint(self):
        s = spec(hosts=3, vulns_per_host=2,
                 distribution=DistributionSpec("uniform", {"low": 2, "high": 2}),
                 heterogeneity=100)
        inv = assign_vulnerabilities(s)
        sets = [set(v.id for v in vulns) for vulns in inv.by_host.values()]
        assert sum(len(s_) for s_ in sets) == 6
        assert len(set().union(*sets)) == 6

    def test_distinct_templates_monotone_in_heterogeneity(self):
        for seed in range(5):
            distinct = []
            for h in (0, 25, 50, 75, 100):
                s = spec(hosts=4, vulns_per_host=3, heterogeneity=h, seed=seed)
                inv = assign_vulnerabilities(s)
                distinct.append(len({v.id for v in inv.all_vulns()}))
            assert distinct == sorted(distinct)

    def test_pool_exhaustion(self):
        s = spec(hosts=10, vulns_per_host=10,
                 distribution=DistributionSpec("uniform", {"low": 10, "high": 10}),
                 heterogeneity=100)
        with pytest.raises(PoolSizingError):
            assign_vulnerabilities(s)

    def test_host_field_consistent(self):
        net, inv = generate_scenario(spec(hosts=5, vulns_per_host=2))
        inv.validate_against(net)


class TestPool:
    def test_all_vectors_parse_and_size(self):
        pool = default_pool()
        assert len(pool) >= 50
        ids = [tid for tid, _ in pool.templates]
        assert len(set(ids)) == len(ids)


class TestFileContracts:
    def test_network_round_trip(self, tmp_path):
        net, inv = generate_scenario(spec(hosts=5, vulns_per_host=2, seed=9))
        save_network(net, tmp_path / "net.json")
        save_inventory(inv, tmp_path / "inv.json")
        net2 = load_network(tmp_path / "net.json")
        inv2 = load_inventory(tmp_path / "inv.json", net2)
        assert net2.nodes == net.nodes and net2.edges == net.edges
        assert inventory_to_dict(inv2) == inventory_to_dict(inv)

    def test_byte_identical_generation(self, tmp_path):
        for name in ("a", "b"):
            net, inv = generate_scenario(spec(hosts=6, vulns_per_host=2, seed=42))
            save_network(net, tmp_path / f"net_{name}.json")
            save_inventory(inv, tmp_path / f"inv_{name}.json")
        assert (tmp_path / "net_a.json").read_bytes() == (tmp_path / "net_b.json").read_bytes()
        assert (tmp_path / "inv_a.json").read_bytes() == (tmp_path / "inv_b.json").read_bytes()

    def test_well_formed_two_host_file(self):
        net = network_from_dict({"hosts": [{"id": "h1"}, {"id": "h2"}], "edges": [["h1", "h2"]]})
        assert len(net.nodes) == 2

    def test_unknown_edge_host_pointer(self):
        with pytest.raises(SchemaError) as err:
            network_from_dict(
                {"hosts": [{"id": "h1"}], "edges": [["h1", "h9"]]}
            )
        assert err.value.pointer == "/edges/0/1"

    def test_inventory_vector_delegates_to_cvss(self):
        net = network_from_dict({"hosts": [{"id": "h1"}], "edges": []})
        inv = inventory_from_dict(
            {"h1": [{"id": "CVE-X", "cvss": "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H"}]},
            net,
        )
        assert serialize_vector(inv.by_host["h1"][0].cvss).startswith("CVSS:3.1/AV:N")

    def test_inventory_bad_vector_pointer(self):
        with pytest.raises(SchemaError) as err:
            inventory_from_dict({"h1": [{"id": "CVE-X", "cvss": "CVSS:3.0/nope"}]})
        assert err.value.pointer == "/h1/0/cvss"

    def test_inventory_unknown_host(self):
        net = network_from_dict({"hosts": [{"id": "h1"}], "edges": []})
        with pytest.raises(SchemaError) as err:
            inventory_from_dict({"h9": []}, net)
        assert err.value.pointer == "/h9"

    def test_duplicate_host_ids_rejected(self):
        with pytest.raises(SchemaError, match="duplicate"):
            network_from_dict({"hosts": [{"id": "h1"}, {"id": "h1"}], "edges": []})

    def test_self_loop_rejected(self):
        with pytest.raises(SchemaError) as err:
            network_from_dict({"hosts": [{"id": "h1"}], "edges": [["h1", "h1"]]})
        assert err.value.pointer == "/edges/0"
