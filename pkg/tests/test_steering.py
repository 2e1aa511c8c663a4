"""Labeling, training-set construction, filters, breakdown, retraining."""

import numpy as np
import pytest

from agx.cvss import parse_vector
from agx.dtree import Condition, Hyperparams, SteeringRules
from agx.engine import Engine
from agx.generator import IndexedAttackGraph, WalkParams
from agx.model import AttackPath, ReachabilityGraph, Vulnerability, VulnerabilityInventory
from agx.query import evaluate, parse_query
from agx.risk import AggregationStrategy, FEATURE_NAMES, vuln_features
from agx.steering import (
    LabeledPath,
    SteeringParams,
    SteeringState,
    build_training_set,
    detect_breakdown,
    label_paths,
    make_edge_filter,
    recall,
)

RCE = parse_vector("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H")       # high impact
LPE = parse_vector("CVSS:3.1/AV:L/AC:L/PR:L/UI:N/S:U/C:H/I:H/A:H")       # low likelihood
LEAK = parse_vector("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:L/I:N/A:N")      # low impact

ANALYST_QUERY = parse_query("impact >= 0.9 AND likelihood < 0.5")


def diamond_scenario():
    net = ReachabilityGraph.of(
        ["A", "B", "C", "D"],
        [("A", "B"), ("A", "C"), ("B", "D"), ("C", "D"), ("D", "A"), ("C", "B")],
    )
    inv = VulnerabilityInventory(
        {
            "A": [Vulnerability("rce-a", RCE, "A")],
            "B": [Vulnerability("lpe-b", LPE, "B"), Vulnerability("leak-b", LEAK, "B")],
            "C": [Vulnerability("leak-c", LEAK, "C")],
            "D": [Vulnerability("rce-d", RCE, "D"), Vulnerability("lpe-d", LPE, "D")],
        }
    )
    return net, inv


class TestLabelPaths:
    def setup_method(self):
        self.net, self.inv = diamond_scenario()

    def test_relevant_label(self):
        path = AttackPath(states=("A", "B"), vulns=("lpe-b",))  # impact .9148, lik .47
        labeled = label_paths([path], ANALYST_QUERY, self.inv)
        assert labeled[0].relevant

    def test_not_relevant_label(self):
        path = AttackPath(states=("A", "B"), vulns=("leak-b",))
        labeled = label_paths([path], ANALYST_QUERY, self.inv)
        assert not labeled[0].relevant

    def test_empty_input(self):
        assert label_paths([], ANALYST_QUERY, self.inv) == []

    def test_relevance_matches_evaluate(self):
        paths = [
            AttackPath(states=("A", "B", "D"), vulns=("lpe-b", "rce-d")),
            AttackPath(states=("A", "C", "D"), vulns=("leak-c", "rce-d")),
        ]
        for lp in label_paths(paths, ANALYST_QUERY, self.inv):
            assert lp.relevant == evaluate(ANALYST_QUERY, lp.features)


class TestBuildTrainingSet:
    def setup_method(self):
        self.net, self.inv = diamond_scenario()

    def test_one_instance_per_occurrence(self):
        path = AttackPath(states=("A", "B", "D"), vulns=("lpe-b", "rce-d"))
        labeled = label_paths([path], ANALYST_QUERY, self.inv)
        instances = build_training_set(labeled, self.inv)
        assert len(instances) == 2
        assert all(ins.relevant == labeled[0].relevant for ins in instances)

    def test_shared_vuln_contributes_both_labels(self):
        relevant = AttackPath(states=("A", "B", "D"), vulns=("lpe-b", "rce-d"))
        irrelevant = AttackPath(states=("C", "D"), vulns=("rce-d",))
        labeled = label_paths([relevant, irrelevant], ANALYST_QUERY, self.inv)
        assert labeled[0].relevant and not labeled[1].relevant
        instances = build_training_set(labeled, self.inv)
        rce_vector = vuln_features(RCE).vector()
        labels = {ins.relevant for ins in instances if ins.features == rce_vector}
        assert labels == {True, False}

    def test_occurrence_count(self):
        paths = [
            AttackPath(states=("A", "B"), vulns=("lpe-b",)),
            AttackPath(states=("A", "B", "D"), vulns=("leak-b", "rce-d")),
            AttackPath(states=("A", "C", "B", "D"), vulns=("leak-c", "lpe-b", "lpe-d")),
        ]
        labeled = label_paths(paths, ANALYST_QUERY, self.inv)
        assert len(build_training_set(labeled, self.inv)) == 1 + 2 + 3


class TestEdgeFilter:
    def setup_method(self):
        net, inv = diamond_scenario()
        self.ix = IndexedAttackGraph(net, inv)

    def test_true_rules_admit_everything(self):
        filt = make_edge_filter(SteeringRules(always=True), self.ix)
        assert filt.match.sum() == self.ix.n_vulns

    def test_dnf_filters_by_feature(self):
        ac_index = FEATURE_NAMES.index("likelihood_v")
        rules = SteeringRules(conjunctions=((Condition(ac_index, "<=", 0.5),),))
        filt = make_edge_filter(rules, self.ix)
        admitted = {self.ix.vuln_ids[r] for r in range(self.ix.n_vulns) if filt.match[r]}
        assert admitted == {"lpe-b", "lpe-d"}

    def test_empty_dnf_admits_nothing(self):
        filt = make_edge_filter(SteeringRules(), self.ix)
        assert filt.match.sum() == 0


class TestDetectBreakdown:
    def test_sustained_low_precision(self):
        assert detect_breakdown([0.05] * 10, window=10, floor=0.3)

    def test_high_precision(self):
        assert not detect_breakdown([0.8] * 10, window=10, floor=0.3)

    def test_insufficient_window(self):
        assert not detect_breakdown([0.05] * 5, window=10, floor=0.3)

    def test_none_samples_are_skipped(self):
        history = [None, 0.1, None, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, None, 0.1]
        assert detect_breakdown(history, window=10, floor=0.3)


class TestRecall:
    def test_fraction(self):
        gt = {f"p{i}" for i in range(10)}
        assert recall(set(list(gt)[:9]), gt) == pytest.approx(0.9)

    def test_none_found(self):
        assert recall(set(), {"a", "b"}) == 0.0

    def test_vacuous_when_gt_empty(self):
        assert recall(set(), set()) == 1.0


class TestSteeringStateLifecycle:
    def _engine(self, **kwargs):
        net, inv = diamond_scenario()
        hyper = Hyperparams(min_training_size=20, min_class_count=3, min_samples_leaf=1)
        return Engine(
            net,
            inv,
            params=WalkParams(seed=5, batch_size=25),
            hyper=hyper,
            query=ANALYST_QUERY,
            **kwargs,
        )

    def test_activation_when_thresholds_met(self):
        eng = self._engine()
        activated_at = None
        for _ in range(30):
            rep = eng.step()
            if any(ev["event"] == "steering_activated" for ev in rep.events):
                activated_at = rep.record["iter"]
                break
        assert activated_at is not None
        assert eng.steering_active
        assert len(eng.steer.labeled) >= 20

    def test_unsteered_arm_labels_without_training(self):
        eng = self._engine(steering_enabled=False)
        for _ in range(30):
            rep = eng.step()
        assert not eng.steering_active
        assert rep.record["precision"] is None or 0 <= rep.record["precision"] <= 1
        assert len(eng.steer.labeled) == len(eng.records)

    def test_answers_always_satisfy_query(self):
        eng = self._engine()
        for _ in range(40):
            eng.step()
        answers = eng.answer_records()
        assert answers, "expected some relevant paths in this scenario"
        for rec in answers:
            assert evaluate(ANALYST_QUERY, rec.features)

    def test_query_replacement_resets_steering(self):
        eng = self._engine()
        for _ in range(30):
            eng.step()
        assert eng.steering_active
        eng.submit_query("impact < 0.3")
        assert not eng.steering_active
        assert eng.state.edge_filter is None
        assert len(eng.steer.labeled) == len(eng.records)  # relabeled cumulatively

    def test_steered_run_reaches_full_recall_on_small_instance(self):
        from tests.test_generator import brute_force_paths
        from agx.risk import path_features

        net, inv = diamond_scenario()
        all_sigs = brute_force_paths(net, inv)
        relevant = set()
        for sig in all_sigs:
            parts = sig.split("|")
            path = AttackPath(states=tuple(parts[::2]), vulns=tuple(parts[1::2]))
            if evaluate(ANALYST_QUERY, path_features(path, inv)):
                relevant.add(sig)
        assert relevant, "scenario must contain relevant paths"

        eng = self._engine()
        eng.set_ground_truth(frozenset(all_sigs), frozenset(relevant))
        for _ in range(400):
            rep = eng.step()
            if rep.record["recall"] == 1.0:
                break
        assert rep.record["recall"] == 1.0


class TestRetrainConvergence:
    def _bootstrap_state(self):
        state = SteeringState(
            ANALYST_QUERY,
            SteeringParams(window=3, quiet_horizon=5),
            Hyperparams(min_training_size=4, min_class_count=1, min_samples_leaf=1),
        )
        net, inv = diamond_scenario()
        paths = [
            AttackPath(states=("A", "B"), vulns=("lpe-b",)),
            AttackPath(states=("A", "B"), vulns=("leak-b",)),
            AttackPath(states=("A", "C"), vulns=("leak-c",)),
            AttackPath(states=("A", "B", "D"), vulns=("lpe-b", "rce-d")),
        ]
        for i, lp in enumerate(label_paths(paths, ANALYST_QUERY, inv)):
            state.labeled.append(lp)
            if lp.relevant:
                state.relevant_count += 1
                state.last_new_relevant_iter = 1
        return state, inv

    def test_retrain_uses_cumulative_set(self):
        state, inv = self._bootstrap_state()
        state.train(inv)
        assert state.steering_active
        first_rules = state.rules
        outcome = state.retrain(inv, iteration=3)  # quiet horizon not yet met
        assert outcome in ("retrained", "kept") or state.rules == first_rules
        assert not state.converged

    def test_convergence_needs_quiet_horizon_and_stable_rules(self):
        state, inv = self._bootstrap_state()
        state.train(inv)
        outcome = state.retrain(inv, iteration=3)
        assert outcome != "converged"
        outcome = state.retrain(inv, iteration=20)  # 19 quiet iterations > horizon 5
        assert outcome == "converged"
        assert state.converged

    def test_relevant_arrival_blocks_convergence(self):
        state, inv = self._bootstrap_state()
        state.train(inv)
        state.last_new_relevant_iter = 18
        assert state.retrain(inv, iteration=20) != "converged"
