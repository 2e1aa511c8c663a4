"""Query-driven steering: labeling, training data, edge filters, breakdown.

Sampled paths are labeled against the active query; each vulnerability
occurrence on a labeled path becomes one training instance. Rules extracted
from the fitted tree restrict which vulnerability rows the sampler may use,
with a per-step exploration escape and a zero-match fallback so every path
keeps positive sampling probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dtree import (
    Hyperparams,
    NotTrainableError,
    SteeringRules,
    TrainingInstance,
    extract_rules,
    fit,
    matches,
)
from .generator import EdgeFilter, IndexedAttackGraph, PathRecord
from .model import AttackPath, VulnerabilityInventory
from .query import QueryAst, evaluate
from .risk import AggregationStrategy, PathFeatures, path_features, vuln_features


@dataclass(frozen=True)
class LabeledPath:
    path: AttackPath
    features: PathFeatures
    relevant: bool


@dataclass(frozen=True)
class SteeringParams:
    epsilon_explore: float = 0.1
    window: int = 10            # breakdown window W (defined precision samples)
    precision_floor: float = 0.3
    quiet_horizon: int = 20     # iterations without new relevant paths before convergence

    def __post_init__(self):
        if not (0.0 <= self.epsilon_explore <= 1.0):
            raise ValueError("epsilon_explore must be in [0, 1]")
        if self.window < 1 or self.quiet_horizon < 1:
            raise ValueError("window and quiet_horizon must be positive")


@dataclass(frozen=True)
class MetricsSample:
    iteration: int
    new_paths: int
    relevant_new: int
    precision: float | None  # absent when the iteration retrieved nothing new
    recall: float | None = None


def label_paths(
    paths: Sequence[AttackPath],
    query: QueryAst,
    inv: VulnerabilityInventory,
    strat: AggregationStrategy = AggregationStrategy(),
) -> list[LabeledPath]:
    """One LabeledPath per input, relevant iff its features satisfy the query."""
    out = []
    for p in paths:
        feats = path_features(p, inv, strat)
        out.append(LabeledPath(path=p, features=feats, relevant=evaluate(query, feats)))
    return out


def build_training_set(
    labeled: Sequence[LabeledPath], inv: VulnerabilityInventory
) -> list[TrainingInstance]:
    """One instance per vulnerability occurrence, carrying its path's label."""
    instances: list[TrainingInstance] = []
    for lp in labeled:
        for k, vuln_id in enumerate(lp.path.vulns):
            host = lp.path.states[k + 1]
            vuln = inv.get(host, vuln_id)
            if vuln is None:
                raise LookupError(f"vulnerability {vuln_id!r} not in inventory of {host!r}")
            instances.append(
                TrainingInstance(features=vuln_features(vuln.cvss).vector(), relevant=lp.relevant)
            )
    return instances


def make_edge_filter(
    rules: SteeringRules,
    ix: IndexedAttackGraph,
    epsilon_explore: float = 0.1,
) -> EdgeFilter:
    """Admissibility mask over the vulnerability table from the DNF rules."""
    if rules.always:
        mask = np.ones(ix.n_vulns, dtype=np.uint8)
    elif rules.matches_nothing:
        mask = np.zeros(ix.n_vulns, dtype=np.uint8)
    else:
        mask = np.fromiter(
            (1 if matches(rules, ix.vectors[r]) else 0 for r in range(ix.n_vulns)),
            count=ix.n_vulns,
            dtype=np.uint8,
        )
    return EdgeFilter(match=mask, epsilon_explore=epsilon_explore)


def detect_breakdown(
    precision_history: Sequence[float | None],
    window: int = 10,
    floor: float = 0.3,
) -> bool:
    """Mean of the last `window` defined precision samples sits under `floor`.

    `precision_history` must cover only the iterations since steering was
    (re)activated; fewer than `window` defined samples is never a breakdown.
    """
    defined = [p for p in precision_history if p is not None]
    if len(defined) < window:
        return False
    tail = defined[-window:]
    return sum(tail) / window < floor


def recall(found: set[str], gt_relevant: set[str]) -> float:
    """Fraction of ground-truth relevant paths found; vacuously 1 when none exist."""
    if not gt_relevant:
        return 1.0
    return len(found & gt_relevant) / len(gt_relevant)


class SteeringState:
    """Per-query steering bookkeeping owned by the generation loop."""

    def __init__(
        self,
        query: QueryAst,
        params: SteeringParams = SteeringParams(),
        hyper: Hyperparams = Hyperparams(),
    ):
        self.query = query
        self.params = params
        self.hyper = hyper
        self.labeled: list[LabeledPath] = []
        self.relevant_count = 0
        self.rules: SteeringRules | None = None
        self.tree = None  # last fitted tree, kept for diagnostics
        self.steering_active = False
        self.converged = False
        self.precision_history: list[tuple[int, float | None]] = []
        self.precision_since_train: list[float | None] = []
        self.iters_since_train = 0
        self.last_new_relevant_iter: int | None = None

    def bootstrap_record(self, record: PathRecord, iteration: int) -> None:
        """Label one pre-existing path when a query replaces another mid-run."""
        is_rel = evaluate(self.query, record.features)
        self.labeled.append(
            LabeledPath(path=record.path, features=record.features, relevant=is_rel)
        )
        if is_rel:
            self.relevant_count += 1
            self.last_new_relevant_iter = iteration

    def observe(self, iteration: int, new_records: Sequence[PathRecord]) -> MetricsSample:
        """Label this iteration's new unique paths and record its precision."""
        relevant_new = 0
        for rec in new_records:
            is_rel = evaluate(self.query, rec.features)
            self.labeled.append(
                LabeledPath(path=rec.path, features=rec.features, relevant=is_rel)
            )
            if is_rel:
                relevant_new += 1
        if relevant_new:
            self.relevant_count += relevant_new
            self.last_new_relevant_iter = iteration
        precision = relevant_new / len(new_records) if new_records else None
        self.precision_history.append((iteration, precision))
        if self.steering_active:
            self.precision_since_train.append(precision)
            self.iters_since_train += 1
        return MetricsSample(
            iteration=iteration,
            new_paths=len(new_records),
            relevant_new=relevant_new,
            precision=precision,
        )

    def ready_to_train(self) -> bool:
        if self.steering_active or self.converged:
            return False
        n = len(self.labeled)
        if n < self.hyper.min_training_size:
            return False
        per_class = min(self.relevant_count, n - self.relevant_count)
        return per_class >= self.hyper.min_class_count

    def train(self, inv: VulnerabilityInventory) -> SteeringRules:
        """Fit the tree on the cumulative labeled set and extract rules."""
        instances = build_training_set(self.labeled, inv)
        tree = fit(instances, self.hyper)
        rules = extract_rules(tree)
        self.tree = tree
        self.rules = rules
        self.steering_active = True
        self.precision_since_train = []
        self.iters_since_train = 0
        return rules

    def breakdown_detected(self) -> bool:
        if not self.steering_active or self.converged:
            return False
        if self.iters_since_train < self.params.window:
            return False
        return detect_breakdown(
            self.precision_since_train, self.params.window, self.params.precision_floor
        )

    def retrain(self, inv: VulnerabilityInventory, iteration: int) -> str:
        """Refit on the cumulative set; returns "converged", "retrained", or "kept".

        Convergence: the refit rules equal the installed ones and no new
        relevant path arrived within the quiet horizon.
        """
        previous = self.rules
        try:
            instances = build_training_set(self.labeled, inv)
            tree = fit(instances, self.hyper)
        except NotTrainableError:
            self.precision_since_train = []
            self.iters_since_train = 0
            return "kept"
        rules = extract_rules(tree)
        quiet_for = (
            iteration - self.last_new_relevant_iter
            if self.last_new_relevant_iter is not None
            else iteration
        )
        if previous is not None and rules == previous and quiet_for >= self.params.quiet_horizon:
            self.converged = True
            self.tree = tree
            self.precision_since_train = []
            self.iters_since_train = 0
            return "converged"
        self.tree = tree
        self.rules = rules
        self.precision_since_train = []
        self.iters_since_train = 0
        return "retrained"
