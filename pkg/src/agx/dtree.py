"""Binary CART decision tree over vulnerability features, with rule extraction.

Greedy Gini-impurity growth with midpoint thresholds; ties break toward the
lowest feature index, then the lowest threshold, so fitting is deterministic.
Relevant leaves translate into a DNF of threshold conditions used to filter
the sampler's admissible vulnerabilities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .risk import FEATURE_NAMES


class NotTrainableError(ValueError):
    """Too little (or single-class) data to fit a useful classifier."""


@dataclass(frozen=True)
class Hyperparams:
    max_depth: int = 8
    min_samples_leaf: int = 5
    min_training_size: int = 100
    min_class_count: int = 10

    def __post_init__(self):
        if self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValueError("max_depth and min_samples_leaf must be positive")
        if self.min_training_size < 0 or self.min_class_count < 0:
            raise ValueError("training thresholds must be non-negative")


@dataclass(frozen=True)
class TrainingInstance:
    features: tuple[float, ...]
    relevant: bool


@dataclass(frozen=True)
class Leaf:
    relevant: bool
    counts: tuple[int, int]  # (not relevant, relevant)


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float  # left: value <= threshold, right: value > threshold
    left: "Node"
    right: "Node"


Node = Union[Leaf, Split]


@dataclass(frozen=True)
class Tree:
    root: Node
    n_features: int
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def depth(self) -> int:
        def _depth(node: Node) -> int:
            if isinstance(node, Leaf):
                return 0
            return 1 + max(_depth(node.left), _depth(node.right))

        return _depth(self.root)


def _gini(n0: int, n1: int) -> float:
    n = n0 + n1
    if n == 0:
        return 0.0
    p0 = n0 / n
    p1 = n1 / n
    return 1.0 - p0 * p0 - p1 * p1


def fit(instances: Sequence[TrainingInstance], hp: Hyperparams = Hyperparams()) -> Tree:
    """Fit a CART tree; raises NotTrainableError on insufficient or one-sided data."""
    n = len(instances)
    if n < hp.min_training_size:
        raise NotTrainableError(
            f"{n} instances < min_training_size {hp.min_training_size}"
        )
    y = np.asarray([1 if ins.relevant else 0 for ins in instances], dtype=np.int64)
    n1 = int(y.sum())
    n0 = n - n1
    if min(n0, n1) < hp.min_class_count:
        raise NotTrainableError(
            f"class counts ({n0} not relevant, {n1} relevant) below "
            f"min_class_count {hp.min_class_count}"
        )
    x = np.asarray([ins.features for ins in instances], dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("instances must share one feature arity")
    n_features = x.shape[1]

    def build(idx: np.ndarray, depth: int) -> Node:
        counts = (int((y[idx] == 0).sum()), int((y[idx] == 1).sum()))
        majority = counts[1] > counts[0]  # ties label not-relevant
        if counts[0] == 0 or counts[1] == 0 or depth >= hp.max_depth:
            return Leaf(relevant=majority, counts=counts)
        if idx.size < 2 * hp.min_samples_leaf:
            return Leaf(relevant=majority, counts=counts)

        best: tuple[float, int, float] | None = None  # (gini, feature, threshold)
        for f in range(n_features):
            col = x[idx, f]
            order = np.argsort(col, kind="stable")
            sorted_vals = col[order]
            sorted_y = y[idx][order]
            ones_prefix = np.cumsum(sorted_y)
            total_ones = int(ones_prefix[-1])
            for k in range(idx.size - 1):
                if sorted_vals[k] == sorted_vals[k + 1]:
                    continue
                left_n = k + 1
                right_n = idx.size - left_n
                if left_n < hp.min_samples_leaf or right_n < hp.min_samples_leaf:
                    continue
                left_ones = int(ones_prefix[k])
                right_ones = total_ones - left_ones
                weighted = (
                    left_n * _gini(left_n - left_ones, left_ones)
                    + right_n * _gini(right_n - right_ones, right_ones)
                ) / idx.size
                threshold = (float(sorted_vals[k]) + float(sorted_vals[k + 1])) / 2.0
                if best is None or weighted < best[0] - 1e-15:
                    best = (weighted, f, threshold)

        if best is None:
            return Leaf(relevant=majority, counts=counts)
        _, f, threshold = best
        mask = x[idx, f] <= threshold
        return Split(
            feature=f,
            threshold=threshold,
            left=build(idx[mask], depth + 1),
            right=build(idx[~mask], depth + 1),
        )

    root = build(np.arange(n), 0)
    return Tree(root=root, n_features=n_features)


def predict(tree: Tree, x: Sequence[float]) -> bool:
    """Descend thresholds (<= goes left) to the leaf label."""
    if len(x) != tree.n_features:
        raise ValueError(f"expected {tree.n_features} features, got {len(x)}")
    node = tree.root
    while isinstance(node, Split):
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.relevant


@dataclass(frozen=True)
class Condition:
    feature: int
    op: str  # "<=" or ">"
    threshold: float

    def holds(self, x: Sequence[float]) -> bool:
        v = x[self.feature]
        return v <= self.threshold if self.op == "<=" else v > self.threshold


@dataclass(frozen=True)
class SteeringRules:
    """DNF over vulnerability features; one conjunction per relevant leaf.

    `always` matches everything (the whole tree is relevant); an empty
    conjunction tuple matches nothing.
    """

    conjunctions: tuple[tuple[Condition, ...], ...] = ()
    always: bool = False

    @property
    def matches_nothing(self) -> bool:
        return not self.always and not self.conjunctions


def extract_rules(tree: Tree) -> SteeringRules:
    """Collect root-to-relevant-leaf constraints, tightest bound per feature/direction."""
    conjunctions: list[tuple[Condition, ...]] = []

    def collapse(conds: list[Condition]) -> tuple[Condition, ...]:
        upper: dict[int, float] = {}  # feature -> tightest "<="
        lower: dict[int, float] = {}  # feature -> tightest ">"
        for cond in conds:
            if cond.op == "<=":
                prev = upper.get(cond.feature)
                upper[cond.feature] = cond.threshold if prev is None else min(prev, cond.threshold)
            else:
                prev = lower.get(cond.feature)
                lower[cond.feature] = cond.threshold if prev is None else max(prev, cond.threshold)
        out = [Condition(f, "<=", t) for f, t in upper.items()]
        out.extend(Condition(f, ">", t) for f, t in lower.items())
        out.sort(key=lambda c: (c.feature, c.op, c.threshold))
        return tuple(out)

    def walk(node: Node, conds: list[Condition]) -> None:
        if isinstance(node, Leaf):
            if node.relevant:
                conjunctions.append(collapse(conds))
            return
        walk(node.left, conds + [Condition(node.feature, "<=", node.threshold)])
        walk(node.right, conds + [Condition(node.feature, ">", node.threshold)])

    if isinstance(tree.root, Leaf):
        if tree.root.relevant:
            return SteeringRules(always=True)
        return SteeringRules()
    walk(tree.root, [])
    return SteeringRules(conjunctions=tuple(conjunctions))


def matches(rules: SteeringRules, x: Sequence[float]) -> bool:
    if rules.always:
        return True
    return any(all(cond.holds(x) for cond in conj) for conj in rules.conjunctions)


def tree_to_dict(tree: Tree) -> dict:
    def encode(node: Node) -> dict:
        if isinstance(node, Leaf):
            return {"leaf": True, "relevant": node.relevant, "counts": list(node.counts)}
        return {
            "leaf": False,
            "feature": node.feature,
            "threshold": node.threshold,
            "left": encode(node.left),
            "right": encode(node.right),
        }

    return {
        "n_features": tree.n_features,
        "feature_names": list(tree.feature_names),
        "root": encode(tree.root),
    }


def rules_to_dict(rules: SteeringRules, feature_names: Sequence[str] = FEATURE_NAMES) -> dict:
    return {
        "always": rules.always,
        "conjunctions": [
            [
                {"feature": feature_names[c.feature], "op": c.op, "threshold": c.threshold}
                for c in conj
            ]
            for conj in rules.conjunctions
        ],
    }


def rules_from_dict(data: dict, feature_names: Sequence[str] = FEATURE_NAMES) -> SteeringRules:
    index = {name: i for i, name in enumerate(feature_names)}
    return SteeringRules(
        always=bool(data.get("always", False)),
        conjunctions=tuple(
            tuple(Condition(index[c["feature"]], c["op"], float(c["threshold"])) for c in conj)
            for conj in data.get("conjunctions", [])
        ),
    )


def rules_to_json(rules: SteeringRules) -> str:
    return json.dumps(rules_to_dict(rules), sort_keys=True)
