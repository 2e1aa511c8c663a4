"""Per-vulnerability risk features and attack-path feature aggregation.

A vulnerability's likelihood feature is its exploitability sub-score
normalized by the 3.9 specification maximum; its impact feature is the ISS.
Path likelihood/impact aggregate the per-step features (weakest link /
worst damage by default) and risk is their product, all in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .cvss import (
    CvssMetrics,
    Scope,
    ac_weight,
    av_weight,
    cia_weight,
    exploitability_subscore,
    impact_subscore,
    pr_weight,
    ui_weight,
)

MAX_EXPLOITABILITY = 3.9

# Fixed feature order used for decision-tree training vectors.
FEATURE_NAMES = ("av", "ac", "pr", "ui", "scope", "c", "i", "a", "likelihood_v", "impact_v")


@dataclass(frozen=True)
class VulnFeatures:
    """Numeric encoding of one vulnerability (official CVSS weights as ordinals)."""

    av: float
    ac: float
    pr: float
    ui: float
    scope: float
    c: float
    i: float
    a: float
    likelihood_v: float
    impact_v: float

    def vector(self) -> tuple[float, ...]:
        return (
            self.av, self.ac, self.pr, self.ui, self.scope,
            self.c, self.i, self.a, self.likelihood_v, self.impact_v,
        )


def vuln_features(m: CvssMetrics) -> VulnFeatures:
    iss, _ = impact_subscore(m)
    likelihood = exploitability_subscore(m) / MAX_EXPLOITABILITY
    return VulnFeatures(
        av=av_weight(m),
        ac=ac_weight(m),
        pr=pr_weight(m),
        ui=ui_weight(m),
        scope=1.0 if m.scope is Scope.CHANGED else 0.0,
        c=cia_weight(m.c),
        i=cia_weight(m.i),
        a=cia_weight(m.a),
        likelihood_v=min(max(likelihood, 0.0), 1.0),
        impact_v=iss,
    )


@dataclass(frozen=True)
class PathFeatures:
    likelihood: float
    impact: float
    risk: float
    length: int


LIKELIHOOD_AGGREGATIONS = ("min", "product", "geometric-mean")
IMPACT_AGGREGATIONS = ("max", "mean")


@dataclass(frozen=True)
class AggregationStrategy:
    """How per-step features combine into path features. Defaults: (min, max)."""

    likelihood_agg: str = "min"
    impact_agg: str = "max"

    def __post_init__(self):
        if self.likelihood_agg not in LIKELIHOOD_AGGREGATIONS:
            raise ValueError(f"unknown likelihood aggregation {self.likelihood_agg!r}")
        if self.impact_agg not in IMPACT_AGGREGATIONS:
            raise ValueError(f"unknown impact aggregation {self.impact_agg!r}")


def aggregate_likelihood(values: Sequence[float], how: str = "min") -> float:
    if not values:
        raise ValueError("cannot aggregate an empty feature sequence")
    if how == "min":
        return min(values)
    if how == "product":
        prod = 1.0
        for v in values:
            prod *= v
        return prod
    if how == "geometric-mean":
        prod = 1.0
        for v in values:
            prod *= v
        if prod == 0.0:
            return 0.0
        return prod ** (1.0 / len(values))
    raise ValueError(f"unknown likelihood aggregation {how!r}")


def aggregate_impact(values: Sequence[float], how: str = "max") -> float:
    if not values:
        raise ValueError("cannot aggregate an empty feature sequence")
    if how == "max":
        return max(values)
    if how == "mean":
        return sum(values) / len(values)
    raise ValueError(f"unknown impact aggregation {how!r}")


def combine_features(
    likelihoods: Sequence[float],
    impacts: Sequence[float],
    strat: AggregationStrategy = AggregationStrategy(),
) -> PathFeatures:
    likelihood = aggregate_likelihood(likelihoods, strat.likelihood_agg)
    impact = aggregate_impact(impacts, strat.impact_agg)
    return PathFeatures(
        likelihood=likelihood,
        impact=impact,
        risk=likelihood * impact,
        length=len(likelihoods),
    )


class FeatureResolutionError(LookupError):
    """A path references a vulnerability id absent from the inventory."""


def path_features(path, inv, strat: AggregationStrategy = AggregationStrategy()) -> PathFeatures:
    """Aggregate the features of every step of `path`, resolving ids in `inv`.

    Each step's vulnerability must exist in the inventory of the step's
    target host.
    """
    likelihoods: list[float] = []
    impacts: list[float] = []
    for k, vuln_id in enumerate(path.vulns):
        host = path.states[k + 1]
        vuln = inv.get(host, vuln_id)
        if vuln is None:
            raise FeatureResolutionError(
                f"step {k}: vulnerability {vuln_id!r} not in inventory of host {host!r}"
            )
        feats = vuln_features(vuln.cvss)
        likelihoods.append(feats.likelihood_v)
        impacts.append(feats.impact_v)
    return combine_features(likelihoods, impacts, strat)


def features_of_vulns(metrics: Iterable[CvssMetrics]) -> list[VulnFeatures]:
    return [vuln_features(m) for m in metrics]
