"""Empirical CDFs, KS distance, feature stability, significance, phases."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class EmptyDistributionError(ValueError):
    pass


class Ecdf:
    """Right-continuous empirical CDF over a sample of one path feature."""

    __slots__ = ("values",)

    def __init__(self, values: Iterable[float]):
        self.values = np.sort(np.asarray(tuple(values), dtype=np.float64))

    @classmethod
    def from_sorted(cls, arr: np.ndarray) -> "Ecdf":
        out = cls.__new__(cls)
        out.values = arr
        return out

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def evaluate(self, t) -> np.ndarray | float:
        """F(t) = (# samples <= t) / n."""
        if self.n == 0:
            raise EmptyDistributionError("cannot evaluate an empty distribution")
        result = np.searchsorted(self.values, t, side="right") / self.n
        return float(result) if np.isscalar(t) else result


def ks_distance(a: Ecdf, b: Ecdf) -> float:
    """Supremum of |F_a - F_b|, attained at a pooled sample point."""
    if a.n == 0 or b.n == 0:
        raise EmptyDistributionError("KS distance needs two non-empty distributions")
    pooled = np.concatenate((a.values, b.values))
    fa = np.searchsorted(a.values, pooled, side="right") / a.n
    fb = np.searchsorted(b.values, pooled, side="right") / b.n
    return float(np.max(np.abs(fa - fb)))


def stability(prev: Ecdf, curr: Ecdf) -> float:
    """1 minus the KS distance between consecutive cumulative distributions."""
    return 1.0 - ks_distance(prev, curr)


def dkw_epsilon(n: int, alpha: float) -> float:
    """DKW confidence radius sqrt(ln(2/alpha) / (2n)) for an n-sample ECDF."""
    if n < 1:
        raise EmptyDistributionError("confidence radius needs at least one sample")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


@dataclass(frozen=True)
class SignificanceResult:
    feature: str
    ks: float
    threshold: float
    alpha: float
    epsilon_n: float
    significant: bool


def significance(
    pag_ecdf: Ecdf,
    gt_ecdf: Ecdf,
    threshold: float = 0.1,
    alpha: float = 0.05,
    feature: str = "feature",
) -> SignificanceResult:
    """A-posteriori significance of a partial distribution against the exact one.

    The sampled distribution is declared significant when its KS distance to
    the exact distribution stays below `threshold` even after widening by the
    DKW confidence radius at level `alpha`.
    """
    ks = ks_distance(pag_ecdf, gt_ecdf)
    epsilon = dkw_epsilon(pag_ecdf.n, alpha)
    return SignificanceResult(
        feature=feature,
        ks=ks,
        threshold=threshold,
        alpha=alpha,
        epsilon_n=epsilon,
        significant=ks + epsilon <= threshold,
    )


PHASE_EARLY = "early"
PHASE_MATURE = "mature"
PHASE_DEFINITIVE = "definitive"

STABILITY_MATURE = 0.85
STABILITY_DEFINITIVE = 0.95

DEFAULT_PHASE_WINDOW = 10


def classify_phase(smoothed_stability: float) -> str:
    if smoothed_stability >= STABILITY_DEFINITIVE:
        return PHASE_DEFINITIVE
    if smoothed_stability >= STABILITY_MATURE:
        return PHASE_MATURE
    return PHASE_EARLY


def phase_from_series(series: Sequence[float], window: int = DEFAULT_PHASE_WINDOW) -> str:
    """Phase from the moving median of per-iteration stability values."""
    if not series:
        return PHASE_EARLY
    tail = series[-window:] if window > 0 else series
    return classify_phase(statistics.median(tail))
