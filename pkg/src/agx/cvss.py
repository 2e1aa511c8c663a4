"""CVSS v3.1 base-vector parsing and scoring.

Implements the FIRST CVSS v3.1 base metrics: strict vector parsing, the
exploitability and impact sub-scores, and the rounded base score. Only the
eight base metrics are supported; temporal and environmental metrics are out
of scope.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum


class AttackVector(str, Enum):
    NETWORK = "N"
    ADJACENT = "A"
    LOCAL = "L"
    PHYSICAL = "P"


class AttackComplexity(str, Enum):
    LOW = "L"
    HIGH = "H"


class PrivilegesRequired(str, Enum):
    NONE = "N"
    LOW = "L"
    HIGH = "H"


class UserInteraction(str, Enum):
    NONE = "N"
    REQUIRED = "R"


class Scope(str, Enum):
    UNCHANGED = "U"
    CHANGED = "C"


class ImpactLevel(str, Enum):
    NONE = "N"
    LOW = "L"
    HIGH = "H"


@dataclass(frozen=True)
class CvssMetrics:
    """The eight CVSS v3.1 base metrics of one vulnerability."""

    av: AttackVector
    ac: AttackComplexity
    pr: PrivilegesRequired
    ui: UserInteraction
    scope: Scope
    c: ImpactLevel
    i: ImpactLevel
    a: ImpactLevel


class CvssParseError(ValueError):
    """Vector text rejected; `offset` is the character position of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


_PREFIX = "CVSS:3.1"

_METRIC_KEYS = ("AV", "AC", "PR", "UI", "S", "C", "I", "A")

_METRIC_ENUM = {
    "AV": AttackVector,
    "AC": AttackComplexity,
    "PR": PrivilegesRequired,
    "UI": UserInteraction,
    "S": Scope,
    "C": ImpactLevel,
    "I": ImpactLevel,
    "A": ImpactLevel,
}

_FIELD_BY_KEY = {
    "AV": "av",
    "AC": "ac",
    "PR": "pr",
    "UI": "ui",
    "S": "scope",
    "C": "c",
    "I": "i",
    "A": "a",
}


def parse_vector(text: str) -> CvssMetrics:
    """Parse a strict CVSS v3.1 base vector.

    Metrics may appear in any order but each exactly once, and all eight must
    be present. Anything else raises CvssParseError with the byte offset of
    the offending segment.
    """
    if not text.startswith("CVSS:"):
        raise CvssParseError("expected 'CVSS:3.1/' prefix", 0)
    if not text.startswith(_PREFIX):
        raise CvssParseError("unsupported CVSS version (only 3.1 is accepted)", 5)
    if len(text) == len(_PREFIX) or text[len(_PREFIX)] != "/":
        raise CvssParseError("expected '/' after version", len(_PREFIX))

    seen: dict[str, Enum] = {}
    pos = len(_PREFIX) + 1
    for segment in text[pos:].split("/"):
        if ":" not in segment:
            raise CvssParseError(f"malformed metric segment {segment!r}", pos)
        key, _, value = segment.partition(":")
        enum = _METRIC_ENUM.get(key)
        if enum is None:
            raise CvssParseError(f"unknown metric {key!r}", pos)
        if key in seen:
            raise CvssParseError(f"duplicate metric {key!r}", pos)
        try:
            seen[key] = enum(value)
        except ValueError:
            raise CvssParseError(
                f"unknown value {value!r} for metric {key}", pos + len(key) + 1
            ) from None
        pos += len(segment) + 1

    missing = [k for k in _METRIC_KEYS if k not in seen]
    if missing:
        raise CvssParseError(f"missing metric(s): {', '.join(missing)}", len(text))
    return CvssMetrics(**{_FIELD_BY_KEY[k]: v for k, v in seen.items()})


def serialize_vector(m: CvssMetrics) -> str:
    """Canonical vector text (metrics in specification order)."""
    return (
        f"CVSS:3.1/AV:{m.av.value}/AC:{m.ac.value}/PR:{m.pr.value}/UI:{m.ui.value}"
        f"/S:{m.scope.value}/C:{m.c.value}/I:{m.i.value}/A:{m.a.value}"
    )


_AV_WEIGHT = {
    AttackVector.NETWORK: 0.85,
    AttackVector.ADJACENT: 0.62,
    AttackVector.LOCAL: 0.55,
    AttackVector.PHYSICAL: 0.2,
}

_AC_WEIGHT = {AttackComplexity.LOW: 0.77, AttackComplexity.HIGH: 0.44}

_PR_WEIGHT_UNCHANGED = {
    PrivilegesRequired.NONE: 0.85,
    PrivilegesRequired.LOW: 0.62,
    PrivilegesRequired.HIGH: 0.27,
}

_PR_WEIGHT_CHANGED = {
    PrivilegesRequired.NONE: 0.85,
    PrivilegesRequired.LOW: 0.68,
    PrivilegesRequired.HIGH: 0.5,
}

_UI_WEIGHT = {UserInteraction.NONE: 0.85, UserInteraction.REQUIRED: 0.62}

_CIA_WEIGHT = {ImpactLevel.NONE: 0.0, ImpactLevel.LOW: 0.22, ImpactLevel.HIGH: 0.56}


def pr_weight(m: CvssMetrics) -> float:
    table = _PR_WEIGHT_CHANGED if m.scope is Scope.CHANGED else _PR_WEIGHT_UNCHANGED
    return table[m.pr]


def av_weight(m: CvssMetrics) -> float:
    return _AV_WEIGHT[m.av]


def ac_weight(m: CvssMetrics) -> float:
    return _AC_WEIGHT[m.ac]


def ui_weight(m: CvssMetrics) -> float:
    return _UI_WEIGHT[m.ui]


def cia_weight(level: ImpactLevel) -> float:
    return _CIA_WEIGHT[level]


def exploitability_subscore(m: CvssMetrics) -> float:
    """8.22 * AV * AC * PR * UI, in [0, 3.9); PR weight depends on scope."""
    return 8.22 * av_weight(m) * ac_weight(m) * pr_weight(m) * ui_weight(m)


def impact_subscore(m: CvssMetrics) -> tuple[float, float]:
    """Return (ISS, scope-adjusted impact sub-score).

    ISS = 1 - (1-C)(1-I)(1-A). The sub-score is 6.42*ISS for unchanged scope
    and 7.52*(ISS-0.029) - 3.25*(ISS-0.02)^15 for changed scope (which may be
    negative for near-zero ISS; the base score treats that as zero impact).
    """
    iss = 1.0 - (1.0 - _CIA_WEIGHT[m.c]) * (1.0 - _CIA_WEIGHT[m.i]) * (1.0 - _CIA_WEIGHT[m.a])
    if m.scope is Scope.UNCHANGED:
        sub = 6.42 * iss
    else:
        sub = 7.52 * (iss - 0.029) - 3.25 * (iss - 0.02) ** 15
    return iss, sub


def _round_up(value: float) -> float:
    # Official round-up rule: smallest one-decimal number >= value, computed
    # on the value scaled by 1e5 to dodge binary representation artifacts.
    scaled = int(math.floor(value * 100000 + 0.5))
    if scaled % 10000 == 0:
        return scaled / 100000.0
    return (scaled // 10000 + 1) / 10.0


def base_score(m: CvssMetrics) -> float:
    """Official v3.1 base score, including the round-up-to-one-decimal rule."""
    _, impact = impact_subscore(m)
    if impact <= 0:
        return 0.0
    expl = exploitability_subscore(m)
    if m.scope is Scope.UNCHANGED:
        raw = min(impact + expl, 10.0)
    else:
        raw = min(1.08 * (impact + expl), 10.0)
    return _round_up(raw)


def iter_base_vectors():
    """Yield every well-formed base-metric combination (4*2*3*2*2*27 = 2592)."""
    for av, ac, pr, ui, scope, c, i, a in itertools.product(
        AttackVector, AttackComplexity, PrivilegesRequired, UserInteraction,
        Scope, ImpactLevel, ImpactLevel, ImpactLevel,
    ):
        yield CvssMetrics(av=av, ac=ac, pr=pr, ui=ui, scope=scope, c=c, i=i, a=a)
