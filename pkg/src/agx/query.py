"""Attack-path query language: parsing, evaluation, presets, range classes.

Grammar (AND binds tighter than OR, keywords and feature names are
case-insensitive):

    expr := term (OR term)*
    term := atom (AND atom)*
    atom := feature cmp number | '(' expr ')'
    cmp  := '<' | '<=' | '>' | '>=' | '='

Features: likelihood, impact, risk (thresholds in [0, 1]) and length.
Equality on the continuous features uses a 1e-9 tolerance.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .risk import PathFeatures

FEATURES = ("likelihood", "impact", "risk", "length")
BOUNDED_FEATURES = ("likelihood", "impact", "risk")
EQ_TOLERANCE = 1e-9


class QuerySyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (position {position})")
        self.position = position


@dataclass(frozen=True)
class Atom:
    feature: str
    op: str
    value: float


@dataclass(frozen=True)
class And:
    items: tuple["QueryAst", ...]


@dataclass(frozen=True)
class Or:
    items: tuple["QueryAst", ...]


QueryAst = Union[Atom, And, Or]


_TOKEN_RE = re.compile(
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_]+)"
    r"|(?P<op><=|>=|<|>|=)"
    r"|(?P<lpar>\()"
    r"|(?P<rpar>\))"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup or ""
        tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0

    def peek(self) -> _Token | None:
        return self.tokens[self.index] if self.index < len(self.tokens) else None

    def next(self) -> _Token | None:
        tok = self.peek()
        if tok is not None:
            self.index += 1
        return tok

    def _keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "ident" and tok.text.lower() == word

    def parse(self) -> QueryAst:
        node = self.expr()
        tok = self.peek()
        if tok is not None:
            raise QuerySyntaxError(f"unexpected trailing input {tok.text!r}", tok.pos)
        return node

    def expr(self) -> QueryAst:
        terms = [self.term()]
        while self._keyword("or"):
            self.next()
            terms.append(self.term())
        return terms[0] if len(terms) == 1 else Or(tuple(terms))

    def term(self) -> QueryAst:
        atoms = [self.atom()]
        while self._keyword("and"):
            self.next()
            atoms.append(self.atom())
        return atoms[0] if len(atoms) == 1 else And(tuple(atoms))

    def atom(self) -> QueryAst:
        tok = self.next()
        if tok is None:
            raise QuerySyntaxError("expected a feature name or '('", len(self.text))
        if tok.kind == "lpar":
            node = self.expr()
            closing = self.next()
            if closing is None or closing.kind != "rpar":
                pos = closing.pos if closing else len(self.text)
                raise QuerySyntaxError("expected ')'", pos)
            return node
        if tok.kind != "ident":
            raise QuerySyntaxError(f"expected a feature name, got {tok.text!r}", tok.pos)
        feature = tok.text.lower()
        if feature not in FEATURES:
            raise QuerySyntaxError(f"unknown feature {tok.text!r}", tok.pos)
        op_tok = self.next()
        if op_tok is None or op_tok.kind != "op":
            pos = op_tok.pos if op_tok else len(self.text)
            raise QuerySyntaxError("expected a comparison operator", pos)
        num_tok = self.next()
        if num_tok is None or num_tok.kind != "num":
            pos = num_tok.pos if num_tok else len(self.text)
            raise QuerySyntaxError("expected a number", pos)
        value = float(num_tok.text)
        if feature in BOUNDED_FEATURES and not (0.0 <= value <= 1.0):
            raise QuerySyntaxError(
                f"threshold {num_tok.text} out of [0, 1] for feature {feature}", num_tok.pos
            )
        return Atom(feature=feature, op=op_tok.text, value=value)


def parse_query(text: str) -> QueryAst:
    return _Parser(text).parse()


def serialize_query(q: QueryAst) -> str:
    """Canonical text form; parse_query(serialize_query(q)) == q."""
    if isinstance(q, Atom):
        return f"{q.feature} {q.op} {q.value!r}"
    if isinstance(q, And):
        parts = []
        for item in q.items:
            text = serialize_query(item)
            # parenthesize compounds so the parse tree shape survives
            parts.append(f"({text})" if isinstance(item, (And, Or)) else text)
        return " AND ".join(parts)
    if isinstance(q, Or):
        parts = []
        for item in q.items:
            text = serialize_query(item)
            parts.append(f"({text})" if isinstance(item, Or) else text)
        return " OR ".join(parts)
    raise TypeError(f"not a query node: {q!r}")


def _compare(value: float, op: str, threshold: float) -> bool:
    if op == "<":
        return value < threshold
    if op == "<=":
        return value <= threshold
    if op == ">":
        return value > threshold
    if op == ">=":
        return value >= threshold
    if op == "=":
        return abs(value - threshold) <= EQ_TOLERANCE
    raise ValueError(f"unknown comparator {op!r}")


def evaluate(q: QueryAst, f: PathFeatures) -> bool:
    if isinstance(q, Atom):
        return _compare(float(getattr(f, q.feature)), q.op, q.value)
    if isinstance(q, And):
        return all(evaluate(item, f) for item in q.items)
    if isinstance(q, Or):
        return any(evaluate(item, f) for item in q.items)
    raise TypeError(f"not a query node: {q!r}")


@dataclass(frozen=True)
class AnalysisDirective:
    """A post-processing analysis over retrieved paths (presets Q1 and Q7)."""

    kind: str  # "shortest_path_risk" | "risk_bands"
    bands: tuple[tuple[float, float], ...] = ()


#: Risk bands walked by the prioritize-by-risk analysis: exactly risk 1 first,
#: then [0.9, 1), ..., stopping after [0.5, 0.6).
RISK_BANDS: tuple[tuple[float, float], ...] = (
    (1.0, 1.0),
    (0.9, 1.0),
    (0.8, 0.9),
    (0.7, 0.8),
    (0.6, 0.7),
    (0.5, 0.6),
)

PRESET_NAMES = ("Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7")


def preset(name: str) -> QueryAst | AnalysisDirective:
    """Named analyst queries Q1..Q7."""
    key = name.upper()
    if key == "Q1":
        return AnalysisDirective(kind="shortest_path_risk")
    if key == "Q2":
        return Atom("impact", "=", 1.0)
    if key == "Q3":
        return Atom("likelihood", "=", 1.0)
    if key == "Q4":
        return Atom("risk", "=", 1.0)
    if key == "Q5":
        return And((Atom("impact", ">", 0.9), Atom("likelihood", "<", 0.3)))
    if key == "Q6":
        return And((Atom("impact", "<", 0.3), Atom("likelihood", ">", 0.9)))
    if key == "Q7":
        return AnalysisDirective(kind="risk_bands", bands=RISK_BANDS)
    raise ValueError(f"unknown preset {name!r} (expected Q1..Q7)")


def band_query(lo: float, hi: float) -> QueryAst:
    """Feature-box query for one risk band; the degenerate band is an equality."""
    if lo == hi:
        return Atom("risk", "=", lo)
    return And((Atom("risk", ">=", lo), Atom("risk", "<", hi)))


class UnsupportedQueryShapeError(ValueError):
    pass


@dataclass(frozen=True)
class QueryRange:
    """Stringency class of a conjunctive feature-box query."""

    classification: str  # "low" | "medium" | "high"
    widths: dict[str, float]

    LOW_MAX = 0.2
    MEDIUM_MAX = 0.5


def _conjunction_atoms(q: QueryAst) -> list[Atom]:
    if isinstance(q, Atom):
        return [q]
    if isinstance(q, And):
        atoms: list[Atom] = []
        for item in q.items:
            if not isinstance(item, Atom):
                raise UnsupportedQueryShapeError(
                    "range classification needs a flat conjunction of feature constraints"
                )
            atoms.append(item)
        return atoms
    raise UnsupportedQueryShapeError(
        "range classification needs a flat conjunction of feature constraints"
    )


def classify_range(q: QueryAst) -> QueryRange:
    """Classify a conjunctive box query by the widest admitted feature interval."""
    intervals: dict[str, tuple[float, float]] = {}
    for atom in _conjunction_atoms(q):
        if atom.feature not in BOUNDED_FEATURES:
            raise UnsupportedQueryShapeError(
                f"range classification is defined over {BOUNDED_FEATURES}, not {atom.feature!r}"
            )
        lo, hi = intervals.get(atom.feature, (0.0, 1.0))
        if atom.op in (">", ">="):
            lo = max(lo, atom.value)
        elif atom.op in ("<", "<="):
            hi = min(hi, atom.value)
        else:  # equality pins the interval
            lo = max(lo, atom.value)
            hi = min(hi, atom.value)
        intervals[atom.feature] = (lo, hi)
    widths = {feat: max(0.0, hi - lo) for feat, (lo, hi) in intervals.items()}
    worst = max(widths.values())
    if worst <= QueryRange.LOW_MAX:
        classification = "low"
    elif worst <= QueryRange.MEDIUM_MAX:
        classification = "medium"
    else:
        classification = "high"
    return QueryRange(classification=classification, widths=widths)
