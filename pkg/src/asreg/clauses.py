"""Horn clauses: parsing, template classification, forward chaining.

Rule grammar, one clause per line::

    clause  :=  atom ('&' atom)* '=>' atom [confidence]
    atom    :=  predicate '(' variable ',' variable ')'

Predicates are runs of alphanumerics plus '_', '.', '/' that do not start
with an uppercase letter (so Freebase paths like /location/contains and
WordNet names like _hypernym are accepted). Variables start with an
uppercase letter or '?'. An optional trailing numeric token (rule
confidence, as shipped with some rule releases) is parsed and stored but
never used. '#' starts a comment line; blank lines are skipped. Constants
in argument positions are rejected.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .errors import (
    ClauseArityError,
    ClauseSyntaxError,
    ParseError,
    UnsafeClauseError,
)
from .graph import KnowledgeGraph, Triple, Vocabulary


class Atom(NamedTuple):
    predicate: str
    arg1: str
    arg2: str

    def __str__(self):
        return f"{self.predicate}({self.arg1}, {self.arg2})"


@dataclass(frozen=True)
class Clause:
    body: tuple[Atom, ...]
    head: Atom
    variables: tuple[str, ...]
    confidence: float | None = None

    def __str__(self):
        return " & ".join(str(a) for a in self.body) + f" => {self.head}"


class ClauseTemplate(enum.Enum):
    SYMMETRY = "symmetry"
    IMPLICATION = "implication"
    INVERSE_IMPLICATION = "inverse_implication"
    TRANSITIVITY_SAME = "transitivity_same"
    TRANSITIVITY_GENERAL = "transitivity_general"
    GENERAL = "general"


_WORD_RE = re.compile(r"[A-Za-z0-9_./?]+")
_NUMBER_RE = re.compile(r"\d+(\.\d+)?([eE][+-]?\d+)?$")
_PUNCT = {"(": "lpar", ")": "rpar", ",": "comma", "&": "amp"}


def _tokenize(text: str):
    """Yield (kind, text, byte offset) tokens; kinds: word, lpar, rpar, comma, amp, arrow."""
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if text.startswith("=>", i):
            tokens.append(("arrow", "=>", i))
            i += 2
            continue
        if ch in _PUNCT:
            tokens.append((_PUNCT[ch], ch, i))
            i += 1
            continue
        match = _WORD_RE.match(text, i)
        if match:
            tokens.append(("word", match.group(), i))
            i = match.end()
            continue
        raise ClauseSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("eof", "", n))
    return tokens


def _is_variable(word: str) -> bool:
    return word[0].isupper() or word[0] == "?"


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, what):
        tok = self.advance()
        if tok[0] != kind:
            raise ClauseSyntaxError(f"expected {what}, got {tok[1]!r}", tok[2])
        return tok

    def atom(self) -> Atom:
        kind, word, offset = self.advance()
        if kind != "word":
            raise ClauseSyntaxError(f"expected predicate, got {word!r}", offset)
        if _is_variable(word):
            raise ClauseSyntaxError(f"variable {word!r} in predicate position", offset)
        self.expect("lpar", "'('")
        args = [self._argument()]
        while self.peek()[0] == "comma":
            self.advance()
            args.append(self._argument())
        self.expect("rpar", "')'")
        if len(args) != 2:
            raise ClauseArityError(
                f"atom {word} has {len(args)} arguments, exactly 2 required"
            )
        return Atom(word, args[0], args[1])

    def _argument(self) -> str:
        kind, word, offset = self.advance()
        if kind != "word":
            raise ClauseSyntaxError(f"expected variable, got {word!r}", offset)
        if not _is_variable(word):
            raise ClauseSyntaxError(
                f"constant {word!r} in argument position (variables only)", offset
            )
        return word


def parse_clause(text: str) -> Clause:
    """Parse one clause line into an AST, enforcing safety.

    Raises ClauseSyntaxError (with byte offset), ClauseArityError, or
    UnsafeClauseError when a head variable does not occur in the body.
    """
    parser = _Parser(text)
    body = [parser.atom()]
    while parser.peek()[0] == "amp":
        parser.advance()
        body.append(parser.atom())
    parser.expect("arrow", "'=>'")
    head = parser.atom()
    confidence = None
    kind, word, offset = parser.peek()
    if kind == "word" and _NUMBER_RE.match(word):
        confidence = float(word)
        parser.advance()
    parser.expect("eof", "end of clause")

    variables: list[str] = []
    for atom in [*body, head]:
        for var in (atom.arg1, atom.arg2):
            if var not in variables:
                variables.append(var)
    body_vars = {v for a in body for v in (a.arg1, a.arg2)}
    for var in (head.arg1, head.arg2):
        if var not in body_vars:
            raise UnsafeClauseError(
                f"head variable {var} does not appear in the body"
            )
    return Clause(tuple(body), head, tuple(variables), confidence)


def parse_rules(lines) -> list[Clause]:
    """Parse a rules file (string or iterable of lines); '#' comments and blanks skipped."""
    if isinstance(lines, str):
        lines = lines.splitlines()
    clauses = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            clauses.append(parse_clause(line))
        except ParseError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
    return clauses


def parse_rules_file(path) -> list[Clause]:
    with open(path, encoding="utf-8") as handle:
        return parse_rules(handle)


def classify_template(clause: Clause) -> ClauseTemplate:
    """Classify a clause's shape up to variable renaming and body order."""
    head = clause.head
    if head.arg1 == head.arg2:
        return ClauseTemplate.GENERAL
    if len(clause.body) == 1:
        b = clause.body[0]
        if b.arg1 == b.arg2:
            return ClauseTemplate.GENERAL
        if (head.arg1, head.arg2) == (b.arg1, b.arg2):
            return ClauseTemplate.IMPLICATION
        if (head.arg1, head.arg2) == (b.arg2, b.arg1):
            if head.predicate == b.predicate:
                return ClauseTemplate.SYMMETRY
            return ClauseTemplate.INVERSE_IMPLICATION
        return ClauseTemplate.GENERAL
    if len(clause.body) == 2:
        for first, second in (clause.body, clause.body[::-1]):
            x, y = first.arg1, first.arg2
            if second.arg1 != y:
                continue
            z = second.arg2
            if len({x, y, z}) != 3:
                continue
            if (head.arg1, head.arg2) == (x, z):
                if first.predicate == second.predicate == head.predicate:
                    return ClauseTemplate.TRANSITIVITY_SAME
                return ClauseTemplate.TRANSITIVITY_GENERAL
        return ClauseTemplate.GENERAL
    return ClauseTemplate.GENERAL


class ChainResult(NamedTuple):
    new_facts: KnowledgeGraph
    saturated: bool


def _resolve_predicates(clauses: Iterable[Clause], vocab: Vocabulary) -> list[tuple]:
    resolved = []
    for clause in clauses:
        body = [(vocab.relation_id(a.predicate), a.arg1, a.arg2) for a in clause.body]
        head = (
            vocab.relation_id(clause.head.predicate),
            clause.head.arg1,
            clause.head.arg2,
        )
        resolved.append((body, head))
    return resolved


def _match_body(body, j, binding, by_pred, delta_by_pred, out, head):
    """Backtrack over body atoms; atom j must match a delta fact."""
    if not body:
        rel, v1, v2 = head
        out.add(Triple(rel, binding[v1], binding[v2]))
        return
    (rel, v1, v2), rest = body[0], body[1:]
    source = delta_by_pred if j == 0 else by_pred
    for s, o in source.get(rel, ()):
        if v1 == v2 and s != o:
            continue
        bound1 = binding.get(v1)
        if bound1 is not None and bound1 != s:
            continue
        bound2 = binding.get(v2)
        if bound2 is not None and bound2 != o:
            continue
        extended = dict(binding)
        extended[v1] = s
        extended[v2] = o
        _match_body(rest, j - 1, extended, by_pred, delta_by_pred, out, head)


def forward_chain(
    graph: KnowledgeGraph,
    clauses: Iterable[Clause],
    vocab: Vocabulary,
    max_rounds: int = 64,
) -> ChainResult:
    """Saturate the clauses over the graph with semi-naive evaluation.

    Returns the facts derivable from the graph that are not already in it,
    sorted by (relation, subject, object) ids, plus a flag telling whether a
    fixpoint was reached within ``max_rounds``.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    resolved = _resolve_predicates(clauses, vocab)
    known = set(graph.known)
    derived: set[Triple] = set()
    delta = set(known)

    def index(facts):
        by_pred: dict[int, list[tuple[int, int]]] = {}
        for t in facts:
            by_pred.setdefault(t.relation, []).append((t.subject, t.object))
        return by_pred

    saturated = False
    for _ in range(max_rounds):
        by_pred = index(known)
        delta_by_pred = index(delta)
        candidates: set[Triple] = set()
        for body, head in resolved:
            for j in range(len(body)):
                _match_body(body, j, {}, by_pred, delta_by_pred, candidates, head)
        new = candidates - known
        if not new:
            saturated = True
            break
        known |= new
        derived |= new
        delta = new
    return ChainResult(KnowledgeGraph(sorted(derived)), saturated)
