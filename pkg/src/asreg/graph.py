"""Triples, vocabularies and knowledge graphs.

Triple files are UTF-8 text, one fact per line, with subject, relation and
object separated by single tabs. Lines starting with '#' and blank lines are
ignored. There is no quoting or escaping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .errors import ParseError, UnknownSymbolError


class Triple(NamedTuple):
    relation: int
    subject: int
    object: int


class Vocabulary:
    """Dense name <-> id maps for entities and relations.

    Ids are assigned in first-seen order, so loading the same files in the
    same order always produces the same ids. After ``freeze()`` unknown names
    raise instead of being added.
    """

    def __init__(self):
        self.entities: list[str] = []
        self.relations: list[str] = []
        self.entity_index: dict[str, int] = {}
        self.relation_index: dict[str, int] = {}
        self._frozen = False

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    @property
    def frozen(self) -> bool:
        return self._frozen

    def add_entity(self, name: str) -> int:
        """Return the id for ``name``, adding it unless the vocabulary is frozen."""
        idx = self.entity_index.get(name)
        if idx is not None:
            return idx
        if self._frozen:
            raise UnknownSymbolError(f"unknown entity {name!r} (vocabulary is frozen)")
        idx = len(self.entities)
        self.entities.append(name)
        self.entity_index[name] = idx
        return idx

    def add_relation(self, name: str) -> int:
        idx = self.relation_index.get(name)
        if idx is not None:
            return idx
        if self._frozen:
            raise UnknownSymbolError(f"unknown relation {name!r} (vocabulary is frozen)")
        idx = len(self.relations)
        self.relations.append(name)
        self.relation_index[name] = idx
        return idx

    def entity_id(self, name: str) -> int:
        try:
            return self.entity_index[name]
        except KeyError:
            raise UnknownSymbolError(f"unknown entity {name!r}") from None

    def relation_id(self, name: str) -> int:
        try:
            return self.relation_index[name]
        except KeyError:
            raise UnknownSymbolError(f"unknown relation {name!r}") from None

    def freeze(self) -> "Vocabulary":
        """Disallow further additions. Idempotent; returns self."""
        self._frozen = True
        return self


class KnowledgeGraph:
    """An ordered list of triples plus an O(1) membership set.

    Duplicates are kept in the list (they weight the loss during training)
    but collapse to one element in the membership set.
    """

    def __init__(self, triples: Iterable[Triple] = ()):
        self.triples: list[Triple] = list(triples)
        self.known: frozenset[Triple] = frozenset(self.triples)

    def __contains__(self, triple: Triple) -> bool:
        return triple in self.known

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self):
        return iter(self.triples)


@dataclass
class DatasetSplit:
    """Train/valid/test graphs sharing a single vocabulary."""

    vocab: Vocabulary
    train: KnowledgeGraph
    valid: KnowledgeGraph = field(default_factory=KnowledgeGraph)
    test: KnowledgeGraph = field(default_factory=KnowledgeGraph)
    test_partitions: dict[str, KnowledgeGraph] | None = None


def load_triples(lines, vocab: Vocabulary) -> list[Triple]:
    """Parse tab-separated subject/relation/object lines into triples.

    ``lines`` may be a string or any iterable of lines. Unknown names are
    added to ``vocab`` in first-seen order; with a frozen vocabulary an
    unknown name raises UnknownSymbolError.
    """
    if isinstance(lines, str):
        lines = lines.splitlines()
    triples = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(
                f"line {lineno}: expected 3 tab-separated fields, got {len(fields)}"
            )
        subject, relation, obj = fields
        if not subject or not relation or not obj:
            raise ParseError(f"line {lineno}: empty field")
        triples.append(
            Triple(
                relation=vocab.add_relation(relation),
                subject=vocab.add_entity(subject),
                object=vocab.add_entity(obj),
            )
        )
    return triples


def load_triples_file(path, vocab: Vocabulary) -> list[Triple]:
    with open(path, encoding="utf-8") as handle:
        return load_triples(handle, vocab)


def format_triples(triples: Iterable[Triple], vocab: Vocabulary) -> str:
    """Serialize triples back to the subject/relation/object TSV format."""
    rows = []
    for t in triples:
        rows.append(
            f"{vocab.entities[t.subject]}\t{vocab.relations[t.relation]}\t{vocab.entities[t.object]}"
        )
    return "\n".join(rows) + ("\n" if rows else "")


def write_triples_file(path, triples: Iterable[Triple], vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(format_triples(triples, vocab))
