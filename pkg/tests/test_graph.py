import pytest

from asreg.errors import ParseError, UnknownSymbolError
from asreg.graph import (
    KnowledgeGraph,
    Triple,
    Vocabulary,
    format_triples,
    load_triples,
)


def test_load_single_line_maps_fields():
    vocab = Vocabulary()
    triples = load_triples("Mark\tsiblingOf\tJohn", vocab)
    assert triples == [Triple(relation=0, subject=0, object=1)]
    assert vocab.entities == ["Mark", "John"]
    assert vocab.relations == ["siblingOf"]


def test_duplicate_lines_kept_in_list_deduped_in_set():
    vocab = Vocabulary()
    triples = load_triples("a\tr\tb\na\tr\tb", vocab)
    graph = KnowledgeGraph(triples)
    assert len(graph) == 2
    assert len(graph.known) == 1


def test_two_fields_is_parse_error_with_line_number():
    with pytest.raises(ParseError, match="line 1"):
        load_triples("a\tb", Vocabulary())


def test_empty_field_is_parse_error():
    with pytest.raises(ParseError, match="empty field"):
        load_triples("a\t\tb", Vocabulary())


def test_parse_error_reports_later_line():
    with pytest.raises(ParseError, match="line 3"):
        load_triples("a\tr\tb\n# comment\nbroken line", Vocabulary())


def test_comments_and_blank_lines_skipped():
    vocab = Vocabulary()
    triples = load_triples("# header\n\na\tr\tb\n   \n", vocab)
    assert len(triples) == 1


def test_ids_assigned_in_first_seen_order():
    vocab = Vocabulary()
    load_triples("s1\tr1\to1\ns2\tr2\to2", vocab)
    assert vocab.entities == ["s1", "o1", "s2", "o2"]
    assert vocab.relations == ["r1", "r2"]
    assert vocab.entity_index == {n: i for i, n in enumerate(vocab.entities)}


def test_empty_graph_contains_nothing():
    graph = KnowledgeGraph([])
    assert len(graph) == 0
    assert Triple(0, 0, 0) not in graph


def test_graph_membership():
    t1, t2 = Triple(0, 0, 1), Triple(1, 1, 0)
    graph = KnowledgeGraph([t1, t2])
    assert t1 in graph and t2 in graph
    assert Triple(0, 1, 0) not in graph


def test_freeze_blocks_unknown_names_and_is_idempotent():
    vocab = Vocabulary()
    vocab.add_entity("Mark")
    vocab.freeze()
    vocab.freeze()
    assert vocab.entity_id("Mark") == 0
    assert vocab.add_entity("Mark") == 0
    with pytest.raises(UnknownSymbolError):
        vocab.add_entity("Zeus")
    with pytest.raises(UnknownSymbolError):
        vocab.entity_id("Zeus")


def test_tsv_round_trip_preserves_known_set():
    vocab = Vocabulary()
    triples = load_triples("a\tr\tb\nb\tr\tc\na\ts\ta", vocab)
    graph = KnowledgeGraph(triples)
    reloaded = load_triples(format_triples(graph.triples, vocab), vocab)
    assert KnowledgeGraph(reloaded).known == graph.known
