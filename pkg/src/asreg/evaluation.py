"""Ranking metrics (MRR, Hits@k), AUC-PR, and test partitioning.

Ranks are optimistic: a competitor must score strictly higher than the
target to outrank it, so ties resolve in the target's favor. The filtered
setting removes competitors that are themselves known true triples.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .clauses import Clause, forward_chain
from .errors import ConfigError, UndefinedMetricError
from .graph import DatasetSplit, KnowledgeGraph, Triple, Vocabulary
from .scoring import ModelParams, all_object_scores, all_subject_scores

RAW = "raw"
FILTERED = "filtered"


class RankResult(NamedTuple):
    triple: Triple
    subject_rank: int
    object_rank: int
    mode: str


@dataclass
class MetricsReport:
    mrr: float
    hits: dict[int, float]
    n_triples: int
    partition: str | None = None


def rank_triple(
    params: ModelParams,
    triple: Triple,
    vocab: Vocabulary,
    filter_graph: KnowledgeGraph | None = None,
    mode: str = RAW,
) -> RankResult:
    """Rank the triple against all subject and all object replacements."""
    if mode not in (RAW, FILTERED):
        raise ConfigError(f"unknown ranking mode {mode!r}")
    if mode == FILTERED and filter_graph is None:
        raise ConfigError("filtered ranking needs a filter graph")
    r, s, o = triple.relation, triple.subject, triple.object

    scores = all_subject_scores(params, r, o)
    higher = scores > scores[s]
    if mode == FILTERED:
        for e in np.nonzero(higher)[0]:
            if Triple(r, int(e), o) in filter_graph:
                higher[e] = False
    subject_rank = 1 + int(higher.sum())

    scores = all_object_scores(params, r, s)
    higher = scores > scores[o]
    if mode == FILTERED:
        for e in np.nonzero(higher)[0]:
            if Triple(r, s, int(e)) in filter_graph:
                higher[e] = False
    object_rank = 1 + int(higher.sum())
    return RankResult(triple, subject_rank, object_rank, mode)


def rank_graph(
    params, graph: KnowledgeGraph, vocab, filter_graph=None, mode=RAW, workers=1
) -> list[RankResult]:
    """Rank every triple of a graph; parallel over triples when workers > 1."""
    triples = graph.triples
    if workers > 1 and len(triples) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(
                pool.map(
                    lambda t: rank_triple(params, t, vocab, filter_graph, mode),
                    triples,
                )
            )
    return [rank_triple(params, t, vocab, filter_graph, mode) for t in triples]


def metrics(ranks: Iterable[RankResult], ks: Iterable[int]) -> MetricsReport:
    """MRR and Hits@k over the pooled subject and object ranks."""
    pooled = []
    n = 0
    for result in ranks:
        pooled.extend((result.subject_rank, result.object_rank))
        n += 1
    if not pooled:
        raise UndefinedMetricError("metrics need at least one ranked triple")
    pooled = np.array(pooled, dtype=float)
    mrr = float(np.mean(1.0 / pooled))
    hits = {int(k): float(np.mean(pooled <= k)) for k in ks}
    return MetricsReport(mrr=mrr, hits=hits, n_triples=n)


def auc_pr(scored) -> float:
    """Average precision over (score, label) pairs, labels +/-1.

    Items are ranked by descending score with ties kept in input order; the
    result is the mean of precision-at-i over the positions i holding a
    positive.
    """
    items = list(scored)
    n_pos = sum(1 for _, label in items if label > 0)
    if n_pos == 0:
        raise UndefinedMetricError("AUC-PR needs at least one positive item")
    order = sorted(range(len(items)), key=lambda i: -items[i][0])
    ap = 0.0
    true_pos = 0
    for position, idx in enumerate(order, start=1):
        if items[idx][1] > 0:
            true_pos += 1
            ap += true_pos / position
    return ap / n_pos


def partition_test(
    split: DatasetSplit, clauses: Iterable[Clause]
) -> tuple[KnowledgeGraph, KnowledgeGraph]:
    """Split test triples into underivable (I) and derivable (II) parts.

    A test triple is derivable when forward chaining the clauses over
    train + valid produces it. Datasets that ship explicit partitions are
    passed through verbatim.
    """
    if split.test_partitions:
        return split.test_partitions["Test-I"], split.test_partitions["Test-II"]
    premises = KnowledgeGraph([*split.train.triples, *split.valid.triples])
    closure = forward_chain(premises, clauses, split.vocab)
    derived = closure.new_facts.known
    test_one = [t for t in split.test.triples if t not in derived]
    test_two = [t for t in split.test.triples if t in derived]
    return KnowledgeGraph(test_one), KnowledgeGraph(test_two)


def partition_key(name: str) -> str:
    """Metric-key form of a partition name: 'Test-II' -> 'testII'."""
    compact = "".join(ch for ch in name if ch.isalnum())
    return compact[:1].lower() + compact[1:] if compact else name


def format_report(report: MetricsReport, mode: str) -> list[str]:
    """Flat key<TAB>value lines for one report."""
    suffix = f"_{partition_key(report.partition)}" if report.partition else ""
    lines = [f"mrr_{mode}{suffix}\t{report.mrr:.6f}"]
    for k in sorted(report.hits):
        lines.append(f"hits{k}_{mode}{suffix}\t{report.hits[k]:.6f}")
    return lines
