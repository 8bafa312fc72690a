"""Fact loss, negative sampling, AdaGrad and the alternating training loop.

One outer epoch first lets the adversary of each clause search for maximally
violating bindings (skipped entirely for clauses with a closed-form maximum
when closed-form mode is on), then runs a fixed number of discriminator
iterations that minimize fact loss plus alpha times the clause violations.

Randomness is consumed in a fixed order (init, then per epoch: adversary
seeds in clause order, then per discriminator iteration: batch shuffle,
subject corruptions, object corruptions), so runs are reproducible from the
seed alone regardless of the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .adversary import (
    CLOSED_FORM_TEMPLATES,
    GODEL,
    TNORMS,
    closed_form_max_violation,
    find_adversarial_set,
    inconsistency_grads,
)
from .clauses import classify_template
from .errors import ConfigError
from .graph import DatasetSplit, Triple
from .scoring import (
    CUBE,
    DISTMULT,
    MODEL_KINDS,
    SUBSPACES,
    ModelParams,
    grad_score_rows,
    init_params,
    project_rows,
    score_rows,
)

LARGE_BATCH = 4096


def worker_count() -> int:
    """Worker cap from ASR_THREADS; defaults to 1 for bitwise determinism."""
    try:
        return max(1, int(os.environ.get("ASR_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class TrainingConfig:
    dim: int = 20
    margin: float = 1.0
    alpha: float = 1.0
    tau: int = 100
    tau_a: int = 1
    tau_d: int = 10
    lr: float = 0.1
    # single ascent steps must be able to reach violating regions of the
    # subspace from any entity start, so the default is on the scale of the
    # subspace diameter rather than of the discriminator rate
    lr_a: float = 2.0
    subspace: str = CUBE
    model_kind: str = DISTMULT
    tnorm: str = GODEL
    negatives_per_positive: int = 1
    closed_form: bool = False
    seed: int = 0
    restarts_a: int = 1
    batch_size: int | None = None

    def validate(self) -> "TrainingConfig":
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.margin <= 0:
            raise ConfigError("margin must be > 0")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if min(self.tau, self.tau_a, self.tau_d) < 1:
            raise ConfigError("tau, tau_a and tau_d must all be >= 1")
        if self.lr <= 0 or self.lr_a <= 0:
            raise ConfigError("learning rates must be > 0")
        if self.subspace not in SUBSPACES:
            raise ConfigError(f"unknown subspace {self.subspace!r}")
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.model_kind!r}")
        if self.tnorm not in TNORMS:
            raise ConfigError(f"unknown t-norm {self.tnorm!r}")
        if self.negatives_per_positive < 0:
            raise ConfigError("negatives_per_positive must be >= 0")
        if self.restarts_a < 1:
            raise ConfigError("restarts_a must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        return self


class AdaGrad:
    """Per-component AdaGrad with one accumulator matrix per parameter group."""

    EPS = 1e-8

    def __init__(self, lr: float):
        self.lr = lr
        self.accumulators: dict[str, np.ndarray] = {}

    def step(self, name: str, param: np.ndarray, grad: np.ndarray) -> None:
        acc = self.accumulators.get(name)
        if acc is None:
            acc = self.accumulators[name] = np.zeros_like(param)
        acc += grad * grad
        param -= self.lr * grad / (np.sqrt(acc) + self.EPS)


class TrainingBatchItem(NamedTuple):
    triple: Triple
    y: int


def corrupt(triple: Triple, n_entities: int, rng: np.random.Generator, side: str) -> Triple:
    """Replace one side with a uniformly random entity different from it."""
    if n_entities < 2:
        raise ConfigError("cannot corrupt with fewer than 2 entities")
    if side == "subject":
        original = triple.subject
    elif side == "object":
        original = triple.object
    else:
        raise ConfigError(f"unknown corruption side {side!r}")
    drawn = int(rng.integers(0, n_entities - 1))
    if drawn >= original:
        drawn += 1
    if side == "subject":
        return Triple(triple.relation, drawn, triple.object)
    return Triple(triple.relation, triple.subject, drawn)


def _fact_loss_and_grads_arrays(rel, subj, obj, y, params, margin):
    """Vectorized hinge fact loss sum([margin - y*phi]_+) with dense gradients."""
    theta = params.relation_embeddings[rel]
    h1 = params.entity_embeddings[subj]
    h2 = params.entity_embeddings[obj]
    phi = score_rows(params.model_kind, theta, h1, h2)
    slack = margin - y * phi
    active = slack > 0.0
    loss = float(slack[active].sum())
    d_ent = np.zeros_like(params.entity_embeddings)
    d_rel = np.zeros_like(params.relation_embeddings)
    if active.any():
        coeff = (-y[active]).astype(float)[:, None]
        gt, g1, g2 = grad_score_rows(
            params.model_kind, theta[active], h1[active], h2[active]
        )
        np.add.at(d_rel, rel[active], coeff * gt)
        np.add.at(d_ent, subj[active], coeff * g1)
        np.add.at(d_ent, obj[active], coeff * g2)
    return loss, d_ent, d_rel


def fact_loss_and_grads(batch, params: ModelParams, margin: float):
    """Fact loss and exact subgradients for a list of labeled triples.

    Returns (loss, d_entities, d_relations) with dense gradient matrices
    shaped like the corresponding parameter matrices.
    """
    if not batch:
        raise ConfigError("batch must be nonempty")
    rel = np.array([item.triple.relation for item in batch], dtype=np.int64)
    subj = np.array([item.triple.subject for item in batch], dtype=np.int64)
    obj = np.array([item.triple.object for item in batch], dtype=np.int64)
    y = np.array([item.y for item in batch], dtype=np.int64)
    return _fact_loss_and_grads_arrays(rel, subj, obj, y, params, margin)


def _corrupt_column(rng, column, n_entities):
    raw = rng.integers(0, n_entities - 1, size=len(column))
    return raw + (raw >= column)


class _BatchSampler:
    """Per-iteration batches: a full shuffled pass at small scale, else
    successive shuffled chunks."""

    def __init__(self, positives: np.ndarray, batch_size: int, rng):
        self.positives = positives
        self.batch_size = batch_size
        self.rng = rng
        self._order = None
        self._cursor = 0

    def next(self) -> np.ndarray:
        n = len(self.positives)
        if self.batch_size >= n:
            return self.positives[self.rng.permutation(n)]
        if self._order is None or self._cursor >= n:
            self._order = self.rng.permutation(n)
            self._cursor = 0
        sel = self._order[self._cursor : self._cursor + self.batch_size]
        self._cursor += self.batch_size
        return self.positives[sel]


def _build_batch(chosen, n_entities, negatives_per_positive, rng):
    rel = [chosen[:, 0]]
    subj = [chosen[:, 1]]
    obj = [chosen[:, 2]]
    y = [np.ones(len(chosen), dtype=np.int64)]
    for _ in range(negatives_per_positive):
        rel.append(chosen[:, 0])
        subj.append(_corrupt_column(rng, chosen[:, 1], n_entities))
        obj.append(chosen[:, 2])
        y.append(np.full(len(chosen), -1, dtype=np.int64))
    for _ in range(negatives_per_positive):
        rel.append(chosen[:, 0])
        subj.append(chosen[:, 1])
        obj.append(_corrupt_column(rng, chosen[:, 2], n_entities))
        y.append(np.full(len(chosen), -1, dtype=np.int64))
    return (
        np.concatenate(rel),
        np.concatenate(subj),
        np.concatenate(obj),
        np.concatenate(y),
    )


def train(
    split: DatasetSplit,
    clauses,
    config: TrainingConfig,
    rng: np.random.Generator | None = None,
    on_epoch=None,
) -> ModelParams:
    """Run the full minimax loop and return the trained parameters.

    ``on_epoch(epoch, fact_loss, clause_loss)``, when given, receives the
    losses of the last discriminator iteration of each epoch.
    """
    config.validate()
    vocab = split.vocab
    if len(split.train) == 0:
        raise ConfigError("training graph is empty")
    clauses = list(clauses)
    for clause in clauses:
        for atom in (*clause.body, clause.head):
            if atom.predicate not in vocab.relation_index:
                raise ConfigError(
                    f"clause predicate {atom.predicate!r} not in the vocabulary"
                )
    if config.negatives_per_positive > 0 and vocab.n_entities < 2:
        raise ConfigError("negative sampling needs at least 2 entities")
    if rng is None:
        rng = np.random.default_rng(config.seed)

    params = init_params(vocab, config.model_kind, config.dim, config.subspace, rng)
    optimizer = AdaGrad(config.lr)
    positives = np.array(
        [[t.relation, t.subject, t.object] for t in split.train.triples],
        dtype=np.int64,
    )
    n_pos = len(positives)
    batch_size = config.batch_size or (n_pos if n_pos <= LARGE_BATCH else LARGE_BATCH)
    sampler = _BatchSampler(positives, batch_size, rng)

    use_clauses = config.alpha > 0.0 and bool(clauses)
    plans = []
    if use_clauses:
        for clause in clauses:
            closed = (
                config.closed_form
                and classify_template(clause) in CLOSED_FORM_TEMPLATES
            )
            plans.append((clause, closed))
    iterative = [i for i, (_, closed) in enumerate(plans) if not closed]
    workers = worker_count()

    fact_loss = clause_loss = 0.0
    for epoch in range(config.tau):
        adversaries: list = [None] * len(plans)
        if iterative:
            child_seeds = rng.integers(0, 2**63, size=len(iterative))
            jobs = [
                (plans[i][0], np.random.default_rng(int(s)))
                for i, s in zip(iterative, child_seeds)
            ]

            def _search(job):
                clause, clause_rng = job
                return find_adversarial_set(
                    clause,
                    params,
                    vocab,
                    config.subspace,
                    config.tau_a,
                    config.lr_a,
                    clause_rng,
                    restarts=config.restarts_a,
                    tnorm=config.tnorm,
                )

            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(_search, jobs))
            else:
                results = [_search(job) for job in jobs]
            for i, adv in zip(iterative, results):
                adversaries[i] = adv

        for _ in range(config.tau_d):
            params.entity_embeddings = project_rows(
                params.entity_embeddings, config.subspace
            )
            chosen = sampler.next()
            rel, subj, obj, y = _build_batch(
                chosen, vocab.n_entities, config.negatives_per_positive, rng
            )
            fact_loss, d_ent, d_rel = _fact_loss_and_grads_arrays(
                rel, subj, obj, y, params, config.margin
            )
            clause_loss = 0.0
            for (clause, closed), adv in zip(plans, adversaries):
                if closed:
                    value, rel_grads = closed_form_max_violation(
                        clause, params, vocab, config.subspace
                    )
                else:
                    value, _, rel_grads = inconsistency_grads(
                        clause, adv, params, vocab, config.tnorm
                    )
                clause_loss += value
                for rid, grad in rel_grads.items():
                    d_rel[rid] += config.alpha * grad
            optimizer.step("entities", params.entity_embeddings, d_ent)
            optimizer.step("relations", params.relation_embeddings, d_rel)
        if on_epoch is not None:
            on_epoch(epoch, fact_loss, clause_loss)

    params.entity_embeddings = project_rows(params.entity_embeddings, config.subspace)
    return params
