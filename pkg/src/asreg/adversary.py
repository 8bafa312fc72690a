"""Adversarial variable bindings and clause inconsistency losses.

A clause body => head is violated on a set of inputs when the body scores
higher than the head; the inconsistency loss is the hinge
``max(0, phi(body) - phi(head))``. The adversary searches the embedding
subspace for bindings that maximize it; for three clause shapes the maximum
has a closed form in the relation embeddings alone.

Subgradient conventions (fixed for reproducibility): the hinge contributes
zero gradient when body - head <= 0; the Goedel minimum routes its gradient
to the first body atom attaining the minimum; componentwise max/abs kinks
inside the closed forms contribute zero where the component's contribution
is zero, and ties route to the first argument.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .clauses import Clause, ClauseTemplate, classify_template
from .errors import (
    BudgetExceededError,
    ConfigError,
    TemplateUnsupportedError,
    UnknownSymbolError,
)
from .graph import Vocabulary
from .scoring import (
    COMPLEX,
    DISTMULT,
    SPHERE,
    ModelParams,
    grad_score_rows,
    pairwise_scores,
    project_rows,
    score,
    score_rows,
)

GODEL = "godel"
PRODUCT = "product"
TNORMS = (GODEL, PRODUCT)

CLOSED_FORM_TEMPLATES = frozenset(
    {
        ClauseTemplate.SYMMETRY,
        ClauseTemplate.IMPLICATION,
        ClauseTemplate.INVERSE_IMPLICATION,
    }
)


@dataclass
class AdversarialSet:
    """Mapping from clause variables to free embedding vectors."""

    bindings: dict[str, np.ndarray]

    def vector(self, variable: str) -> np.ndarray:
        try:
            return self.bindings[variable]
        except KeyError:
            raise UnknownSymbolError(f"variable {variable} is not bound") from None


def atom_score(atom, adv: AdversarialSet, params: ModelParams, vocab: Vocabulary) -> float:
    """Score one atom on the adversarial bindings via the model's scorer."""
    theta = params.relation_embeddings[vocab.relation_id(atom.predicate)]
    return score(params.model_kind, theta, adv.vector(atom.arg1), adv.vector(atom.arg2))


def body_score(body, adv, params, vocab, tnorm: str = GODEL) -> float:
    """t-norm aggregate of the body atom scores (min for Goedel, product otherwise)."""
    scores = [atom_score(atom, adv, params, vocab) for atom in body]
    if not scores:
        raise ConfigError("clause body must contain at least one atom")
    if tnorm == GODEL:
        return min(scores)
    if tnorm == PRODUCT:
        return float(np.prod(scores))
    raise ConfigError(f"unknown t-norm {tnorm!r}")


def inconsistency_loss(clause, adv, params, vocab, tnorm: str = GODEL) -> float:
    """Hinge violation max(0, phi(body) - phi(head)) at the given bindings."""
    return max(
        0.0,
        body_score(clause.body, adv, params, vocab, tnorm)
        - atom_score(clause.head, adv, params, vocab),
    )


def _margin_and_grads_rows(clause, thetas, bindings, model_kind, tnorm, want_rel_grads=False):
    """Raw margin phi(body) - phi(head) and its gradients, row-wise.

    ``bindings`` maps each clause variable to a (rows, W) array; ``thetas``
    is the list of relation vectors for the body atoms followed by the head.
    Returns (margin, var_grads, rel_grads); rel_grads is a list of per-atom
    (rows, W) arrays (body order then head) or None.
    """
    n_body = len(clause.body)
    body_scores = []
    for i, atom in enumerate(clause.body):
        body_scores.append(
            score_rows(model_kind, thetas[i], bindings[atom.arg1], bindings[atom.arg2])
        )
    body_scores = np.stack(body_scores, axis=0)
    head = clause.head
    head_score = score_rows(
        model_kind, thetas[n_body], bindings[head.arg1], bindings[head.arg2]
    )

    if tnorm == GODEL:
        agg = body_scores.min(axis=0)
        winner = body_scores.argmin(axis=0)
        coeffs = [(winner == i).astype(float) for i in range(n_body)]
    elif tnorm == PRODUCT:
        agg = body_scores.prod(axis=0)
        coeffs = []
        for i in range(n_body):
            others = np.delete(body_scores, i, axis=0)
            coeffs.append(others.prod(axis=0) if len(others) else np.ones_like(agg))
    else:
        raise ConfigError(f"unknown t-norm {tnorm!r}")

    margin = agg - head_score
    rows = margin.shape[0]
    var_grads = {
        v: np.zeros((rows, thetas[0].shape[-1])) for v in clause.variables
    }
    rel_grads = [] if want_rel_grads else None
    for i, atom in enumerate(clause.body):
        gt, g1, g2 = grad_score_rows(
            model_kind, thetas[i], bindings[atom.arg1], bindings[atom.arg2]
        )
        c = coeffs[i][:, None]
        var_grads[atom.arg1] += c * g1
        var_grads[atom.arg2] += c * g2
        if want_rel_grads:
            rel_grads.append(c * gt)
    gt, g1, g2 = grad_score_rows(
        model_kind, thetas[n_body], bindings[head.arg1], bindings[head.arg2]
    )
    var_grads[head.arg1] -= g1
    var_grads[head.arg2] -= g2
    if want_rel_grads:
        rel_grads.append(-gt)
    return margin, var_grads, rel_grads


def _clause_thetas(clause, params, vocab):
    ids = [vocab.relation_id(a.predicate) for a in clause.body]
    ids.append(vocab.relation_id(clause.head.predicate))
    return ids, [params.relation_embeddings[i][None, :] for i in ids]


def inconsistency_grads(clause, adv, params, vocab, tnorm: str = GODEL):
    """Loss plus subgradients w.r.t. the bindings and the relation embeddings.

    Returns (loss, var_grads, rel_grads) where var_grads maps variable name
    to a vector and rel_grads maps relation id to a vector. All gradients
    are zero in the flat hinge region (body - head <= 0).
    """
    ids, thetas = _clause_thetas(clause, params, vocab)
    bindings = {v: adv.vector(v)[None, :] for v in clause.variables}
    margin, var_grads, atom_rel_grads = _margin_and_grads_rows(
        clause, thetas, bindings, params.model_kind, tnorm, want_rel_grads=True
    )
    loss = max(0.0, float(margin[0]))
    width = params.relation_embeddings.shape[1]
    if loss == 0.0:
        return (
            0.0,
            {v: np.zeros(width) for v in clause.variables},
            {i: np.zeros(width) for i in set(ids)},
        )
    rel_grads: dict[int, np.ndarray] = {}
    for rid, g in zip(ids, atom_rel_grads):
        if rid in rel_grads:
            rel_grads[rid] = rel_grads[rid] + g[0]
        else:
            rel_grads[rid] = g[0].copy()
    return loss, {v: g[0] for v, g in var_grads.items()}, rel_grads


def find_adversarial_set(
    clause: Clause,
    params: ModelParams,
    vocab: Vocabulary,
    subspace: str,
    tau_a: int,
    lr_a: float,
    rng: np.random.Generator,
    restarts: int = 1,
    tnorm: str = GODEL,
    init: AdversarialSet | None = None,
) -> AdversarialSet:
    """Projected gradient ascent on the clause violation.

    Each restart initializes every binding to a uniformly random entity
    embedding, then runs ``tau_a`` steps of: project bindings onto the
    subspace, evaluate the violation gradient, take a fixed step ``lr_a``.
    In the flat hinge region the ascent follows the raw body - head margin,
    so restarts that start on the satisfied side still make progress; this
    never decreases the hinge loss. Restarts run as one batched ascent and
    the binding with the highest final loss wins (first on ties). ``init``
    adds one extra starting point ahead of the random restarts. The returned
    set is projected onto the subspace.
    """
    if tau_a < 1:
        raise ConfigError("tau_a must be >= 1")
    if restarts < 1:
        raise ConfigError("restarts must be >= 1")
    variables = clause.variables
    entity_rows = rng.integers(0, params.n_entities, size=(restarts, len(variables)))
    ids, thetas = _clause_thetas(clause, params, vocab)
    bindings = {}
    for j, v in enumerate(variables):
        rows = params.entity_embeddings[entity_rows[:, j]].astype(float)
        if init is not None:
            rows = np.vstack([np.asarray(init.vector(v), dtype=float)[None, :], rows])
        bindings[v] = rows.copy()

    for _ in range(tau_a):
        for v in variables:
            bindings[v] = project_rows(bindings[v], subspace)
        _, var_grads, _ = _margin_and_grads_rows(
            clause, thetas, bindings, params.model_kind, tnorm
        )
        for v in variables:
            bindings[v] = bindings[v] + lr_a * var_grads[v]
    for v in variables:
        bindings[v] = project_rows(bindings[v], subspace)
    margin, _, _ = _margin_and_grads_rows(
        clause, thetas, bindings, params.model_kind, tnorm
    )
    best = int(np.argmax(np.maximum(0.0, margin)))
    return AdversarialSet({v: bindings[v][best].copy() for v in variables})


def closed_form_max_violation(clause, params, vocab, subspace):
    """Analytic maximum of the clause violation over the subspace.

    Supports symmetry, implication and swapped-argument implication clauses;
    anything else raises TemplateUnsupportedError so callers can fall back
    to the iterative adversary. Returns (value, rel_grads) where rel_grads
    maps relation id to the subgradient of the value w.r.t. that relation's
    embedding.

    Writing d = theta_body - theta_head (with the imaginary half of
    theta_head conjugated when the head arguments are swapped), the maxima
    are: DistMult sphere max_i |d_i|, DistMult cube sum_i max(0, d_i),
    ComplEx sphere max_i sqrt(dR_i^2 + dI_i^2), ComplEx cube
    sum_i max(0, dR_i) + max(dR_i, |dI_i|).
    """
    template = classify_template(clause)
    if template not in CLOSED_FORM_TEMPLATES:
        raise TemplateUnsupportedError(
            f"no closed form for {template.value} clauses"
        )
    b_id = vocab.relation_id(clause.body[0].predicate)
    r_id = vocab.relation_id(clause.head.predicate)
    tb = params.relation_embeddings[b_id]
    tr = params.relation_embeddings[r_id]
    swapped = template is not ClauseTemplate.IMPLICATION

    if params.model_kind == DISTMULT:
        d = tb - tr
        if subspace == SPHERE:
            j = int(np.argmax(np.abs(d)))
            value = float(abs(d[j]))
            gb = np.zeros_like(d)
            if value > 0.0:
                gb[j] = np.sign(d[j])
        else:
            value = float(np.maximum(0.0, d).sum())
            gb = (d > 0.0).astype(float)
        gr = -gb
    elif params.model_kind == COMPLEX:
        k = params.dim
        dR = tb[:k] - tr[:k]
        dI = tb[k:] + tr[k:] if swapped else tb[k:] - tr[k:]
        if subspace == SPHERE:
            moduli = np.hypot(dR, dI)
            j = int(np.argmax(moduli))
            value = float(moduli[j])
            gR = np.zeros(k)
            gI = np.zeros(k)
            if value > 0.0:
                gR[j] = dR[j] / value
                gI[j] = dI[j] / value
        else:
            contrib = np.maximum(0.0, dR) + np.maximum(dR, np.abs(dI))
            value = float(contrib.sum())
            pos = contrib > 0.0
            gR = np.where(
                pos, (dR > 0.0).astype(float) + (dR >= np.abs(dI)).astype(float), 0.0
            )
            gI = np.where(pos & (np.abs(dI) > dR), np.sign(dI), 0.0)
        gb = np.concatenate([gR, gI])
        gr = np.concatenate([-gR, gI if swapped else -gI])
    else:
        raise ConfigError(f"unknown model kind {params.model_kind!r}")

    value = max(0.0, value)
    rel_grads: dict[int, np.ndarray] = {}
    for rid, g in ((b_id, gb), (r_id, gr)):
        if rid in rel_grads:
            rel_grads[rid] = rel_grads[rid] + g
        else:
            rel_grads[rid] = np.array(g, dtype=float)
    return value, rel_grads


class GroundedLoss(NamedTuple):
    total: float
    worst: float
    worst_ids: tuple[int, ...]


def grounded_inconsistency_loss(
    clause,
    params: ModelParams,
    vocab: Vocabulary,
    tnorm: str = GODEL,
    budget: int = 10**6,
) -> GroundedLoss:
    """Exhaustive hinge loss over every assignment of entities to variables.

    Sums max(0, body - head) over all |E|^n tuples and also reports the
    single worst offender (value and entity ids, in clause variable order).
    Refuses with BudgetExceededError when |E|^n exceeds ``budget``.
    """
    n_vars = len(clause.variables)
    n_entities = params.n_entities
    count = n_entities**n_vars
    if count > budget:
        raise BudgetExceededError(count, budget)
    axis_of = {v: i for i, v in enumerate(clause.variables)}
    matrices: dict[int, np.ndarray] = {}

    def atom_array(atom):
        rid = vocab.relation_id(atom.predicate)
        if rid not in matrices:
            matrices[rid] = pairwise_scores(params, rid)
        shape1 = [1] * n_vars
        shape1[axis_of[atom.arg1]] = n_entities
        shape2 = [1] * n_vars
        shape2[axis_of[atom.arg2]] = n_entities
        idx1 = np.arange(n_entities).reshape(shape1)
        idx2 = np.arange(n_entities).reshape(shape2)
        return matrices[rid][idx1, idx2]

    body = atom_array(clause.body[0])
    for atom in clause.body[1:]:
        nxt = atom_array(atom)
        if tnorm == GODEL:
            body = np.minimum(body, nxt)
        elif tnorm == PRODUCT:
            body = body * nxt
        else:
            raise ConfigError(f"unknown t-norm {tnorm!r}")
    margin = np.broadcast_to(
        body - atom_array(clause.head), (n_entities,) * n_vars
    )
    total = float(np.maximum(0.0, margin).sum())
    flat = int(np.argmax(margin))
    worst_ids = tuple(int(i) for i in np.unravel_index(flat, margin.shape))
    worst = max(0.0, float(margin.flat[flat]))
    return GroundedLoss(total, worst, worst_ids)


def offender_bindings(clause, params, worst_ids) -> AdversarialSet:
    """Bindings at the entity embeddings of a grounded worst offender."""
    return AdversarialSet(
        {
            v: params.entity_embeddings[worst_ids[i]].copy()
            for i, v in enumerate(clause.variables)
        }
    )
