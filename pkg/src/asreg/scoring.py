"""DistMult and ComplEx scoring layers, gradients, projections, init.

Complex-valued embeddings are stored as real vectors of length 2k with the
real part in the first half and the imaginary part in the second half, so
that projections, optimizer state and serialization treat both models
uniformly. All arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateProjectionError, DimensionMismatchError
from .graph import Vocabulary

DISTMULT = "distmult"
COMPLEX = "complex"
CUBE = "cube"
SPHERE = "sphere"

MODEL_KINDS = (DISTMULT, COMPLEX)
SUBSPACES = (CUBE, SPHERE)


def vector_width(model_kind: str, k: int) -> int:
    """Stored vector length: k for DistMult, 2k (re + im halves) for ComplEx."""
    if model_kind == DISTMULT:
        return k
    if model_kind == COMPLEX:
        return 2 * k
    raise ConfigError(f"unknown model kind {model_kind!r}")


@dataclass
class ModelParams:
    """Entity and relation embeddings for one model.

    ``entity_embeddings`` has shape (n_entities, W) and ``relation_embeddings``
    shape (n_relations, W), with W = vector_width(model_kind, dim).
    """

    model_kind: str
    dim: int
    entity_embeddings: np.ndarray
    relation_embeddings: np.ndarray

    @property
    def n_entities(self) -> int:
        return self.entity_embeddings.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relation_embeddings.shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.model_kind,
            self.dim,
            self.entity_embeddings.copy(),
            self.relation_embeddings.copy(),
        )


def _check_same_length(*vectors):
    lengths = {v.shape[-1] for v in vectors}
    if len(lengths) != 1:
        raise DimensionMismatchError(f"mismatched vector lengths {sorted(lengths)}")


def _halves(a: np.ndarray):
    k = a.shape[-1] // 2
    return a[..., :k], a[..., k:]


def score_distmult(theta: np.ndarray, h1: np.ndarray, h2: np.ndarray) -> float:
    """Trilinear dot product sum_i theta_i * h1_i * h2_i.

    Computed as theta . (h1 * h2) so swapping h1 and h2 gives the bitwise
    identical result (symmetry holds exactly, not just to rounding).
    """
    _check_same_length(theta, h1, h2)
    return float(np.dot(theta, h1 * h2))


def score_complex(theta: np.ndarray, h1: np.ndarray, h2: np.ndarray) -> float:
    """Real part of the Hermitian trilinear product Re(sum_i theta_i h1_i conj(h2_i)).

    Per component: tR(h1R h2R + h1I h2I) + tI(h1R h2I - h1I h2R).
    """
    _check_same_length(theta, h1, h2)
    if theta.shape[-1] % 2 != 0:
        raise DimensionMismatchError("complex vectors need even stored length")
    tr, ti = _halves(theta)
    ar, ai = _halves(h1)
    br, bi = _halves(h2)
    return float(np.sum(tr * (ar * br + ai * bi) + ti * (ar * bi - ai * br)))


def score(model_kind: str, theta, h1, h2) -> float:
    if model_kind == DISTMULT:
        return score_distmult(theta, h1, h2)
    if model_kind == COMPLEX:
        return score_complex(theta, h1, h2)
    raise ConfigError(f"unknown model kind {model_kind!r}")


def grad_score(model_kind: str, theta, h1, h2):
    """Exact partial derivatives of the score w.r.t. (theta, h1, h2).

    For ComplEx the derivatives are taken w.r.t. the stored real components,
    i.e. real and imaginary parts separately.
    """
    gt, g1, g2 = grad_score_rows(
        model_kind, theta[None, :], h1[None, :], h2[None, :]
    )
    return gt[0], g1[0], g2[0]


def score_rows(model_kind: str, theta, h1, h2) -> np.ndarray:
    """Row-wise scores for batches; inputs broadcast along axis 0."""
    theta, h1, h2 = np.atleast_2d(theta), np.atleast_2d(h1), np.atleast_2d(h2)
    _check_same_length(theta, h1, h2)
    if model_kind == DISTMULT:
        return (theta * (h1 * h2)).sum(axis=-1)
    tr, ti = _halves(theta)
    ar, ai = _halves(h1)
    br, bi = _halves(h2)
    return (tr * (ar * br + ai * bi) + ti * (ar * bi - ai * br)).sum(axis=-1)


def grad_score_rows(model_kind: str, theta, h1, h2):
    """Row-wise analytic gradients; returns (d_theta, d_h1, d_h2) arrays."""
    theta, h1, h2 = np.broadcast_arrays(
        np.atleast_2d(theta), np.atleast_2d(h1), np.atleast_2d(h2)
    )
    if model_kind == DISTMULT:
        return h1 * h2, theta * h2, theta * h1
    tr, ti = _halves(theta)
    ar, ai = _halves(h1)
    br, bi = _halves(h2)
    gt = np.concatenate([ar * br + ai * bi, ar * bi - ai * br], axis=-1)
    g1 = np.concatenate([tr * br + ti * bi, tr * bi - ti * br], axis=-1)
    g2 = np.concatenate([tr * ar - ti * ai, tr * ai + ti * ar], axis=-1)
    return gt, g1, g2


def project(v: np.ndarray, subspace: str) -> np.ndarray:
    """Project one vector onto the unit cube (clamp) or unit sphere (normalize).

    For ComplEx the cube clamps real and imaginary halves independently and
    the sphere norm is taken over the concatenation of both halves.
    """
    if subspace == CUBE:
        return np.clip(v, 0.0, 1.0)
    if subspace == SPHERE:
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise DegenerateProjectionError("cannot project zero vector to the sphere")
        return v / norm
    raise ConfigError(f"unknown subspace {subspace!r}")


def project_rows(matrix: np.ndarray, subspace: str) -> np.ndarray:
    """Row-wise projection of an embedding matrix."""
    if subspace == CUBE:
        return np.clip(matrix, 0.0, 1.0)
    if subspace == SPHERE:
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise DegenerateProjectionError("cannot project zero vector to the sphere")
        return matrix / norms
    raise ConfigError(f"unknown subspace {subspace!r}")


def init_params(
    vocab: Vocabulary,
    model_kind: str,
    k: int,
    subspace: str,
    rng: np.random.Generator,
) -> ModelParams:
    """Uniform Xavier initialization with fan_in = fan_out = k.

    Entity embeddings are projected onto the subspace right away; relation
    embeddings are left unconstrained. Entities are drawn before relations,
    so the layout is reproducible from the seed alone.
    """
    if k < 1:
        raise ConfigError("embedding dimension must be >= 1")
    width = vector_width(model_kind, k)
    bound = np.sqrt(6.0 / (k + k))
    entities = rng.uniform(-bound, bound, size=(vocab.n_entities, width))
    relations = rng.uniform(-bound, bound, size=(vocab.n_relations, width))
    entities = project_rows(entities, subspace)
    return ModelParams(model_kind, k, entities, relations)


def triple_score(params: ModelParams, relation: int, subject: int, obj: int) -> float:
    return score(
        params.model_kind,
        params.relation_embeddings[relation],
        params.entity_embeddings[subject],
        params.entity_embeddings[obj],
    )


def all_subject_scores(params: ModelParams, relation: int, obj: int) -> np.ndarray:
    """Scores phi(relation, e, obj) for every entity e, as one vector."""
    E = params.entity_embeddings
    t = params.relation_embeddings[relation]
    o = E[obj]
    if params.model_kind == DISTMULT:
        return E @ (t * o)
    tr, ti = _halves(t)
    br, bi = _halves(o)
    ER, EI = _halves(E)
    return ER @ (tr * br + ti * bi) + EI @ (tr * bi - ti * br)


def all_object_scores(params: ModelParams, relation: int, subject: int) -> np.ndarray:
    """Scores phi(relation, subject, e) for every entity e, as one vector."""
    E = params.entity_embeddings
    t = params.relation_embeddings[relation]
    s = E[subject]
    if params.model_kind == DISTMULT:
        return E @ (t * s)
    tr, ti = _halves(t)
    ar, ai = _halves(s)
    ER, EI = _halves(E)
    return ER @ (tr * ar - ti * ai) + EI @ (tr * ai + ti * ar)


def pairwise_scores(params: ModelParams, relation: int) -> np.ndarray:
    """Matrix M with M[s, o] = phi(relation, s, o) over all entity pairs."""
    E = params.entity_embeddings
    t = params.relation_embeddings[relation]
    if params.model_kind == DISTMULT:
        return (E * t) @ E.T
    tr, ti = _halves(t)
    ER, EI = _halves(E)
    return ER @ (tr * ER + ti * EI).T + EI @ (tr * EI - ti * ER).T
