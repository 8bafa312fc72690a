"""Independent verification oracles: finite differences, exhaustive and
grid-search maximum-violation searches.

These deliberately avoid the closed-form expressions and the analytic
gradients they are used to check: gradients come from central differences,
cube maxima from enumerating box vertices (the violation is multilinear in
every coordinate, so its maximum over a box sits at a vertex), and sphere
maxima from dense angular grids in the lowest dimensions.
"""

from __future__ import annotations

import numpy as np

from .scoring import COMPLEX, DISTMULT, score, score_rows


def central_difference(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function of a vector."""
    grad = np.zeros_like(x, dtype=float)
    for i in range(x.size):
        shift = np.zeros_like(x, dtype=float)
        shift.flat[i] = eps
        grad.flat[i] = (f(x + shift) - f(x - shift)) / (2.0 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max componentwise |a - n| / max(1, |a|, |n|)."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / scale))


def _margin_matrix(model_kind, theta_b, theta_r, swapped, v1, v2):
    """Violation phi_b(h1, h2) - phi_r(h1, h2 | h2, h1) on a candidate grid.

    ``v1`` (n1, W) and ``v2`` (n2, W) are candidate matrices for the two
    bindings; returns the full (n1, n2) margin matrix.
    """
    n1, n2 = len(v1), len(v2)
    body = np.empty((n1, n2))
    head = np.empty((n1, n2))
    for i in range(n1):
        rows1 = np.repeat(v1[i][None, :], n2, axis=0)
        body[i] = score_rows(model_kind, theta_b[None, :], rows1, v2)
        if swapped:
            head[i] = score_rows(model_kind, theta_r[None, :], v2, rows1)
        else:
            head[i] = score_rows(model_kind, theta_r[None, :], rows1, v2)
    return body - head


def cube_vertex_max_violation(model_kind, theta_b, theta_r, swapped) -> float:
    """Exact cube maximum by exhausting both bindings over {0, 1}^W."""
    width = len(theta_b)
    vertices = np.array(
        [[(i >> bit) & 1 for bit in range(width)] for i in range(2**width)],
        dtype=float,
    )
    margin = _margin_matrix(model_kind, theta_b, theta_r, swapped, vertices, vertices)
    return max(0.0, float(margin.max()))


def sphere_grid_max_violation(
    model_kind, theta_b, theta_r, swapped, n_grid: int = 10_000
) -> float:
    """Dense angular grid search on the sphere.

    Supports the exhaustively gridable low dimensions: k = 2 for DistMult
    (each binding is a point on the circle) and k = 1 for ComplEx (one
    complex component of unit modulus). Grid spacing bounds the error at
    roughly pi * max|delta| / n_grid.
    """
    angles = np.linspace(0.0, 2.0 * np.pi, n_grid, endpoint=False)
    if model_kind == DISTMULT:
        if len(theta_b) != 2:
            raise ValueError("sphere grid oracle supports k=2 for distmult")
    elif model_kind == COMPLEX:
        if len(theta_b) != 2:
            raise ValueError("sphere grid oracle supports k=1 for complex")
    else:
        raise ValueError(f"unknown model kind {model_kind!r}")
    candidates = np.column_stack([np.cos(angles), np.sin(angles)])
    best = -np.inf
    chunk = 500
    for start in range(0, n_grid, chunk):
        block = candidates[start : start + chunk]
        margin = _margin_matrix(
            model_kind, theta_b, theta_r, swapped, block, candidates
        )
        best = max(best, float(margin.max()))
    return max(0.0, best)


def cube_component_grid_max_violation(
    theta_b, theta_r, swapped, step: float = 0.05
) -> float:
    """ComplEx cube maximum by dense per-component grid search.

    The violation decomposes into one term per complex component, each
    depending only on that component's four stored coordinates, so the box
    maximum is the sum of per-component grid maxima over [0, 1]^4.
    """
    k = len(theta_b) // 2
    grid = np.arange(0.0, 1.0 + step / 2, step)
    a, b, c, d = np.meshgrid(grid, grid, grid, grid, indexing="ij")
    total = 0.0
    for i in range(k):
        tbr, tbi = theta_b[i], theta_b[k + i]
        trr, tri = theta_r[i], theta_r[k + i]
        body = tbr * (a * c + b * d) + tbi * (a * d - b * c)
        if swapped:
            head = trr * (c * a + d * b) + tri * (c * b - d * a)
        else:
            head = trr * (a * c + b * d) + tri * (a * d - b * c)
        total += max(0.0, float((body - head).max()))
    return total


def brute_force_best_entity_tuple(clause, params, vocab, tnorm="godel"):
    """Worst grounded offender by direct enumeration of entity tuples.

    Independent of the vectorized grounded loss: walks the cartesian
    product with plain per-triple scoring. Only usable at toy scale.
    """
    from itertools import product as iter_product

    n = params.n_entities
    best_value = -np.inf
    best_ids = None
    for ids in iter_product(range(n), repeat=len(clause.variables)):
        assignment = dict(zip(clause.variables, ids))
        scores = []
        for atom in clause.body:
            theta = params.relation_embeddings[vocab.relation_id(atom.predicate)]
            scores.append(
                score(
                    params.model_kind,
                    theta,
                    params.entity_embeddings[assignment[atom.arg1]],
                    params.entity_embeddings[assignment[atom.arg2]],
                )
            )
        body = min(scores) if tnorm == "godel" else float(np.prod(scores))
        head_atom = clause.head
        theta = params.relation_embeddings[vocab.relation_id(head_atom.predicate)]
        head = score(
            params.model_kind,
            theta,
            params.entity_embeddings[assignment[head_atom.arg1]],
            params.entity_embeddings[assignment[head_atom.arg2]],
        )
        if body - head > best_value:
            best_value = body - head
            best_ids = ids
    return max(0.0, best_value), best_ids
