"""Line-based text checkpoints for model parameters and vocabulary.

Layout::

    #ASR-CKPT v1
    model_kind=complex
    k=20
    subspace=cube
    n_entities=30
    n_relations=15
    [entities]
    <name> <v1> <v2> ...
    [relations]
    <name> <v1> <v2> ...

Floats are written with 17 significant digits, which round-trips float64
exactly, so save/load reproduces parameters bit for bit. ComplEx rows
interleave real and imaginary parts (re0 im0 re1 im1 ...). Names must not
contain whitespace.
"""

from __future__ import annotations

import numpy as np

from .errors import CheckpointError
from .graph import Vocabulary
from .scoring import COMPLEX, MODEL_KINDS, SUBSPACES, ModelParams, vector_width

MAGIC = "#ASR-CKPT v1"
_HEADER_KEYS = ("model_kind", "k", "subspace", "n_entities", "n_relations")


def _interleave(vec: np.ndarray) -> np.ndarray:
    k = len(vec) // 2
    out = np.empty_like(vec)
    out[0::2] = vec[:k]
    out[1::2] = vec[k:]
    return out


def _deinterleave(vec: np.ndarray) -> np.ndarray:
    return np.concatenate([vec[0::2], vec[1::2]])


def _format_row(name: str, vec: np.ndarray, complex_kind: bool) -> str:
    if complex_kind:
        vec = _interleave(vec)
    return name + " " + " ".join(format(x, ".17g") for x in vec)


def save_checkpoint(params: ModelParams, vocab: Vocabulary, path, subspace: str) -> None:
    for name in (*vocab.entities, *vocab.relations):
        if not name or any(ch.isspace() for ch in name):
            raise CheckpointError(f"name {name!r} cannot be serialized (whitespace)")
    complex_kind = params.model_kind == COMPLEX
    lines = [
        MAGIC,
        f"model_kind={params.model_kind}",
        f"k={params.dim}",
        f"subspace={subspace}",
        f"n_entities={vocab.n_entities}",
        f"n_relations={vocab.n_relations}",
        "[entities]",
    ]
    for i, name in enumerate(vocab.entities):
        lines.append(_format_row(name, params.entity_embeddings[i], complex_kind))
    lines.append("[relations]")
    for i, name in enumerate(vocab.relations):
        lines.append(_format_row(name, params.relation_embeddings[i], complex_kind))
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def _parse_row(line: str, lineno: int, width: int, section: str):
    parts = line.split(" ")
    if len(parts) != width + 1:
        raise CheckpointError(
            f"line {lineno}: {section} row has {len(parts) - 1} values, expected {width}"
        )
    try:
        values = np.array([float(x) for x in parts[1:]], dtype=float)
    except ValueError:
        raise CheckpointError(f"line {lineno}: unparseable number in {section} row") from None
    return parts[0], values


def load_checkpoint(path):
    """Read a checkpoint; returns (params, frozen vocabulary, subspace)."""
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines or lines[0] != MAGIC:
        raise CheckpointError(f"not a checkpoint or unsupported version (want {MAGIC!r})")
    header = {}
    cursor = 1
    while cursor < len(lines) and lines[cursor] != "[entities]":
        line = lines[cursor]
        if "=" not in line:
            raise CheckpointError(f"line {cursor + 1}: malformed header line {line!r}")
        key, _, value = line.partition("=")
        header[key] = value
        cursor += 1
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise CheckpointError(f"header is missing {', '.join(missing)}")
    if cursor >= len(lines):
        raise CheckpointError("truncated file: no [entities] section")
    model_kind = header["model_kind"]
    if model_kind not in MODEL_KINDS:
        raise CheckpointError(f"unknown model_kind {model_kind!r}")
    subspace = header["subspace"]
    if subspace not in SUBSPACES:
        raise CheckpointError(f"unknown subspace {subspace!r}")
    try:
        k = int(header["k"])
        n_entities = int(header["n_entities"])
        n_relations = int(header["n_relations"])
    except ValueError:
        raise CheckpointError("non-integer k or section size in header") from None
    width = vector_width(model_kind, k)
    complex_kind = model_kind == COMPLEX

    vocab = Vocabulary()
    entities = np.empty((n_entities, width))
    cursor += 1
    for i in range(n_entities):
        lineno = cursor + i
        if lineno >= len(lines):
            raise CheckpointError(
                f"entities section truncated: {i} of {n_entities} rows present"
            )
        name, values = _parse_row(lines[lineno], lineno + 1, width, "entities")
        vocab.add_entity(name)
        entities[i] = _deinterleave(values) if complex_kind else values
    cursor += n_entities
    if cursor >= len(lines) or lines[cursor] != "[relations]":
        raise CheckpointError("missing [relations] section")
    cursor += 1
    relations = np.empty((n_relations, width))
    for i in range(n_relations):
        lineno = cursor + i
        if lineno >= len(lines):
            raise CheckpointError(
                f"relations section truncated: {i} of {n_relations} rows present"
            )
        name, values = _parse_row(lines[lineno], lineno + 1, width, "relations")
        vocab.add_relation(name)
        relations[i] = _deinterleave(values) if complex_kind else values
    cursor += n_relations
    if any(line.strip() for line in lines[cursor:]):
        raise CheckpointError(f"unexpected trailing content at line {cursor + 1}")
    if vocab.n_entities != n_entities or vocab.n_relations != n_relations:
        raise CheckpointError("duplicate names in checkpoint sections")
    vocab.freeze()
    return ModelParams(model_kind, k, entities, relations), vocab, subspace
