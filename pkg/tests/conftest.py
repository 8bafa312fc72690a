import numpy as np
import pytest

from asreg.graph import Vocabulary
from asreg.scoring import ModelParams, project_rows, vector_width, SPHERE


def make_vocab(n_entities=4, relations=("b", "r")):
    vocab = Vocabulary()
    for i in range(n_entities):
        vocab.add_entity(f"e{i}")
    for name in relations:
        vocab.add_relation(name)
    return vocab


def random_params(model_kind, k, rng, n_entities=4, n_relations=2, subspace=None):
    """Relation vectors ~ N(0,1); entities uniform in the cube, optionally
    projected onto a subspace."""
    width = vector_width(model_kind, k)
    entities = rng.uniform(0.0, 1.0, size=(n_entities, width))
    if subspace == SPHERE:
        entities = project_rows(rng.normal(size=(n_entities, width)), SPHERE)
    relations = rng.normal(size=(n_relations, width))
    return ModelParams(model_kind, k, entities, relations)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
