import numpy as np
import pytest

from asreg.clauses import parse_clause
from asreg.errors import ConfigError
from asreg.graph import DatasetSplit, KnowledgeGraph, Triple, Vocabulary
from asreg.oracles import central_difference, relative_error
from asreg.scoring import COMPLEX, CUBE, DISTMULT, SPHERE, ModelParams, vector_width
from asreg.training import (
    AdaGrad,
    TrainingBatchItem,
    TrainingConfig,
    corrupt,
    fact_loss_and_grads,
    train,
)
from conftest import make_vocab


def test_corrupt_never_returns_original(rng):
    t = Triple(0, 0, 1)
    for _ in range(50):
        c = corrupt(t, 3, rng, "subject")
        assert c.subject in (1, 2) and c.object == 1 and c.relation == 0


def test_corrupt_object_side_keeps_subject(rng):
    t = Triple(2, 0, 1)
    for _ in range(20):
        c = corrupt(t, 4, rng, "object")
        assert c.subject == 0 and c.object != 1


def test_corrupt_deterministic_for_seed():
    t = Triple(0, 2, 3)
    a = [corrupt(t, 9, np.random.default_rng(4), s) for s in ("subject", "object")]
    b = [corrupt(t, 9, np.random.default_rng(4), s) for s in ("subject", "object")]
    assert a == b


def test_corrupt_needs_two_entities(rng):
    with pytest.raises(ConfigError):
        corrupt(Triple(0, 0, 0), 1, rng, "subject")


def _params_for(vocab, kind=DISTMULT, k=4, seed=0):
    rng = np.random.default_rng(seed)
    width = vector_width(kind, k)
    return ModelParams(
        kind,
        k,
        rng.uniform(0, 1, (vocab.n_entities, width)),
        rng.normal(size=(vocab.n_relations, width)),
    )


def test_fact_loss_satisfied_positive_contributes_zero():
    vocab = make_vocab(n_entities=2, relations=("r",))
    params = ModelParams(DISTMULT, 1, np.ones((2, 1)), np.array([[1.5]]))
    # phi = 1.5 = margin + 0.5
    loss, d_ent, d_rel = fact_loss_and_grads(
        [TrainingBatchItem(Triple(0, 0, 1), +1)], params, margin=1.0
    )
    assert loss == 0.0
    assert not d_ent.any() and not d_rel.any()


def test_fact_loss_negative_with_zero_score_contributes_margin():
    vocab = make_vocab(n_entities=2, relations=("r",))
    params = ModelParams(DISTMULT, 1, np.ones((2, 1)), np.array([[0.0]]))
    loss, _, d_rel = fact_loss_and_grads(
        [TrainingBatchItem(Triple(0, 0, 1), -1)], params, margin=2.5
    )
    assert loss == 2.5
    assert d_rel[0, 0] == pytest.approx(1.0)  # d/dtheta [margin + phi] = h1*h2


@pytest.mark.parametrize("kind", [DISTMULT, COMPLEX])
def test_fact_loss_grads_match_finite_differences(kind, rng):
    vocab = make_vocab(n_entities=5, relations=("a", "b", "c"))
    worst = 0.0
    produced = 0
    while produced < 50:
        params = _params_for(vocab, kind, k=4, seed=int(rng.integers(1 << 30)))
        batch = [
            TrainingBatchItem(
                Triple(int(rng.integers(3)), int(rng.integers(5)), int(rng.integers(5))),
                int(rng.choice([-1, 1])),
            )
            for _ in range(8)
        ]
        # keep every item away from its hinge kink
        margins = []
        for item in batch:
            t = item.triple
            theta = params.relation_embeddings[t.relation]
            h1 = params.entity_embeddings[t.subject]
            h2 = params.entity_embeddings[t.object]
            from asreg.scoring import score

            margins.append(1.0 - item.y * score(kind, theta, h1, h2))
        if any(abs(m) < 0.01 for m in margins):
            continue
        produced += 1
        loss, d_ent, d_rel = fact_loss_and_grads(batch, params, margin=1.0)

        def loss_at_entities(flat):
            changed = ModelParams(
                kind, 4, flat.reshape(params.entity_embeddings.shape),
                params.relation_embeddings,
            )
            return fact_loss_and_grads(batch, changed, 1.0)[0]

        def loss_at_relations(flat):
            changed = ModelParams(
                kind, 4, params.entity_embeddings,
                flat.reshape(params.relation_embeddings.shape),
            )
            return fact_loss_and_grads(batch, changed, 1.0)[0]

        num_e = central_difference(loss_at_entities, params.entity_embeddings.ravel())
        num_r = central_difference(loss_at_relations, params.relation_embeddings.ravel())
        worst = max(worst, relative_error(d_ent.ravel(), num_e))
        worst = max(worst, relative_error(d_rel.ravel(), num_r))
    assert worst < 1e-6


def test_adagrad_first_step_magnitude():
    opt = AdaGrad(lr=0.1)
    param = np.array([1.0])
    opt.step("p", param, np.array([1.0]))
    assert param[0] == pytest.approx(0.9, abs=1e-8)


def test_adagrad_zero_gradient_is_noop():
    opt = AdaGrad(lr=0.1)
    param = np.array([1.0, -2.0])
    opt.step("p", param, np.array([0.5, -0.5]))
    snapshot = param.copy()
    acc = opt.accumulators["p"].copy()
    opt.step("p", param, np.zeros(2))
    assert np.array_equal(param, snapshot)
    assert np.array_equal(opt.accumulators["p"], acc)


def test_adagrad_steps_shrink_and_accumulators_grow():
    opt = AdaGrad(lr=0.1)
    param = np.array([0.0])
    deltas = []
    last_acc = 0.0
    for _ in range(5):
        before = param[0]
        opt.step("p", param, np.array([2.0]))
        deltas.append(abs(param[0] - before))
        acc = opt.accumulators["p"][0]
        assert acc >= last_acc
        last_acc = acc
    assert all(a > b for a, b in zip(deltas, deltas[1:]))


def _toy_split(n_entities=8, n_relations=3, n_facts=20, seed=0):
    rng = np.random.default_rng(seed)
    vocab = Vocabulary()
    for i in range(n_entities):
        vocab.add_entity(f"e{i}")
    for j in range(n_relations):
        vocab.add_relation(f"r{j}")
    triples = [
        Triple(int(rng.integers(n_relations)), int(rng.integers(n_entities)),
               int(rng.integers(n_entities)))
        for _ in range(n_facts)
    ]
    vocab.freeze()
    return DatasetSplit(vocab, KnowledgeGraph(triples))


SMALL = dict(dim=4, tau=5, tau_d=3, tau_a=2, lr=0.1, lr_a=0.5, seed=11)


def test_train_deterministic_given_seed():
    split = _toy_split()
    clauses = [parse_clause("r0(X1,X2) => r1(X1,X2)")]
    cfg = TrainingConfig(alpha=1.0, **SMALL)
    a = train(split, clauses, cfg)
    b = train(split, clauses, cfg)
    assert np.array_equal(a.entity_embeddings, b.entity_embeddings)
    assert np.array_equal(a.relation_embeddings, b.relation_embeddings)


def test_train_alpha_zero_bitwise_ignores_clauses():
    split = _toy_split()
    clauses = [parse_clause("r0(X1,X2) => r1(X1,X2)"),
               parse_clause("r2(X1,X2) => r2(X2,X1)")]
    cfg = TrainingConfig(alpha=0.0, **SMALL)
    with_clauses = train(split, clauses, cfg)
    without = train(split, [], cfg)
    assert np.array_equal(with_clauses.entity_embeddings, without.entity_embeddings)
    assert np.array_equal(with_clauses.relation_embeddings, without.relation_embeddings)


@pytest.mark.parametrize("subspace", [CUBE, SPHERE])
def test_train_final_entities_in_subspace(subspace):
    split = _toy_split()
    cfg = TrainingConfig(alpha=1.0, subspace=subspace, model_kind=COMPLEX, **SMALL)
    params = train(split, [parse_clause("r0(X1,X2) => r0(X2,X1)")], cfg)
    if subspace == CUBE:
        assert params.entity_embeddings.min() >= 0.0
        assert params.entity_embeddings.max() <= 1.0
    else:
        norms = np.linalg.norm(params.entity_embeddings, axis=1)
        assert np.allclose(norms, 1.0, atol=1e-12)


def test_train_unknown_clause_predicate_is_config_error():
    split = _toy_split()
    with pytest.raises(ConfigError, match="ghost"):
        train(split, [parse_clause("ghost(X1,X2) => r0(X1,X2)")], TrainingConfig(**SMALL))


def test_train_empty_graph_is_config_error():
    vocab = make_vocab()
    vocab.freeze()
    split = DatasetSplit(vocab, KnowledgeGraph([]))
    with pytest.raises(ConfigError, match="empty"):
        train(split, [], TrainingConfig(**SMALL))


def test_closed_form_flag_skips_inner_loop_but_trains():
    split = _toy_split()
    clauses = [parse_clause("r0(X1,X2) => r1(X1,X2)")]
    cfg = TrainingConfig(alpha=1.0, closed_form=True, **SMALL)
    params = train(split, clauses, cfg)
    assert np.isfinite(params.relation_embeddings).all()


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainingConfig(alpha=-1.0).validate()
    with pytest.raises(ConfigError):
        TrainingConfig(margin=0.0).validate()
    with pytest.raises(ConfigError):
        TrainingConfig(tau=0).validate()
    with pytest.raises(ConfigError):
        TrainingConfig(subspace="torus").validate()
    with pytest.raises(ConfigError):
        TrainingConfig(tnorm="lukasiewicz").validate()
    TrainingConfig().validate()


def test_adagrad_accumulators_monotone_during_training():
    split = _toy_split()
    # run twice with tau=1 vs tau=3: no direct accumulator access from train,
    # so check the documented proxy: loss trajectory stays finite and params
    # change monotonically less is not guaranteed; instead drive AdaGrad
    # directly with recorded gradients
    opt = AdaGrad(lr=0.1)
    param = np.zeros(6)
    rng = np.random.default_rng(3)
    last = np.zeros(6)
    for _ in range(20):
        opt.step("p", param, rng.normal(size=6))
        acc = opt.accumulators["p"]
        assert np.all(acc >= last)
        last = acc.copy()
