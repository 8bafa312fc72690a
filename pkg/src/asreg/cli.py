"""Command-line entry points: train, eval, synth, check.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error. All
commands are deterministic given --seed; artifacts carry no timestamps, so
reruns produce byte-identical files. ASR_THREADS caps internal worker
threads (default 1).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import adversary, oracles
from .checkpoint import load_checkpoint, save_checkpoint
from .clauses import Atom, Clause, ClauseTemplate, parse_rules_file
from .errors import AsregError
from .evaluation import (
    FILTERED,
    RAW,
    format_report,
    metrics,
    partition_key,
    partition_test,
    rank_graph,
)
from .graph import (
    DatasetSplit,
    KnowledgeGraph,
    Vocabulary,
    load_triples_file,
    write_triples_file,
)
from .scoring import COMPLEX, CUBE, DISTMULT, SPHERE, ModelParams, vector_width
from .synthetic import SyntheticSpec, generate, run_replicate
from .training import TrainingConfig, train, worker_count


class UsageError(AsregError):
    pass


def _nonnegative_float(text):
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _hits_list(text):
    try:
        ks = [int(part) for part in text.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad hits list {text!r}")
    if not ks or any(k < 1 for k in ks):
        raise argparse.ArgumentTypeError(f"bad hits list {text!r}")
    return ks


def _add_model_flags(sub):
    sub.add_argument("--model", choices=[DISTMULT, COMPLEX], default=DISTMULT)
    sub.add_argument("--subspace", choices=[CUBE, SPHERE], default=CUBE)
    sub.add_argument("--k", type=_positive_int, default=20, help="embedding dimension")


def _add_training_flags(sub):
    _add_model_flags(sub)
    sub.add_argument("--alpha", type=_nonnegative_float, default=1.0)
    sub.add_argument("--margin", type=_positive_float, default=1.0)
    sub.add_argument("--tau", type=_positive_int, default=100)
    sub.add_argument("--tau-d", type=_positive_int, default=10)
    sub.add_argument("--tau-a", type=_positive_int, default=1)
    sub.add_argument("--lr", type=_positive_float, default=0.1)
    sub.add_argument("--lr-a", type=_positive_float, default=2.0)
    sub.add_argument("--tnorm", choices=[adversary.GODEL, adversary.PRODUCT],
                     default=adversary.GODEL)
    sub.add_argument("--negatives", type=int, default=1,
                     help="corruptions per positive per side")
    sub.add_argument("--closed-form", action="store_true",
                     help="use closed-form maximum violations where available")
    sub.add_argument("--restarts-a", type=_positive_int, default=1)
    sub.add_argument("--batch-size", type=_positive_int, default=None)
    sub.add_argument("--seed", type=int, default=0)


def _config_from_args(args) -> TrainingConfig:
    return TrainingConfig(
        dim=args.k,
        margin=args.margin,
        alpha=args.alpha,
        tau=args.tau,
        tau_a=args.tau_a,
        tau_d=args.tau_d,
        lr=args.lr,
        lr_a=args.lr_a,
        subspace=args.subspace,
        model_kind=args.model,
        tnorm=args.tnorm,
        negatives_per_positive=args.negatives,
        closed_form=args.closed_form,
        seed=args.seed,
        restarts_a=args.restarts_a,
        batch_size=args.batch_size,
    ).validate()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asreg",
        description="Train and evaluate clause-regularised link predictors.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p_train = commands.add_parser("train", help="train a model, write a checkpoint")
    p_train.add_argument("--train", required=True, help="training triples (TSV)")
    p_train.add_argument("--valid", help="validation triples, used to complete the vocabulary")
    p_train.add_argument("--test", help="test triples, used to complete the vocabulary")
    p_train.add_argument("--rules", help="clause file")
    p_train.add_argument("--out", required=True, help="checkpoint path")
    _add_training_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = commands.add_parser("eval", help="rank test triples against a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--test", required=True)
    p_eval.add_argument("--filter", nargs="+", default=[],
                        help="known-triple files defining the filtered setting")
    p_eval.add_argument("--rules", help="clause file for test partitioning")
    p_eval.add_argument("--partition", action="store_true",
                        help="report Test-I / Test-II partitions (needs --rules)")
    p_eval.add_argument("--hits", type=_hits_list, default=[3, 5, 10])
    p_eval.add_argument("--out", help="also write the metric lines to this file")
    p_eval.set_defaults(func=cmd_eval)

    p_synth = commands.add_parser("synth", help="generate synthetic instances or replicate runs")
    p_synth.add_argument("--template", required=True,
                         choices=[t.value for t in ClauseTemplate if t is not ClauseTemplate.GENERAL])
    p_synth.add_argument("--entities", type=_positive_int, default=30)
    p_synth.add_argument("--relations", type=_positive_int, default=15)
    p_synth.add_argument("--pair-prob", type=_positive_float, default=0.1)
    p_synth.add_argument("--fact-prob", type=_positive_float, default=0.1)
    p_synth.add_argument("--clauses", type=_positive_int, default=10)
    p_synth.add_argument("--out", help="directory for instance files")
    p_synth.add_argument("--replicate", type=_positive_int,
                         help="train/evaluate this many replicate runs")
    _add_training_flags(p_synth)
    p_synth.set_defaults(func=cmd_synth)

    p_check = commands.add_parser("check", help="run verification oracles")
    p_check.add_argument("what", choices=["gradients", "closed-form", "adversary"])
    p_check.add_argument("--trials", type=_positive_int, default=20)
    p_check.add_argument("--template", default="implication",
                         choices=["symmetry", "implication", "inverse_implication"])
    p_check.add_argument("--restarts", type=_positive_int, default=10)
    _add_model_flags(p_check)
    p_check.add_argument("--tau-a", type=_positive_int, default=1000)
    p_check.add_argument("--lr-a", type=_positive_float, default=0.1)
    p_check.add_argument("--seed", type=int, default=0)
    p_check.set_defaults(func=cmd_check)
    return parser


def cmd_train(args) -> int:
    config = _config_from_args(args)
    vocab = Vocabulary()
    train_graph = KnowledgeGraph(load_triples_file(args.train, vocab))
    valid_graph = KnowledgeGraph(
        load_triples_file(args.valid, vocab) if args.valid else []
    )
    test_graph = KnowledgeGraph(
        load_triples_file(args.test, vocab) if args.test else []
    )
    vocab.freeze()
    clauses = parse_rules_file(args.rules) if args.rules else []
    split = DatasetSplit(vocab, train_graph, valid_graph, test_graph)

    last = {}

    def on_epoch(epoch, fact_loss, clause_loss):
        last.update(epoch=epoch, fact_loss=fact_loss, clause_loss=clause_loss)

    params = train(split, clauses, config, on_epoch=on_epoch)
    save_checkpoint(params, vocab, args.out, config.subspace)
    print(f"fact_loss\t{last['fact_loss']:.6f}")
    print(f"clause_loss\t{last['clause_loss']:.6f}")
    print(f"checkpoint\t{args.out}")
    return 0


def _load_with_vocab(path, vocab):
    return KnowledgeGraph(load_triples_file(path, vocab))


def cmd_eval(args) -> int:
    if args.partition and not args.rules:
        raise UsageError("--partition requires --rules")
    params, vocab, _subspace = load_checkpoint(args.checkpoint)
    test_graph = _load_with_vocab(args.test, vocab)
    filter_triples = []
    for path in args.filter:
        filter_triples.extend(load_triples_file(path, vocab))
    filter_graph = KnowledgeGraph(filter_triples) if args.filter else None
    workers = worker_count()

    scopes: list[tuple[str | None, KnowledgeGraph]] = [(None, test_graph)]
    if args.partition:
        clauses = parse_rules_file(args.rules)
        premises = KnowledgeGraph(
            [t for t in filter_triples if t not in test_graph.known]
        )
        split = DatasetSplit(vocab, premises, KnowledgeGraph(), test_graph)
        test_one, test_two = partition_test(split, clauses)
        scopes.append(("Test-I", test_one))
        scopes.append(("Test-II", test_two))

    lines = []
    for partition, graph in scopes:
        suffix = f"_{partition_key(partition)}" if partition else ""
        lines.append(f"n_triples{suffix}\t{len(graph)}")
        if len(graph) == 0:
            continue
        modes = [RAW] + ([FILTERED] if filter_graph is not None else [])
        for mode in modes:
            ranks = rank_graph(params, graph, vocab, filter_graph, mode, workers)
            report = metrics(ranks, args.hits)
            report.partition = partition
            lines.extend(format_report(report, mode))
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    return 0


def cmd_synth(args) -> int:
    if bool(args.out) == bool(args.replicate):
        raise UsageError("exactly one of --out or --replicate is required")
    spec = SyntheticSpec(
        n_entities=args.entities,
        n_relations=args.relations,
        pair_prob=args.pair_prob,
        fact_prob=args.fact_prob,
        n_clauses_per_type=args.clauses,
        template=ClauseTemplate(args.template),
        seed=args.seed,
    ).validate()
    if args.out:
        import os

        instance = generate(spec)
        os.makedirs(args.out, exist_ok=True)
        write_triples_file(
            os.path.join(args.out, "train.tsv"), instance.train.triples, instance.vocab
        )
        write_triples_file(
            os.path.join(args.out, "test_pos.tsv"), instance.test_pos, instance.vocab
        )
        write_triples_file(
            os.path.join(args.out, "test_neg.tsv"), instance.test_neg, instance.vocab
        )
        rules_path = os.path.join(args.out, "rules.txt")
        with open(rules_path, "w", encoding="utf-8") as handle:
            for clause in instance.clauses:
                handle.write(str(clause) + "\n")
        print(f"instance\t{args.out}")
        print(f"train_facts\t{len(instance.train)}")
        print(f"test_pos\t{len(instance.test_pos)}")
        return 0
    config = _config_from_args(args)
    result = run_replicate(spec, config, args.replicate)
    print(f"aucpr_mean\t{result.mean:.6f}")
    print(f"aucpr_std\t{result.std:.6f}")
    return 0


def _random_relation_params(model_kind, k, rng, n_relations=2):
    width = vector_width(model_kind, k)
    return ModelParams(
        model_kind,
        k,
        rng.uniform(0.0, 1.0, size=(4, width)),
        rng.normal(0.0, 1.0, size=(n_relations, width)),
    )


def _template_clause(template: str) -> Clause:
    if template == "symmetry":
        return Clause((Atom("b", "X1", "X2"),), Atom("b", "X2", "X1"), ("X1", "X2"))
    if template == "implication":
        return Clause((Atom("b", "X1", "X2"),), Atom("r", "X1", "X2"), ("X1", "X2"))
    return Clause((Atom("b", "X1", "X2"),), Atom("r", "X2", "X1"), ("X1", "X2"))


def _check_vocab() -> Vocabulary:
    vocab = Vocabulary()
    for name in ("ea", "eb", "ec", "ed"):
        vocab.add_entity(name)
    vocab.add_relation("b")
    vocab.add_relation("r")
    return vocab.freeze()


def cmd_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    failed = False

    def emit(name, ok, detail):
        nonlocal failed
        failed = failed or not ok
        print(f"{name}\t{'PASS' if ok else 'FAIL'}\t{detail}")

    if args.what == "gradients":
        from .scoring import grad_score, score

        worst_score = 0.0
        for kind in (DISTMULT, COMPLEX):
            width = vector_width(kind, args.k)
            for _ in range(args.trials):
                theta, h1, h2 = rng.normal(size=(3, width))
                gt, g1, g2 = grad_score(kind, theta, h1, h2)
                checks = (
                    (gt, theta, lambda v: score(kind, v, h1, h2)),
                    (g1, h1, lambda v: score(kind, theta, v, h2)),
                    (g2, h2, lambda v: score(kind, theta, h1, v)),
                )
                for analytic, x, f in checks:
                    numeric = oracles.central_difference(f, x)
                    worst_score = max(worst_score, oracles.relative_error(analytic, numeric))
        emit("gradients_scores", worst_score < 1e-6, f"max_rel_err={worst_score:.3e}")

        clause = _template_clause("implication")
        vocab = _check_vocab()
        worst_clause = 0.0
        done = 0
        while done < args.trials:
            for kind in (DISTMULT, COMPLEX):
                params = _random_relation_params(kind, args.k, rng)
                adv = adversary.AdversarialSet(
                    {
                        "X1": rng.normal(size=vector_width(kind, args.k)),
                        "X2": rng.normal(size=vector_width(kind, args.k)),
                    }
                )
                loss, var_grads, _ = adversary.inconsistency_grads(
                    clause, adv, params, vocab
                )
                if loss < 0.05:
                    continue
                for var in ("X1", "X2"):
                    def at(v, var=var):
                        shifted = adversary.AdversarialSet(dict(adv.bindings))
                        shifted.bindings[var] = v
                        return adversary.inconsistency_loss(clause, shifted, params, vocab)

                    numeric = oracles.central_difference(at, adv.bindings[var])
                    worst_clause = max(
                        worst_clause, oracles.relative_error(var_grads[var], numeric)
                    )
                done += 1
        emit("gradients_inconsistency", worst_clause < 1e-6,
             f"max_rel_err={worst_clause:.3e}")
        return 1 if failed else 0

    if args.what == "closed-form":
        clause = _template_clause(args.template)
        vocab = _check_vocab()
        worst = 0.0
        tolerance = 1e-12 if args.subspace == CUBE else 1e-3
        for _ in range(args.trials):
            k = args.k if args.subspace == CUBE else (2 if args.model == DISTMULT else 1)
            params = _random_relation_params(args.model, k, rng)
            value, _ = adversary.closed_form_max_violation(
                clause, params, vocab, args.subspace
            )
            tb = params.relation_embeddings[vocab.relation_id("b")]
            tr = params.relation_embeddings[vocab.relation_id("r")]
            swapped = args.template != "implication"
            if args.subspace == CUBE:
                expected = oracles.cube_vertex_max_violation(args.model, tb, tr, swapped)
            else:
                expected = oracles.sphere_grid_max_violation(
                    args.model, tb, tr, swapped, n_grid=4000
                )
            worst = max(worst, abs(value - expected))
        emit(
            f"closed_form_{args.model}_{args.subspace}_{args.template}",
            worst <= tolerance,
            f"max_abs_err={worst:.3e} tol={tolerance:g}",
        )
        return 1 if failed else 0

    # adversary gap check
    clause = _template_clause(args.template)
    vocab = _check_vocab()
    worst_gap = -np.inf
    overshoot = 0.0
    for _ in range(args.trials):
        params = _random_relation_params(args.model, args.k, rng)
        from .scoring import project_rows

        params.entity_embeddings = project_rows(params.entity_embeddings, args.subspace)
        value, _ = adversary.closed_form_max_violation(clause, params, vocab, args.subspace)
        adv = adversary.find_adversarial_set(
            clause, params, vocab, args.subspace, args.tau_a, args.lr_a, rng,
            restarts=args.restarts,
        )
        reached = adversary.inconsistency_loss(clause, adv, params, vocab)
        worst_gap = max(worst_gap, value - reached)
        overshoot = max(overshoot, reached - value)
    emit(
        f"adversary_{args.model}_{args.subspace}_{args.template}",
        worst_gap <= 1e-2 and overshoot <= 1e-9,
        f"max_gap={worst_gap:.3e} overshoot={overshoot:.3e}",
    )
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (AsregError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
