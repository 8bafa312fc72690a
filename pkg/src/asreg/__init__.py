"""Clause-regularised neural link prediction.

Train DistMult or ComplEx knowledge-graph embedding models under a minimax
objective: an adversary binds clause variables to embeddings that maximise
a hinge inconsistency loss, while the model minimises fact loss plus the
weighted inconsistency. For symmetry and implication clause shapes the
inner maximisation has closed forms.
"""

from .adversary import (
    GODEL,
    PRODUCT,
    AdversarialSet,
    closed_form_max_violation,
    find_adversarial_set,
    grounded_inconsistency_loss,
    inconsistency_grads,
    inconsistency_loss,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .clauses import (
    Atom,
    Clause,
    ClauseTemplate,
    classify_template,
    forward_chain,
    parse_clause,
    parse_rules,
)
from .errors import AsregError
from .evaluation import auc_pr, metrics, partition_test, rank_triple
from .graph import (
    DatasetSplit,
    KnowledgeGraph,
    Triple,
    Vocabulary,
    load_triples,
    load_triples_file,
)
from .scoring import (
    COMPLEX,
    CUBE,
    DISTMULT,
    SPHERE,
    ModelParams,
    init_params,
    project,
    score_complex,
    score_distmult,
)
from .synthetic import SyntheticSpec, generate, run_replicate
from .training import TrainingConfig, corrupt, fact_loss_and_grads, train

__version__ = "0.1.0"
