"""Batch output-matrix objectives and a seeded comparison harness.

The package measures and optimises the structure of a batch prediction
matrix: entropy and Frobenius norm for discriminability, rank and nuclear
norm for diversity. Four unsupervised objectives (entropy minimisation,
Frobenius-norm maximisation, nuclear-norm maximisation, marginal balance)
plug into a small softmax classifier trained on synthetic label-scarce
scenarios, with every run reproducible bit-for-bit from its seeds.
"""

from .linalg import (
    SvdConvergenceError,
    SvdFactors,
    check_batch_output,
    entropy,
    frobenius_norm,
    nuclear_norm,
    numeric_rank,
    thin_svd,
)
from .model import (
    Classifier,
    ForwardTrace,
    Gradients,
    backward_ce,
    backward_objective,
    cross_entropy,
    forward,
    init_classifier,
    sgd_step,
    with_class_prototypes,
)
from .objectives import (
    ObjectiveEval,
    ObjectiveKind,
    equal_entropy_diversity_demo,
    eval_balance,
    eval_bfm,
    eval_bnm,
    eval_entmin,
    evaluate,
    fd_check,
    spectrum_gap,
)
from .rng import Xoshiro256pp, derive_seed, splitmix64, stream
from .scenarios import (
    Dataset,
    DomainShift,
    PrototypeInit,
    ScenarioKind,
    ScenarioSpec,
    default_spec,
    generate,
    prototype_init,
    sample_batch,
)
from .trainer import (
    MethodSummary,
    RunRecord,
    TrainConfig,
    TrainDivergedError,
    category_ratio,
    compare,
    diversity_ratio,
    minority_recall,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Classifier",
    "Dataset",
    "DomainShift",
    "ForwardTrace",
    "Gradients",
    "MethodSummary",
    "ObjectiveEval",
    "ObjectiveKind",
    "PrototypeInit",
    "RunRecord",
    "ScenarioKind",
    "ScenarioSpec",
    "SvdConvergenceError",
    "SvdFactors",
    "TrainConfig",
    "TrainDivergedError",
    "Xoshiro256pp",
    "backward_ce",
    "backward_objective",
    "category_ratio",
    "check_batch_output",
    "compare",
    "cross_entropy",
    "default_spec",
    "derive_seed",
    "diversity_ratio",
    "entropy",
    "equal_entropy_diversity_demo",
    "eval_balance",
    "eval_bfm",
    "eval_bnm",
    "eval_entmin",
    "evaluate",
    "fd_check",
    "forward",
    "frobenius_norm",
    "generate",
    "init_classifier",
    "minority_recall",
    "nuclear_norm",
    "numeric_rank",
    "prototype_init",
    "sample_batch",
    "sgd_step",
    "spectrum_gap",
    "splitmix64",
    "stream",
    "thin_svd",
    "train",
    "with_class_prototypes",
]
