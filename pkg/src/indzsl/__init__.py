"""Inductive-VAE zero-shot learning: semantics refinement, feature synthesis,
and a CZSL/GZSL evaluation harness."""

__version__ = "0.1.0"

from .dataset import (
    DatasetSplits,
    Partition,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    samples_by_class,
)
from .errors import IndzslError
from .evalharness import (
    Classifier,
    ClassifierConfig,
    EvalReport,
    evaluate,
    harmonic_mean,
    per_class_top1,
    train_classifier,
)
from .ivae import (
    IvaeParameters,
    LossBreakdown,
    SynthesizedSet,
    TrainingConfig,
    boost_loss,
    decode,
    encode,
    kl_loss,
    synthesize,
    target_recon_loss,
    total_loss,
    train,
)
from .semantics import (
    CdpProjector,
    ClassSemanticMatrix,
    ReferentIndex,
    SimilarityReport,
    build_referent_index,
    cdp_refine,
    cosine_similarity,
    mixup_referents,
    semantic_matrix,
    similarity_report,
)

__all__ = [
    "CdpProjector",
    "Classifier",
    "ClassifierConfig",
    "ClassSemanticMatrix",
    "DatasetSplits",
    "EvalReport",
    "IndzslError",
    "IvaeParameters",
    "LossBreakdown",
    "Partition",
    "ReferentIndex",
    "SimilarityReport",
    "SynthesizedSet",
    "SyntheticSpec",
    "TrainingConfig",
    "boost_loss",
    "build_referent_index",
    "cdp_refine",
    "cosine_similarity",
    "decode",
    "encode",
    "evaluate",
    "generate_synthetic",
    "harmonic_mean",
    "kl_loss",
    "load_dataset",
    "mixup_referents",
    "per_class_top1",
    "samples_by_class",
    "semantic_matrix",
    "similarity_report",
    "synthesize",
    "target_recon_loss",
    "total_loss",
    "train",
    "train_classifier",
]
