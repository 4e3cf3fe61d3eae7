from .generator import (
    EMBEDDING,
    GeneratorNet,
    generator_forward,
    generator_graph,
    sample_masks,
    training_masks,
)
from .heads import (
    ClassifierNet,
    CriticNet,
    HeadedNet,
    aux_classifier_forward,
    aux_logits,
    classifier_forward,
    classifier_logits,
    critic_features,
    critic_score,
    discriminator_forward,
    expand_output_layer,
)
from .masks import (
    MaskSet,
    annealed_scale,
    cumulative_mask,
    mask_sparsity_penalty,
    prior_cumulative_masks,
)
from .parameters import ParameterStore, init_dense

__all__ = [
    "EMBEDDING",
    "ClassifierNet",
    "CriticNet",
    "GeneratorNet",
    "HeadedNet",
    "MaskSet",
    "ParameterStore",
    "annealed_scale",
    "aux_classifier_forward",
    "aux_logits",
    "classifier_forward",
    "classifier_logits",
    "critic_features",
    "critic_score",
    "cumulative_mask",
    "discriminator_forward",
    "expand_output_layer",
    "generator_forward",
    "generator_graph",
    "init_dense",
    "mask_sparsity_penalty",
    "prior_cumulative_masks",
    "sample_masks",
    "training_masks",
]
