from __future__ import annotations

from dataclasses import dataclass, field

from triad.autodiff import OptimizerState
from triad.consolidation import Consolidator, build_consolidator
from triad.contracts import ExperimentConfig, RandomSource
from triad.networks import ClassifierNet, CriticNet, GeneratorNet

OPTIMIZER_GROUPS = ("critic", "dprime", "classifier", "generator")


@dataclass(slots=True)
class TripleModel:
    """G, the critic with its auxiliary head (D and D'), the classifier C,
    plus the consolidation and optimizer state that travels with them."""

    generator: GeneratorNet
    critic: CriticNet
    classifier: ClassifierNet
    dprime: Consolidator
    c: Consolidator
    optimizers: dict[str, OptimizerState] = field(default_factory=dict)

    @classmethod
    def build(cls, config: ExperimentConfig, data_dim: int, rng: RandomSource) -> TripleModel:
        generator = GeneratorNet(
            config.latent_dim,
            config.label_embedding_dim,
            config.generator_hidden,
            data_dim,
            rng.spawn("generator"),
            scale_max=config.mask_scale_max,
            binarize=config.mask_binarize,
        )
        critic = CriticNet(data_dim, config.critic_hidden, rng.spawn("critic"))
        classifier = ClassifierNet(data_dim, config.classifier_hidden, rng.spawn("classifier"))
        dprime = build_consolidator(
            config.consolidation_dprime,
            config.lambda_dprime,
            xi=config.si_xi,
            combine=config.fisher_combine,
        )
        c = build_consolidator(
            config.consolidation_c,
            config.lambda_c,
            xi=config.si_xi,
            combine=config.fisher_combine,
        )
        model = cls(generator, critic, classifier, dprime, c)
        model.optimizers = {group: OptimizerState.from_config(config) for group in OPTIMIZER_GROUPS}
        return model

    def reset_optimizers(self) -> None:
        for state in self.optimizers.values():
            state.reset()
