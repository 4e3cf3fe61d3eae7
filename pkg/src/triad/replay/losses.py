"""Loss terms of the four optimization steps, built on parameter tensors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from triad.autodiff import Tensor, cross_entropy, grad_norm, soft_cross_entropy
from triad.networks import aux_logits, classifier_logits, critic_score


@dataclass(slots=True)
class CriticTerms:
    total: Tensor
    wasserstein: Tensor
    gradient_penalty: Tensor


def critic_loss(
    params: Mapping[str, Tensor],
    x_real: Tensor,
    x_fake: Tensor,
    x_penalty: Tensor | None,
    depth: int,
    lambda_gp: float,
) -> CriticTerms:
    """E[D(fake)] − E[D(real)] + λ_GP E[(‖∇D(x̂)‖ − 1)²]."""
    wasserstein = critic_score(params, x_fake, depth).mean() - critic_score(params, x_real, depth).mean()
    if x_penalty is None or lambda_gp == 0.0:
        penalty = Tensor(0.0)
        return CriticTerms(wasserstein, wasserstein, penalty)
    norms = grad_norm(critic_score(params, x_penalty, depth), x_penalty)
    penalty = ((norms - 1.0) ** 2).mean()
    return CriticTerms(wasserstein + penalty * lambda_gp, wasserstein, penalty)


def penalty_points(x_real: np.ndarray, x_fake: np.ndarray, epsilon: np.ndarray | None) -> Tensor:
    """Leaf at which the gradient norm is penalized: S' itself, or a real/fake mix."""
    if epsilon is None:
        return Tensor(x_real, requires_grad=True, name="x_hat")
    mixed = epsilon[:, None] * x_real + (1.0 - epsilon[:, None]) * x_fake
    return Tensor(mixed, requires_grad=True, name="x_hat")


def aux_classifier_loss(
    params: Mapping[str, Tensor],
    x: Tensor,
    labels: np.ndarray,
    depth: int,
    penalty: Tensor,
) -> tuple[Tensor, Tensor]:
    """Cross-entropy of D' on S' plus its consolidation penalty. Returns (total, ce)."""
    ce = cross_entropy(aux_logits(params, x, depth), labels)
    return ce + penalty, ce


def classifier_loss(
    params: Mapping[str, Tensor],
    x: Tensor,
    soft_targets: np.ndarray,
    depth: int,
    penalty: Tensor,
) -> tuple[Tensor, Tensor]:
    """Distillation from D''s probabilities (held constant) plus C's penalty."""
    distill = soft_cross_entropy(classifier_logits(params, x, depth), soft_targets)
    return distill + penalty, distill


def classifier_importance_loss(
    params: Mapping[str, Tensor],
    x: Tensor,
    labels: np.ndarray,
    soft_targets: np.ndarray,
    depth: int,
    penalty: Tensor,
) -> Tensor:
    """Loss whose squared gradients give C's importance: distillation, penalty and true-label CE."""
    logits = classifier_logits(params, x, depth)
    return soft_cross_entropy(logits, soft_targets) + penalty + cross_entropy(logits, labels)


def generator_loss(
    critic_params: Mapping[str, Tensor],
    fake: Tensor,
    labels: np.ndarray,
    depth: int,
    sparsity: Tensor,
    lambda_g: float,
) -> tuple[Tensor, Tensor, Tensor]:
    """−E[D(G(z,c))] + R_M + λ_G CE(D'(G(z,c)), c). Returns (total, adversarial, aux)."""
    adversarial = -critic_score(critic_params, fake, depth).mean()
    aux = cross_entropy(aux_logits(critic_params, fake, depth), labels)
    return adversarial + sparsity + aux * lambda_g, adversarial, aux
