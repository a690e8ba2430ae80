"""Bidirectional cross-view InfoNCE, cross-entropy and their weighted sum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from topoclasp import autodiff as ad
from topoclasp.autodiff import Tensor
from topoclasp.errors import ConfigError


@dataclass(frozen=True)
class LossConfig:
    tau: float = 0.5
    alpha: float = 0.1

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError(f"temperature must be positive, got {self.tau}")
        if not self.alpha >= 0:
            raise ConfigError(f"contrastive weight must be non-negative, got {self.alpha}")


def info_nce(z, u, tau: float) -> Tensor:
    """Symmetric InfoNCE between paired rows of ``z`` and ``u``.

    Rows are l2-normalised first, so similarities are cosines over ``tau``.
    Row ``i`` of each view is the positive for row ``i`` of the other; all
    other rows in the batch are negatives. The result averages the
    structure-to-topology and topology-to-structure terms.
    """
    if not tau > 0:
        raise ConfigError(f"temperature must be positive, got {tau}")
    zn = ad.l2_normalize(z)
    un = ad.l2_normalize(u)
    sim = ad.scalar_mul(ad.matmul(zn, ad.transpose(un)), 1.0 / tau)
    batch = sim.shape[0]
    z_to_u = ad.sum(ad.logsumexp(sim))
    u_to_z = ad.sum(ad.logsumexp(ad.transpose(sim)))
    positives = ad.sum(ad.diagonal(sim))
    total = ad.sub(ad.add(z_to_u, u_to_z), ad.scalar_mul(positives, 2.0))
    return ad.scalar_mul(total, 1.0 / (2 * batch))


def cross_entropy(logits, labels) -> Tensor:
    logits = ad.as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    batch, classes = logits.shape
    onehot = np.zeros((batch, classes))
    onehot[np.arange(batch), labels] = 1.0
    picked = ad.sum(ad.mul(logits, onehot))
    return ad.scalar_mul(ad.sub(ad.sum(ad.logsumexp(logits)), picked), 1.0 / batch)


def joint_loss(logits, labels, z, u, cfg: LossConfig = LossConfig()) -> Tensor:
    """``cross_entropy + alpha * info_nce``. The contrastive term is always
    evaluated, so ``alpha = 0`` differs from plain cross-entropy only by an
    exact zero."""
    return ad.add(cross_entropy(logits, labels), ad.scalar_mul(info_nce(z, u, cfg.tau), cfg.alpha))
