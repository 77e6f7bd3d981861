"""Contrastive pair losses and their batch-SD augmented versions.

Labels follow the DrLIM convention: ``Y = 0`` marks a matching pair and
``Y = 1`` a non-matching pair. ``D`` is the L2 distance between the two
descriptors of a pair.

The SD variants add ``(1 - lam) * (sigma_0 + sigma_1)`` to the
``lam``-weighted mean of the per-pair terms, where ``sigma_y`` is the
population standard deviation of the distances with label ``y`` in the
batch. That term couples every sample of a class, so the gradient of one
distance depends on the whole batch.
"""
import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBatchError, DimensionError, DomainError

SIGMA_FLOOR = 1e-12


class Variant(enum.Enum):
    SPRING = "spring"
    CENTRIFUGE = "centrifuge"
    SPRING_SD = "spring_sd"
    CENTRIFUGE_SD = "centrifuge_sd"

    @property
    def uses_sd(self):
        return self in (Variant.SPRING_SD, Variant.CENTRIFUGE_SD)

    @property
    def base(self):
        """The per-pair model underneath (``SPRING`` or ``CENTRIFUGE``)."""
        if self in (Variant.SPRING, Variant.SPRING_SD):
            return Variant.SPRING
        return Variant.CENTRIFUGE

    @classmethod
    def parse(cls, name):
        key = str(name).strip().lower().replace("+", "_").replace("-", "_")
        for v in cls:
            if v.value == key:
                return v
        raise ValueError(f"unknown loss variant {name!r}")


@dataclass(frozen=True)
class LossConfig:
    variant: Variant
    margin: float
    lam: float = 0.8

    def __post_init__(self):
        if not self.margin > 0:
            raise DomainError(f"margin must be positive, got {self.margin}")
        if not 0 < self.lam <= 1:
            raise DomainError(f"lambda must lie in (0, 1], got {self.lam}")

    @property
    def effective_lam(self):
        return self.lam if self.variant.uses_sd else 1.0


@dataclass
class DistanceBatch:
    distances: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.distances = np.asarray(self.distances, dtype=np.float64)
        self.labels = np.asarray(self.labels).astype(np.int64)
        if self.distances.ndim != 1 or self.distances.shape != self.labels.shape:
            raise DimensionError(
                f"distances {self.distances.shape} and labels {self.labels.shape} must be equal-length vectors"
            )
        if np.any(self.distances < 0):
            raise DomainError("distances must be non-negative")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise DomainError("labels must be 0 (match) or 1 (non-match)")


def _pair_terms(base, labels, d, m):
    pos = 0.5 * d**2
    if base is Variant.SPRING:
        neg = 0.5 * np.maximum(0.0, m - d) ** 2
    else:
        neg = 0.5 * np.maximum(0.0, m * m - d * d)
    return np.where(labels == 0, pos, neg)


def _pair_grads(base, labels, d, m):
    # Inactive branch at d == m (subgradient 0).
    active = d < m
    if base is Variant.SPRING:
        neg = np.where(active, -(m - d), 0.0)
    else:
        neg = np.where(active, -d, 0.0)
    return np.where(labels == 0, d, neg)


def pair_loss(variant, label, distance, margin):
    """Loss of a single pair under the plain spring or centrifuge model."""
    variant = Variant.parse(variant) if not isinstance(variant, Variant) else variant
    if variant.uses_sd:
        raise DomainError("pair_loss is defined for SPRING and CENTRIFUGE only")
    if distance < 0:
        raise DomainError(f"distance must be non-negative, got {distance}")
    if not margin > 0:
        raise DomainError(f"margin must be positive, got {margin}")
    d = np.asarray([float(distance)])
    return float(_pair_terms(variant, np.asarray([label]), d, float(margin))[0])


def _class_stats(batch, need_both):
    stats = []
    for y in (0, 1):
        idx = np.flatnonzero(batch.labels == y)
        if need_both and idx.size < 2:
            raise DegenerateBatchError(
                f"SD loss needs at least 2 samples per class, class {y} has {idx.size}"
            )
        d = batch.distances[idx]
        mu = d.mean() if idx.size else 0.0
        sigma = np.sqrt(np.mean((d - mu) ** 2)) if idx.size else 0.0
        stats.append((idx, mu, sigma))
    return stats


def batch_loss(config, batch):
    """Scalar loss of a whole batch."""
    if batch.distances.size == 0:
        raise DegenerateBatchError("empty batch")
    lam = config.effective_lam
    terms = _pair_terms(config.variant.base, batch.labels, batch.distances, config.margin)
    loss = lam * terms.mean()
    if config.variant.uses_sd:
        stats = _class_stats(batch, need_both=True)
        loss += (1.0 - lam) * (stats[0][2] + stats[1][2])
    return float(loss)


def batch_loss_grad(config, batch):
    """Derivative of :func:`batch_loss` with respect to every distance."""
    if batch.distances.size == 0:
        raise DegenerateBatchError("empty batch")
    n = batch.distances.size
    lam = config.effective_lam
    grad = lam / n * _pair_grads(config.variant.base, batch.labels, batch.distances, config.margin)
    if config.variant.uses_sd:
        for idx, mu, sigma in _class_stats(batch, need_both=True):
            if sigma < SIGMA_FLOOR:
                continue
            grad[idx] += (1.0 - lam) * (batch.distances[idx] - mu) / (idx.size * sigma)
    return grad


def batch_loss_and_grad(config, batch):
    return batch_loss(config, batch), batch_loss_grad(config, batch)
