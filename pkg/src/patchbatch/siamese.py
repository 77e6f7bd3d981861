"""Shared-weight pair encoding and the L2 distance head."""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .losses import DistanceBatch, batch_loss, batch_loss_grad


@dataclass
class PairBatch:
    left: np.ndarray
    right: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.left = np.asarray(self.left, dtype=np.float64)
        self.right = np.asarray(self.right, dtype=np.float64)
        self.labels = np.asarray(self.labels).astype(np.int64)
        n = self.labels.shape[0]
        if self.left.shape != self.right.shape or self.left.shape[0] != n or self.labels.ndim != 1:
            raise DimensionError(
                f"left {self.left.shape}, right {self.right.shape} and labels {self.labels.shape} disagree"
            )

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, idx):
        return PairBatch(self.left[idx], self.right[idx], self.labels[idx])


def siamese_distance(model, batch):
    """Encode both sides in one pass and return ``(DistanceBatch, cache)``.

    Both sides go through the encoder as a single batch of ``2n`` samples,
    so in train mode the batch-norm statistics are shared by the two
    branches and swapping left and right permutes nothing that matters.
    """
    n = len(batch)
    feats, enc_cache = model.forward(np.concatenate([batch.left, batch.right]))
    diff = feats[:n] - feats[n:]
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    return DistanceBatch(dist, batch.labels), (enc_cache, diff, dist)


def siamese_backward(model, cache, grad_distances):
    """Back-propagate ``dL/dD`` to the encoder parameters."""
    enc_cache, diff, dist = cache
    # Zero distance: subgradient 0.
    safe = np.where(dist > 0, dist, 1.0)
    unit = np.where((dist > 0)[:, None], diff / safe[:, None], 0.0)
    g = np.asarray(grad_distances)[:, None] * unit
    grads, _ = model.backward(enc_cache, np.concatenate([g, -g]))
    return grads


def loss_and_grads(model, loss_config, batch):
    """Batch loss and its gradient with respect to every model parameter."""
    dbatch, cache = siamese_distance(model, batch)
    loss = batch_loss(loss_config, dbatch)
    grads = siamese_backward(model, cache, batch_loss_grad(loss_config, dbatch))
    return loss, grads


def pair_distances(model, left, right, chunk=4096):
    """Distances under the model in its current mode, computed in chunks."""
    out = []
    for i in range(0, len(left), chunk):
        a = model(left[i : i + chunk])
        b = model(right[i : i + chunk])
        out.append(np.sqrt(np.sum((a - b) ** 2, axis=1)))
    return np.concatenate(out) if out else np.zeros(0)
