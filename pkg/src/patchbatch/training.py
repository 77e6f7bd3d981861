"""Mini-batch training loop shared by the synthetic and patch experiments."""
import numpy as np

from .errors import DegenerateBatchError, PatchBatchError
from .optim import AdaDelta
from .siamese import loss_and_grads


class DivergenceError(PatchBatchError, FloatingPointError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, epoch, history):
        super().__init__(f"non-finite loss in epoch {epoch}")
        self.epoch = epoch
        self.history = history


def iterate_minibatches(n, batch_size, rng):
    """Shuffled index batches; a trailing partial batch is dropped unless it is the only one."""
    order = rng.permutation(n)
    if n <= batch_size:
        yield order
        return
    for start in range(0, n - batch_size + 1, batch_size):
        yield order[start : start + batch_size]


def train(model, loss_config, pairs, epochs, rng, batch_size=256, optimizer=None, sampler=None):
    """Train ``model`` in place and return the per-epoch mean losses.

    ``pairs`` is a fixed :class:`PairBatch`; alternatively ``sampler(epoch)``
    returns a fresh one each epoch (on-the-fly sampling). Batches that
    cannot support the SD statistics are skipped.
    """
    model.train()
    opt = optimizer or AdaDelta(model.parameters())
    history = []
    for epoch in range(epochs):
        data = sampler(epoch) if sampler is not None else pairs
        losses = []
        for idx in iterate_minibatches(len(data), batch_size, rng):
            try:
                loss, grads = loss_and_grads(model, loss_config, data.subset(idx))
            except DegenerateBatchError:
                continue
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise DivergenceError(epoch, history)
            opt.step(grads)
            losses.append(loss)
        history.append(float(np.mean(losses)) if losses else float("nan"))
    return history
