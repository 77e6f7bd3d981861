"""AdaDelta (Zeiler 2012)."""
import numpy as np

from .errors import DimensionError


class AdaDelta:
    """Per-coordinate AdaDelta with decay ``rho`` and conditioning ``eps``.

    ``step`` updates the parameter arrays in place::

        E[g^2]  <- rho E[g^2]  + (1 - rho) g^2
        dx      =  -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
        E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
        x       <- x + lr * dx
    """

    def __init__(self, params, rho=0.95, eps=1e-6, lr=1.0):
        self.params = list(params)
        self.rho, self.eps, self.lr = float(rho), float(eps), float(lr)
        self.sq_grad = [np.zeros_like(p) for p in self.params]
        self.sq_delta = [np.zeros_like(p) for p in self.params]

    def step(self, grads):
        if len(grads) != len(self.params):
            raise DimensionError(f"expected {len(self.params)} gradients, got {len(grads)}")
        rho, eps = self.rho, self.eps
        deltas = []
        for p, g, eg, ed in zip(self.params, grads, self.sq_grad, self.sq_delta):
            if g.shape != p.shape:
                raise DimensionError(f"gradient shape {g.shape} does not match parameter {p.shape}")
            eg *= rho
            eg += (1 - rho) * g * g
            dx = -np.sqrt(ed + eps) / np.sqrt(eg + eps) * g
            ed *= rho
            ed += (1 - rho) * dx * dx
            p += self.lr * dx
            deltas.append(dx)
        return deltas
