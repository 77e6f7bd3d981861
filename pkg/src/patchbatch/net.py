"""Layer stack with exact backpropagation, written against plain numpy.

Activations are laid out ``[n, features]`` for dense layers and
``[n, channels, height, width]`` for convolutional ones. Each layer
implements ``forward(x, training) -> (y, cache)`` and
``backward(cache, dy) -> (dx, grads)`` where ``grads`` maps parameter
names to arrays shaped like the parameters.

Two batch-norm flavours are provided. :class:`BatchNormConventional`
keeps one mean/variance/gamma/beta per channel. :class:`BatchNormFineGrained`
keeps one per activation position, so a ``[C, H, W]`` volume carries
``C*H*W`` of each. The fine-grained version ties the normaliser to a
position in the patch and therefore cannot be run fully convolutionally.
"""
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateBatchError, DimensionError, StateError

TRAIN = "train"
EVAL = "eval"


def glorot_uniform(rng, shape, fan_in, fan_out):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    kind = "layer"
    param_names = ()
    buffer_names = ()

    def output_shape(self, input_shape):
        return tuple(input_shape)

    def forward(self, x, training):
        raise NotImplementedError

    def backward(self, cache, dy):
        raise NotImplementedError

    # Serialization hooks: integer and float hyper-parameters in a fixed order.
    def config(self):
        return (), ()

    def __repr__(self):
        ints, floats = self.config()
        return f"{type(self).__name__}({', '.join(map(str, ints + floats))})"


class Dense(Layer):
    kind = "dense"
    param_names = ("weight", "bias")

    def __init__(self, in_dim, out_dim, rng=None):
        self.in_dim, self.out_dim = int(in_dim), int(out_dim)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weight = glorot_uniform(rng, (self.out_dim, self.in_dim), self.in_dim, self.out_dim)
        self.bias = np.zeros(self.out_dim)

    def output_shape(self, input_shape):
        if tuple(input_shape) != (self.in_dim,):
            raise DimensionError(f"Dense expects input ({self.in_dim},), got {tuple(input_shape)}")
        return (self.out_dim,)

    def forward(self, x, training):
        return x @ self.weight.T + self.bias, x

    def backward(self, x, dy):
        return dy @ self.weight, {"weight": dy.T @ x, "bias": dy.sum(axis=0)}

    def config(self):
        return (self.in_dim, self.out_dim), ()


class Conv2D(Layer):
    """Valid (unpadded) 2-D convolution."""

    kind = "conv2d"
    param_names = ("weight", "bias")

    def __init__(self, in_ch, out_ch, k, stride=1, rng=None):
        self.in_ch, self.out_ch, self.k, self.stride = int(in_ch), int(out_ch), int(k), int(stride)
        rng = rng if rng is not None else np.random.default_rng(0)
        kk = self.k * self.k
        self.weight = glorot_uniform(
            rng, (self.out_ch, self.in_ch, self.k, self.k), self.in_ch * kk, self.out_ch * kk
        )
        self.bias = np.zeros(self.out_ch)

    def output_shape(self, input_shape):
        if len(input_shape) != 3 or input_shape[0] != self.in_ch:
            raise DimensionError(f"Conv2D expects ({self.in_ch}, H, W), got {tuple(input_shape)}")
        _, h, w = input_shape
        if h < self.k or w < self.k:
            raise DimensionError(f"input {h}x{w} smaller than kernel {self.k}")
        return (self.out_ch, (h - self.k) // self.stride + 1, (w - self.k) // self.stride + 1)

    def forward(self, x, training):
        s = self.stride
        win = sliding_window_view(x, (self.k, self.k), axis=(2, 3))[:, :, ::s, ::s]
        n, c, ho, wo = win.shape[:4]
        cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n, ho, wo, c * self.k * self.k)
        y = cols @ self.weight.reshape(self.out_ch, -1).T + self.bias
        return np.ascontiguousarray(y.transpose(0, 3, 1, 2)), (x.shape, cols)

    def backward(self, cache, dy):
        x_shape, cols = cache
        n, c, h, w = x_shape
        s, k = self.stride, self.k
        dy_t = dy.transpose(0, 2, 3, 1)
        ho, wo = dy_t.shape[1:3]
        wmat = self.weight.reshape(self.out_ch, -1)
        dw = dy_t.reshape(-1, self.out_ch).T @ cols.reshape(-1, cols.shape[-1])
        dcols = (dy_t @ wmat).reshape(n, ho, wo, c, k, k)
        dx = np.zeros(x_shape)
        for a in range(k):
            for b in range(k):
                dx[:, :, a : a + s * ho : s, b : b + s * wo : s] += dcols[:, :, :, :, a, b].transpose(0, 3, 1, 2)
        return dx, {"weight": dw.reshape(self.weight.shape), "bias": dy.sum(axis=(0, 2, 3))}

    def config(self):
        return (self.in_ch, self.out_ch, self.k, self.stride), ()


class MaxPool(Layer):
    """Max pooling in ceil mode: a partial window at the far edge still emits
    an output, which gives the 49 -> 25 -> ... sizes of the reference stack."""

    kind = "maxpool"

    def __init__(self, k=2, stride=2):
        self.k, self.stride = int(k), int(stride)

    def _out(self, n):
        return max(0, -(-(n - self.k) // self.stride)) + 1

    def output_shape(self, input_shape):
        if len(input_shape) != 3:
            raise DimensionError(f"MaxPool expects (C, H, W), got {tuple(input_shape)}")
        c, h, w = input_shape
        return (c, self._out(h), self._out(w))

    def forward(self, x, training):
        n, c, h, w = x.shape
        k, s = self.k, self.stride
        ho, wo = self._out(h), self._out(w)
        hp, wp = (ho - 1) * s + k, (wo - 1) * s + k
        xp = np.full((n, c, hp, wp), -np.inf)
        xp[:, :, :h, :w] = x
        win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::s, ::s].reshape(n, c, ho, wo, k * k)
        arg = win.argmax(axis=-1)
        y = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
        return y, (x.shape, arg)

    def backward(self, cache, dy):
        (n, c, h, w), arg = cache
        k, s = self.k, self.stride
        ho, wo = dy.shape[2:]
        dxp = np.zeros((n, c, (ho - 1) * s + k, (wo - 1) * s + k))
        for a in range(k):
            for b in range(k):
                hit = arg == a * k + b
                dxp[:, :, a : a + s * ho : s, b : b + s * wo : s] += np.where(hit, dy, 0.0)
        return dxp[:, :, :h, :w], {}

    def config(self):
        return (self.k, self.stride), ()


class LeakyReLU(Layer):
    kind = "leaky_relu"

    def __init__(self, alpha=0.1):
        self.alpha = float(alpha)

    def forward(self, x, training):
        pos = x > 0
        return np.where(pos, x, self.alpha * x), pos

    def backward(self, pos, dy):
        return np.where(pos, dy, self.alpha * dy), {}

    def config(self):
        return (), (self.alpha,)


def ReLU():
    return LeakyReLU(0.0)


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x, training):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, shape, dy):
        return dy.reshape(shape), {}


class _BatchNorm(Layer):
    param_names = ("gamma", "beta")
    buffer_names = ("running_mean", "running_var")

    def __init__(self, param_shape, eps=1e-5, momentum=0.1):
        self.param_shape = tuple(int(d) for d in param_shape)
        self.eps = float(eps)
        self.momentum = float(momentum)
        self.gamma = np.ones(self.param_shape)
        self.beta = np.zeros(self.param_shape)
        self.running_mean = np.zeros(self.param_shape)
        self.running_var = np.ones(self.param_shape)

    def _axes(self, ndim):
        raise NotImplementedError

    def _broadcast(self, p, ndim):
        raise NotImplementedError

    def forward(self, x, training):
        axes = self._axes(x.ndim)
        bc = lambda p: self._broadcast(p, x.ndim)
        if not training:
            xhat = (x - bc(self.running_mean)) / np.sqrt(bc(self.running_var) + self.eps)
            return bc(self.gamma) * xhat + bc(self.beta), None
        if x.shape[0] < 2:
            raise DegenerateBatchError("batch normalization in train mode needs at least 2 samples")
        count = int(np.prod([x.shape[a] for a in axes]))
        mu = x.mean(axis=axes, keepdims=True)
        var = ((x - mu) ** 2).mean(axis=axes, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu) * inv_std
        mom = self.momentum
        self.running_mean = (1 - mom) * self.running_mean + mom * mu.reshape(self.param_shape)
        unbiased = var.reshape(self.param_shape) * count / max(count - 1, 1)
        self.running_var = (1 - mom) * self.running_var + mom * unbiased
        return bc(self.gamma) * xhat + bc(self.beta), (xhat, inv_std, axes, count)

    def backward(self, cache, dy):
        xhat, inv_std, axes, count = cache
        bc = lambda p: self._broadcast(p, dy.ndim)
        dgamma = (dy * xhat).sum(axis=axes).reshape(self.param_shape)
        dbeta = dy.sum(axis=axes).reshape(self.param_shape)
        dxhat = dy * bc(self.gamma)
        dx = inv_std / count * (
            count * dxhat
            - dxhat.sum(axis=axes, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True)
        )
        return dx, {"gamma": dgamma, "beta": dbeta}


class BatchNormFineGrained(_BatchNorm):
    """Batch norm with separate statistics and affine terms per activation."""

    kind = "bn_fine"

    def __init__(self, activation_shape, eps=1e-5, momentum=0.1):
        super().__init__(activation_shape, eps, momentum)

    def output_shape(self, input_shape):
        if tuple(input_shape) != self.param_shape:
            raise DimensionError(f"BatchNormFineGrained built for {self.param_shape}, got {tuple(input_shape)}")
        return self.param_shape

    def _axes(self, ndim):
        return (0,)

    def _broadcast(self, p, ndim):
        return p[None]

    def config(self):
        return (len(self.param_shape),) + self.param_shape, (self.eps, self.momentum)


class BatchNormConventional(_BatchNorm):
    """Classic batch norm: one set of statistics per channel / feature."""

    kind = "bn_conv"

    def __init__(self, channels, eps=1e-5, momentum=0.1):
        super().__init__((channels,), eps, momentum)
        self.channels = int(channels)

    def output_shape(self, input_shape):
        if input_shape[0] != self.channels:
            raise DimensionError(f"BatchNormConventional built for {self.channels} channels, got {tuple(input_shape)}")
        return tuple(input_shape)

    def _axes(self, ndim):
        return (0,) + tuple(range(2, ndim))

    def _broadcast(self, p, ndim):
        return p.reshape((1, -1) + (1,) * (ndim - 2))

    def config(self):
        return (self.channels,), (self.eps, self.momentum)


LAYER_KINDS = {
    cls.kind: cls
    for cls in (Dense, Conv2D, MaxPool, LeakyReLU, Flatten, BatchNormFineGrained, BatchNormConventional)
}


class EncoderModel:
    """An ordered layer stack mapping per-sample inputs to descriptors.

    One model serves both branches of the Siamese pair. In train mode the
    batch-norm layers normalise with batch statistics and update their
    running averages; in eval mode they use the running averages only.
    """

    def __init__(self, layers, input_shape, mode=TRAIN):
        self.layers = list(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.mode = mode
        self.output_shape = self._check_shapes()

    def _check_shapes(self):
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
        return shape

    @property
    def descriptor_dim(self):
        return int(np.prod(self.output_shape))

    def train(self):
        self.mode = TRAIN
        return self

    def eval(self):
        self.mode = EVAL
        return self

    def parameters(self):
        """Parameter arrays in layer order (the order used by optimisers and checkpoints)."""
        return [getattr(layer, name) for layer in self.layers for name in layer.param_names]

    def set_parameters(self, arrays):
        it = iter(arrays)
        for layer in self.layers:
            for name in layer.param_names:
                new = next(it)
                if new.shape != getattr(layer, name).shape:
                    raise DimensionError(f"parameter {name} shape mismatch")
                setattr(layer, name, new)

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.input_shape:
            raise DimensionError(f"model expects per-sample shape {self.input_shape}, got {x.shape[1:]}")
        training = self.mode == TRAIN
        caches = []
        for layer in self.layers:
            x, c = layer.forward(x, training)
            caches.append(c)
        return x.reshape(x.shape[0], -1), (self.mode, x.shape, caches)

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_out):
        """Return ``(param_grads, input_grad)``; ``param_grads`` aligns with :meth:`parameters`."""
        mode, out_shape, caches = cache
        if mode != TRAIN:
            raise StateError("backward needs a cache produced in train mode")
        dy = np.asarray(grad_out, dtype=np.float64).reshape(out_shape)
        per_layer = []
        for layer, c in zip(reversed(self.layers), reversed(caches)):
            dy, g = layer.backward(c, dy)
            per_layer.append([g[name] for name in layer.param_names])
        grads = [g for layer_grads in reversed(per_layer) for g in layer_grads]
        return grads, dy


def mlp(dims, rng, activation_alpha=0.0, batch_norm=None, bn_momentum=0.1):
    """Dense stack ``dims[0] -> ... -> dims[-1]`` with activations between layers.

    ``batch_norm`` may be ``None``, ``"fine"`` or ``"conventional"``; it is
    inserted before each hidden activation.
    """
    layers = []
    for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        layers.append(Dense(a, b, rng))
        if i < len(dims) - 2:
            if batch_norm == "fine":
                layers.append(BatchNormFineGrained((b,), momentum=bn_momentum))
            elif batch_norm == "conventional":
                layers.append(BatchNormConventional(b, momentum=bn_momentum))
            layers.append(LeakyReLU(activation_alpha))
    return EncoderModel(layers, (dims[0],))


def conv_encoder(patch, blocks, rng, alpha=0.1, fine_grained=True, bn_momentum=0.1):
    """Conv/BN/LeakyReLU[/MaxPool] stack on a ``1 x patch x patch`` input.

    ``blocks`` is a list of ``(out_channels, kernel, pool)`` tuples; the
    output volume is flattened into the descriptor.
    """
    shape = (1, patch, patch)
    layers = []
    for out_ch, k, pool in blocks:
        conv = Conv2D(shape[0], out_ch, k, 1, rng)
        shape = conv.output_shape(shape)
        bn = BatchNormFineGrained(shape, momentum=bn_momentum) if fine_grained else BatchNormConventional(
            out_ch, momentum=bn_momentum
        )
        layers += [conv, bn, LeakyReLU(alpha)]
        if pool:
            mp = MaxPool(2, 2)
            shape = mp.output_shape(shape)
            layers.append(mp)
    layers.append(Flatten())
    return EncoderModel(layers, (1, patch, patch))


def toy_patch_encoder(rng, patch=9, fine_grained=True):
    """Desk-scale miniature of the 51x51 stack: 9x9 patch to a 32-D descriptor."""
    return conv_encoder(patch, [(8, 3, True), (16, 3, False), (32, 2, False)], rng, fine_grained=fine_grained)


def full_patch_encoder(rng, fine_grained=True):
    """The 51x51 -> 512-D reference stack (five conv triplets)."""
    blocks = [(32, 3, True), (64, 3, True), (128, 3, True), (256, 3, True), (512, 2, False)]
    return conv_encoder(51, blocks, rng, fine_grained=fine_grained)
