"""Array kernels and layer primitives.

Arrays are float64 numpy arrays in NHWC layout: ``(batch, height, width,
channels)`` for images and ``(batch, features)`` after flattening.  The
``Tensor`` of the design notes is simply ``np.ndarray``.

Each layer exposes a pure ``forward(x, train, rng) -> (out, cache)`` and
``backward(grad_out, cache) -> (grad_in, param_grads)``; parameters live on
the layer, activations live in the cache.
"""

import math

import numpy as np

from .errors import ContractError, GeometryError, ShapeError, ValidationError

KERNEL = 3
POOL = 2
PADDINGS = ("zero", "none")


def as_array(x):
    return np.asarray(x, dtype=np.float64)


def matmul(a, b):
    """Matrix product of a ``M x K`` and a ``K x N`` array.

    Accumulation is delegated to BLAS ``dgemm``; results are reproducible for
    a fixed BLAS build and thread count but the summation order over ``k`` is
    the library's, not strictly ascending.
    """
    a = as_array(a)
    b = as_array(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def _as_batch(x):
    x = as_array(x)
    if x.ndim == 3:
        return x[None], True
    if x.ndim != 4:
        raise ShapeError(f"expected HxWxC or NxHxWxC array, got shape {x.shape}")
    return x, False


def _check_padding(padding):
    if padding not in PADDINGS:
        raise ValidationError(f"padding must be one of {PADDINGS}, got {padding!r}")


def conv_output_hw(h, w, padding):
    _check_padding(padding)
    if padding == "zero":
        return h, w
    if h < KERNEL or w < KERNEL:
        raise GeometryError(
            f"3x3 convolution without padding needs at least 3x3 input, got {h}x{w}"
        )
    return h - KERNEL + 1, w - KERNEL + 1


def pool_output_hw(h, w):
    if h < POOL or w < POOL:
        raise GeometryError(f"2x2 max-pool needs at least 2x2 input, got {h}x{w}")
    return h // POOL, w // POOL


def _im2col(x, padding):
    b, h, w, c = x.shape
    ho, wo = conv_output_hw(h, w, padding)
    if padding == "zero":
        x = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    cols = np.empty((b, ho, wo, KERNEL, KERNEL, c))
    for i in range(KERNEL):
        for j in range(KERNEL):
            cols[:, :, :, i, j, :] = x[:, i:i + ho, j:j + wo, :]
    return cols.reshape(b * ho * wo, KERNEL * KERNEL * c), (b, ho, wo)


def _conv_forward(x, kernels, bias, padding):
    kernels = as_array(kernels)
    bias = as_array(bias)
    c_in = x.shape[3]
    if kernels.shape[:3] != (KERNEL, KERNEL, c_in) or kernels.ndim != 4:
        raise ShapeError(
            f"kernels of shape {kernels.shape} do not match input channels {c_in}"
        )
    c_out = kernels.shape[3]
    if bias.shape != (c_out,):
        raise ShapeError(f"bias shape {bias.shape} does not match {c_out} filters")
    cols, (b, ho, wo) = _im2col(x, padding)
    out = cols @ kernels.reshape(-1, c_out) + bias
    return out.reshape(b, ho, wo, c_out), cols


def conv2d_forward(x, kernels, bias, padding):
    """3x3 stride-1 cross-correlation (no kernel flip).

    ``x`` is ``HxWxC_in`` or ``NxHxWxC_in``; ``kernels`` is
    ``3x3xC_in xC_out``.  ``padding="zero"`` keeps the spatial size,
    ``padding="none"`` shrinks each side by 2.
    """
    x, single = _as_batch(x)
    out, _ = _conv_forward(x, kernels, bias, padding)
    return out[0] if single else out


def conv2d_backward(grad_out, x_shape, cols, kernels, padding, need_input_grad=True):
    """Gradients of a 3x3 convolution: ``(grad_x, grad_kernels, grad_bias)``.

    ``grad_x`` is ``None`` when ``need_input_grad`` is false.
    """
    b, h, w, c_in = x_shape
    c_out = kernels.shape[3]
    _, ho, wo, _ = grad_out.shape
    g = grad_out.reshape(-1, c_out)
    grad_k = (cols.T @ g).reshape(kernels.shape)
    grad_b = g.sum(axis=0)
    if not need_input_grad:
        return None, grad_k, grad_b
    dcols = (g @ kernels.reshape(-1, c_out).T).reshape(b, ho, wo, KERNEL, KERNEL, c_in)
    pad = 1 if padding == "zero" else 0
    dx = np.zeros((b, h + 2 * pad, w + 2 * pad, c_in))
    for i in range(KERNEL):
        for j in range(KERNEL):
            dx[:, i:i + ho, j:j + wo, :] += dcols[:, :, :, i, j, :]
    if pad:
        dx = dx[:, 1:-1, 1:-1, :]
    return dx, grad_k, grad_b


def maxpool2_forward(x):
    """Non-overlapping 2x2 max-pool with floor semantics.

    Returns ``(pooled, argmax)`` where ``argmax`` holds, per output cell, the
    row-major index 0..3 (top-left, top-right, bottom-left, bottom-right) of
    the winning cell inside its window.  Ties go to the first index.
    """
    x, single = _as_batch(x)
    b, h, w, c = x.shape
    ho, wo = pool_output_hw(h, w)
    x = x[:, :2 * ho, :2 * wo, :]
    tl, tr = x[:, 0::2, 0::2], x[:, 0::2, 1::2]
    bl, br = x[:, 1::2, 0::2], x[:, 1::2, 1::2]
    top = np.maximum(tl, tr)
    bottom = np.maximum(bl, br)
    top_arg = (tr > tl).astype(np.int8)
    bottom_arg = (br > bl).astype(np.int8) + 2
    lower = bottom > top
    out = np.where(lower, bottom, top)
    arg = np.where(lower, bottom_arg, top_arg)
    if single:
        return out[0], arg[0]
    return out, arg


def maxpool2_backward(grad_out, argmax, x_shape):
    single = grad_out.ndim == 3
    if single:
        grad_out, argmax, x_shape = grad_out[None], argmax[None], (1, *x_shape)
    dx = np.zeros(x_shape)
    for k, (di, dj) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        ho, wo = grad_out.shape[1:3]
        dx[:, di:2 * ho:2, dj:2 * wo:2, :] = np.where(argmax == k, grad_out, 0.0)
    return dx[0] if single else dx


def softmax(logits):
    z = as_array(logits)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def glorot_uniform_init(fan_in, fan_out, rng, shape=None):
    """Glorot/Xavier uniform draw on ``[-limit, limit]``, ``limit = sqrt(6/(fan_in+fan_out))``."""
    if fan_in <= 0 or fan_out <= 0:
        raise ValidationError(f"fans must be positive, got {fan_in}, {fan_out}")
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    if shape is None:
        shape = (fan_in, fan_out)
    return rng.uniform(-limit, limit, size=shape)


class Cache:
    __slots__ = ("layer", "input_shape", "data")

    def __init__(self, layer, input_shape, data):
        self.layer = layer
        self.input_shape = input_shape
        self.data = data


class Layer:
    kind = "layer"

    def __init__(self):
        self.input_shape = None
        self.output_shape = None
        self.params = {}

    def build(self, input_shape, rng=None):
        """Resolve shapes for a per-sample ``input_shape`` and initialise parameters."""
        self.input_shape = tuple(input_shape)
        self.output_shape = self._output_shape(self.input_shape)
        return self.output_shape

    def _output_shape(self, input_shape):
        return input_shape

    def _check_input(self, x):
        if self.input_shape is not None and x.shape[1:] != self.input_shape:
            raise ShapeError(
                f"{self.describe()} expects per-sample shape {self.input_shape}, "
                f"got {x.shape[1:]}"
            )

    def _check_cache(self, cache, grad_out):
        if not isinstance(cache, Cache) or cache.layer is not self:
            raise ContractError(f"{self.describe()}: cache was not produced by this layer")
        expected = (cache.input_shape[0], *self.output_shape)
        if grad_out.shape != expected:
            raise ContractError(
                f"{self.describe()}: gradient shape {grad_out.shape} does not match "
                f"forward output {expected}"
            )

    def forward(self, x, train=False, rng=None):
        x = as_array(x)
        self._check_input(x)
        out, data = self._forward(x, train, rng)
        return out, Cache(self, x.shape, data)

    def backward(self, grad_out, cache, need_input_grad=True):
        """Return ``(grad_in, param_grads)``.

        Layers may return ``grad_in=None`` when ``need_input_grad`` is false
        (the first layer of a network never needs it).
        """
        grad_out = as_array(grad_out)
        self._check_cache(cache, grad_out)
        if not need_input_grad and self.params:
            return self._param_grads_only(grad_out, cache)
        return self._backward(grad_out, cache)

    def _param_grads_only(self, grad_out, cache):
        return self._backward(grad_out, cache)

    def param_count(self):
        return sum(p.size for p in self.params.values())

    def config(self):
        return {}

    def describe(self):
        args = ", ".join(f"{k}={v}" for k, v in self.config().items())
        return f"{type(self).__name__}({args})"


class Dense(Layer):
    kind = "dense"

    def __init__(self, units):
        super().__init__()
        self.units = int(units)

    def config(self):
        return {"units": self.units}

    def _output_shape(self, input_shape):
        if len(input_shape) != 1:
            raise ShapeError(f"Dense needs flat input, got per-sample shape {input_shape}")
        return (self.units,)

    def build(self, input_shape, rng=None):
        out = super().build(input_shape)
        fan_in = self.input_shape[0]
        self.params = {
            "weight": glorot_uniform_init(fan_in, self.units, rng) if rng is not None
            else np.zeros((fan_in, self.units)),
            "bias": np.zeros(self.units),
        }
        return out

    def _forward(self, x, train, rng):
        return x @ self.params["weight"] + self.params["bias"], x

    def _backward(self, grad_out, cache):
        x = cache.data
        grads = {"weight": x.T @ grad_out, "bias": grad_out.sum(axis=0)}
        return grad_out @ self.params["weight"].T, grads


class Conv2D(Layer):
    kind = "conv2d"

    def __init__(self, filters, padding="zero"):
        super().__init__()
        _check_padding(padding)
        self.filters = int(filters)
        self.padding = padding

    def config(self):
        return {"filters": self.filters, "padding": self.padding}

    def _output_shape(self, input_shape):
        if len(input_shape) != 3:
            raise ShapeError(f"Conv2D needs HxWxC input, got {input_shape}")
        h, w, _ = input_shape
        ho, wo = conv_output_hw(h, w, self.padding)
        return (ho, wo, self.filters)

    def build(self, input_shape, rng=None):
        out = super().build(input_shape)
        c_in = self.input_shape[2]
        shape = (KERNEL, KERNEL, c_in, self.filters)
        self.params = {
            "kernel": glorot_uniform_init(9 * c_in, 9 * self.filters, rng, shape)
            if rng is not None else np.zeros(shape),
            "bias": np.zeros(self.filters),
        }
        return out

    def _forward(self, x, train, rng):
        out, cols = _conv_forward(x, self.params["kernel"], self.params["bias"], self.padding)
        return out, cols

    def _backward(self, grad_out, cache, need_input_grad=True):
        dx, dk, db = conv2d_backward(
            grad_out, cache.input_shape, cache.data, self.params["kernel"], self.padding,
            need_input_grad,
        )
        return dx, {"kernel": dk, "bias": db}

    def _param_grads_only(self, grad_out, cache):
        return self._backward(grad_out, cache, need_input_grad=False)


class MaxPool2D(Layer):
    kind = "maxpool2d"

    def _output_shape(self, input_shape):
        if len(input_shape) != 3:
            raise ShapeError(f"MaxPool2D needs HxWxC input, got {input_shape}")
        h, w, c = input_shape
        return (*pool_output_hw(h, w), c)

    def _forward(self, x, train, rng):
        return maxpool2_forward(x)

    def _backward(self, grad_out, cache):
        return maxpool2_backward(grad_out, cache.data, cache.input_shape), {}


class Dropout(Layer):
    """Inverted dropout: survivors are scaled by ``1/(1-rate)`` at train time."""

    kind = "dropout"

    def __init__(self, rate=0.25):
        super().__init__()
        if not 0.0 < rate < 1.0:
            raise ValidationError(f"dropout rate must lie in (0, 1), got {rate}")
        self.rate = float(rate)

    def config(self):
        return {"rate": self.rate}

    def _forward(self, x, train, rng):
        if not train:
            return x, None
        if rng is None:
            raise ValidationError("Dropout in training mode needs a random generator")
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * mask, mask

    def _backward(self, grad_out, cache):
        if cache.data is None:
            return grad_out, {}
        return grad_out * cache.data, {}


class Flatten(Layer):
    """Row-major flatten: index order is height, then width, then channel."""

    kind = "flatten"

    def _output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def _forward(self, x, train, rng):
        return x.reshape(x.shape[0], -1), None

    def _backward(self, grad_out, cache):
        return grad_out.reshape(cache.input_shape), {}


class Relu(Layer):
    kind = "relu"

    def _forward(self, x, train, rng):
        return np.maximum(x, 0.0), x > 0

    def _backward(self, grad_out, cache):
        return grad_out * cache.data, {}


class SoftmaxOutput(Layer):
    kind = "softmax"

    def __init__(self, units=3):
        super().__init__()
        self.units = int(units)

    def config(self):
        return {"units": self.units}

    def _output_shape(self, input_shape):
        if input_shape != (self.units,):
            raise ShapeError(f"softmax expects {self.units} logits, got {input_shape}")
        return input_shape

    def _forward(self, x, train, rng):
        p = softmax(x)
        return p, p

    def _backward(self, grad_out, cache):
        p = cache.data
        return p * (grad_out - (grad_out * p).sum(axis=1, keepdims=True)), {}


LAYER_TYPES = {
    cls.kind: cls for cls in (Dense, Conv2D, MaxPool2D, Dropout, Flatten, Relu, SoftmaxOutput)
}


def layer_forward(layer, x, train=False, rng=None):
    return layer.forward(x, train=train, rng=rng)


def layer_backward(layer, grad_out, cache, need_input_grad=True):
    return layer.backward(grad_out, cache, need_input_grad)
