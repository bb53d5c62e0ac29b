"""Minimal NumPy network layers with exact analytic gradients.

Desk-scale by design: strided 3x3 convolutions via im2col, tanh
activations (smooth, so finite-difference gradient checks are clean), and a
flat parameter vector interface for the optimizer and for checkpointing.
"""

from __future__ import annotations

import numpy as np


class Layer:
    params: list[np.ndarray]
    grads: list[np.ndarray]

    def __init__(self):
        self.params = []
        self.grads = []

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _im2col(x: np.ndarray, k: int, stride: int, pad: int) -> np.ndarray:
    n, c, h, w = x.shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((n, c, k, k, oh, ow), dtype=x.dtype)
    for ki in range(k):
        for kj in range(k):
            cols[:, :, ki, kj] = xp[:, :, ki : ki + stride * oh : stride,
                                    kj : kj + stride * ow : stride]
    return cols.reshape(n, c * k * k, oh * ow)


def _col2im(cols: np.ndarray, x_shape, k: int, stride: int, pad: int) -> np.ndarray:
    n, c, h, w = x_shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    cols = cols.reshape(n, c, k, k, oh, ow)
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for ki in range(k):
        for kj in range(k):
            xp[:, :, ki : ki + stride * oh : stride,
               kj : kj + stride * ow : stride] += cols[:, :, ki, kj]
    if pad:
        return xp[:, :, pad:-pad, pad:-pad]
    return xp


class Conv2d(Layer):
    def __init__(self, c_in: int, c_out: int, k: int = 3, stride: int = 2,
                 pad: int = 1, rng: np.random.Generator | None = None):
        super().__init__()
        self.c_in, self.c_out, self.k, self.stride, self.pad = c_in, c_out, k, stride, pad
        scale = np.sqrt(2.0 / (c_in * k * k))
        rng = rng or np.random.default_rng(0)
        weight = rng.normal(0.0, scale, size=(c_out, c_in * k * k))
        bias = np.zeros(c_out)
        self.params = [weight, bias]
        self.grads = [np.zeros_like(weight), np.zeros_like(bias)]
        self._cache = None

    def forward(self, x):
        n, c, h, w = x.shape
        cols = _im2col(x, self.k, self.stride, self.pad)
        out = np.einsum("oi,nil->nol", self.params[0], cols, optimize=True)
        out += self.params[1][None, :, None]
        oh = (h + 2 * self.pad - self.k) // self.stride + 1
        ow = (w + 2 * self.pad - self.k) // self.stride + 1
        self._cache = (x.shape, cols)
        return out.reshape(n, self.c_out, oh, ow)

    def backward(self, dout):
        x_shape, cols = self._cache
        n = dout.shape[0]
        dflat = dout.reshape(n, self.c_out, -1)
        self.grads[0] += np.einsum("nol,nil->oi", dflat, cols, optimize=True)
        self.grads[1] += dflat.sum(axis=(0, 2))
        dcols = np.einsum("oi,nol->nil", self.params[0], dflat, optimize=True)
        return _col2im(dcols, x_shape, self.k, self.stride, self.pad)


class Dense(Layer):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator | None = None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        weight = rng.normal(0.0, np.sqrt(1.0 / d_in), size=(d_in, d_out))
        bias = np.zeros(d_out)
        self.params = [weight, bias]
        self.grads = [np.zeros_like(weight), np.zeros_like(bias)]
        self._cache = None

    def forward(self, x):
        self._cache = x
        return x @ self.params[0] + self.params[1]

    def backward(self, dout):
        x = self._cache
        self.grads[0] += x.T @ dout
        self.grads[1] += dout.sum(axis=0)
        return dout @ self.params[0].T


class Tanh(Layer):
    def __init__(self):
        super().__init__()
        self._out = None

    def forward(self, x):
        self._out = np.tanh(x)
        return self._out

    def backward(self, dout):
        return dout * (1.0 - self._out ** 2)


class Softplus(Layer):
    """log(1 + exp(x)): smooth and non-saturating above, so deep trunks keep
    useful gradients where tanh would pin at +/-1."""

    def __init__(self):
        super().__init__()
        self._sig = None

    def forward(self, x):
        self._sig = 1.0 / (1.0 + np.exp(-x))
        return np.logaddexp(0.0, x)

    def backward(self, dout):
        return dout * self._sig


class ScaledTanh(Layer):
    """y = scale * tanh(x); bounds the output in (-scale, scale)."""

    def __init__(self, scale: float):
        super().__init__()
        self.scale = scale
        self._t = None

    def forward(self, x):
        self._t = np.tanh(x)
        return self.scale * self._t

    def backward(self, dout):
        return dout * self.scale * (1.0 - self._t ** 2)


class AvgPool2d(Layer):
    """Non-overlapping k x k mean pooling (spatial dims must divide by k)."""

    def __init__(self, k: int):
        super().__init__()
        self.k = k
        self._shape = None

    def forward(self, x):
        n, c, h, w = x.shape
        k = self.k
        if h % k or w % k:
            raise ValueError(f"pool factor {k} must divide spatial dims {(h, w)}")
        self._shape = x.shape
        return x.reshape(n, c, h // k, k, w // k, k).mean(axis=(3, 5))

    def backward(self, dout):
        n, c, h, w = self._shape
        k = self.k
        up = np.repeat(np.repeat(dout, k, axis=2), k, axis=3)
        return up / (k * k)


class L2NormScale(Layer):
    """y = scale * x / ||x||: embeds each row on a radius-``scale`` sphere.

    Keeps every component in [-scale, scale] without the vanishing gradients
    of a saturating tanh, and makes the cosine match geometry native.
    """

    def __init__(self, scale: float):
        super().__init__()
        self.scale = scale
        self._cache = None

    def forward(self, x):
        norms = np.maximum(np.sqrt((x ** 2).sum(axis=1, keepdims=True)), 1e-12)
        unit = x / norms
        self._cache = (unit, norms)
        return self.scale * unit

    def backward(self, dout):
        unit, norms = self._cache
        radial = (dout * unit).sum(axis=1, keepdims=True)
        return self.scale * (dout - radial * unit) / norms


class Flatten(Layer):
    def __init__(self):
        super().__init__()
        self._shape = None

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._shape)


class Sequential:
    def __init__(self, layers: list[Layer]):
        self.layers = layers

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def zero_grad(self):
        for layer in self.layers:
            for g in layer.grads:
                g[...] = 0.0

    def param_arrays(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params]

    def grad_arrays(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads]

    def get_theta(self) -> np.ndarray:
        arrays = self.param_arrays()
        if not arrays:
            return np.zeros(0)
        return np.concatenate([p.ravel() for p in arrays])

    def set_theta(self, theta: np.ndarray) -> None:
        offset = 0
        for p in self.param_arrays():
            p[...] = theta[offset : offset + p.size].reshape(p.shape)
            offset += p.size
        if offset != theta.size:
            raise ValueError(f"theta has {theta.size} entries, model needs {offset}")

    def get_grad(self) -> np.ndarray:
        arrays = self.grad_arrays()
        if not arrays:
            return np.zeros(0)
        return np.concatenate([g.ravel() for g in arrays])


class Adam:
    """Adam with the conventional bias correction (beta1 is the momentum) and
    decoupled weight decay."""

    def __init__(self, n_params: int, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.weight_decay = weight_decay
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad ** 2
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        theta = theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        if self.weight_decay:
            theta = theta - self.lr * self.weight_decay * theta
        return theta
