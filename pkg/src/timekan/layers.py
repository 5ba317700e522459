"""Learnable blocks with explicit forward and backward passes.

Inputs are ``(batch, length, channels)`` arrays. ``backward(x, grad_out)`` recomputes what
it needs from ``x``, accumulates parameter gradients into ``Parameter.grad`` and returns
``(grad_x, *param_grads)``.
"""
from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .numerics import DEFAULT_DTYPE, Parameter, init_parameter


def chebyshev_basis(x, n: int) -> np.ndarray:
    """Stack ``[T_0(x), ..., T_n(x)]`` on a new trailing axis (three-term recurrence)."""
    x = np.asarray(x, dtype=np.float64) if not isinstance(x, np.ndarray) else x
    if n < 0:
        raise ValueError("Chebyshev order must be >= 0")
    if np.any(np.abs(x) > 1.0):
        raise ValueError("Chebyshev basis is defined on [-1, 1]; got a value outside it")
    return _chebyshev_t(x, n)


def _chebyshev_t(t: np.ndarray, n: int) -> np.ndarray:
    out = np.empty(t.shape + (n + 1,), dtype=t.dtype)
    out[..., 0] = 1.0
    if n >= 1:
        out[..., 1] = t
    for j in range(1, n):
        out[..., j + 1] = 2.0 * t * out[..., j] - out[..., j - 1]
    return out


def _chebyshev_t_derivative(t: np.ndarray, n: int) -> np.ndarray:
    # d T_i / dt = i * U_{i-1}(t), second-kind polynomials via their own recurrence.
    out = np.zeros(t.shape + (n + 1,), dtype=t.dtype)
    if n == 0:
        return out
    u_prev = np.ones_like(t)
    out[..., 1] = u_prev
    if n >= 2:
        u = 2.0 * t
        out[..., 2] = 2.0 * u
        for i in range(3, n + 1):
            u_prev, u = u, 2.0 * t * u - u_prev
            out[..., i] = i * u
    return out


def _check_channels(x: np.ndarray, expected: int, what: str) -> None:
    if x.ndim != 3 or x.shape[-1] != expected:
        raise ShapeError(f"{what} expects (batch, length, {expected}) input, got {x.shape}")


class ChebyKanLayer:
    """Channel-wise KAN: ``out_o = sum_j sum_i theta[o, j, i] * T_i(tanh(x_j))``."""

    def __init__(self, d_in: int, d_out: int, order: int, rng=None, name: str = "kan", dtype=DEFAULT_DTYPE):
        if order < 0:
            raise ValueError("KAN order must be >= 0")
        self.d_in, self.d_out, self.order = d_in, d_out, order
        scheme = "zeros" if rng is None else "uniform_fan_in"
        self.theta = init_parameter(rng, (d_out, d_in, order + 1), scheme, name=f"{name}.theta", dtype=dtype)

    def parameters(self) -> list[Parameter]:
        return [self.theta]

    def forward(self, x: np.ndarray) -> np.ndarray:
        _check_channels(x, self.d_in, "ChebyKanLayer")
        basis = _chebyshev_t(np.tanh(x), self.order)
        flat = basis.reshape(-1, self.d_in * (self.order + 1))
        y = flat @ self.theta.value.reshape(self.d_out, -1).T
        return y.reshape(x.shape[:-1] + (self.d_out,))

    def backward(self, x: np.ndarray, grad_out: np.ndarray):
        _check_channels(x, self.d_in, "ChebyKanLayer")
        t = np.tanh(x)
        basis = _chebyshev_t(t, self.order)
        n1 = self.order + 1
        g = grad_out.reshape(-1, self.d_out)
        grad_theta = (g.T @ basis.reshape(-1, self.d_in * n1)).reshape(self.theta.shape)
        g_basis = (g @ self.theta.value.reshape(self.d_out, -1)).reshape(basis.shape)
        g_t = np.einsum("...jn,...jn->...j", g_basis, _chebyshev_t_derivative(t, self.order))
        grad_x = g_t * (1.0 - t * t)
        self.theta.accumulate(grad_theta)
        return grad_x, grad_theta


class DepthwiseConv:
    """Per-channel 1-D cross-correlation, zero 'same' padding, stride 1, plus bias."""

    def __init__(self, channels: int, kernel_size: int = 3, rng=None, name: str = "conv", dtype=DEFAULT_DTYPE):
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {kernel_size}")
        self.channels, self.kernel_size = channels, kernel_size
        scheme = "zeros" if rng is None else "uniform_fan_in"
        self.kernels = init_parameter(rng, (channels, kernel_size), scheme, name=f"{name}.kernels", dtype=dtype)
        self.bias = init_parameter(rng, (channels,), scheme, name=f"{name}.bias",
                                   fan_in=kernel_size, dtype=dtype)

    def parameters(self) -> list[Parameter]:
        return [self.kernels, self.bias]

    def _padded(self, x: np.ndarray) -> np.ndarray:
        h = (self.kernel_size - 1) // 2
        return np.pad(x, ((0, 0), (h, h), (0, 0)))

    def forward(self, x: np.ndarray) -> np.ndarray:
        _check_channels(x, self.channels, "DepthwiseConv")
        L = x.shape[1]
        xp = self._padded(x)
        k = self.kernels.value
        y = np.empty_like(x)
        y[...] = self.bias.value
        for m in range(self.kernel_size):
            y += xp[:, m:m + L, :] * k[:, m]
        return y

    def backward(self, x: np.ndarray, grad_out: np.ndarray):
        _check_channels(x, self.channels, "DepthwiseConv")
        L = x.shape[1]
        h = (self.kernel_size - 1) // 2
        xp = self._padded(x)
        k = self.kernels.value
        grad_k = np.empty_like(k)
        gxp = np.zeros_like(xp)
        for m in range(self.kernel_size):
            grad_k[:, m] = np.einsum("blc,blc->c", grad_out, xp[:, m:m + L, :])
            gxp[:, m:m + L, :] += grad_out * k[:, m]
        grad_b = grad_out.sum(axis=(0, 1))
        self.kernels.accumulate(grad_k)
        self.bias.accumulate(grad_b)
        return gxp[:, h:h + L, :], grad_k, grad_b


class LinearMap:
    """Affine map along one axis: ``channel`` (last) or ``time`` (axis 1)."""

    def __init__(self, in_dim: int, out_dim: int, axis: str = "channel", rng=None,
                 name: str = "linear", dtype=DEFAULT_DTYPE):
        if axis not in ("channel", "time"):
            raise ValueError(f"axis must be 'channel' or 'time', got {axis!r}")
        self.in_dim, self.out_dim, self.axis = in_dim, out_dim, axis
        scheme = "zeros" if rng is None else "uniform_fan_in"
        self.weight = init_parameter(rng, (out_dim, in_dim), scheme, name=f"{name}.weight", dtype=dtype)
        self.bias = init_parameter(rng, (out_dim,), scheme, name=f"{name}.bias", fan_in=in_dim, dtype=dtype)

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def _check(self, x: np.ndarray) -> None:
        ax = -1 if self.axis == "channel" else 1
        if x.ndim != 3 or x.shape[ax] != self.in_dim:
            raise ShapeError(f"LinearMap({self.axis}) expects extent {self.in_dim} on its axis, got shape {x.shape}")

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._check(x)
        W, b = self.weight.value, self.bias.value
        if self.axis == "channel":
            return x @ W.T + b
        return W @ x + b[:, None]

    def backward(self, x: np.ndarray, grad_out: np.ndarray):
        self._check(x)
        W = self.weight.value
        if self.axis == "channel":
            grad_x = grad_out @ W
            grad_w = grad_out.reshape(-1, self.out_dim).T @ x.reshape(-1, self.in_dim)
            grad_b = grad_out.sum(axis=(0, 1))
        else:
            grad_x = W.T @ grad_out
            grad_w = np.tensordot(grad_out, x, axes=([0, 2], [0, 2]))
            grad_b = grad_out.sum(axis=(0, 2))
        self.weight.accumulate(grad_w)
        self.bias.accumulate(grad_b)
        return grad_x, grad_w, grad_b


class MlpBlock:
    """Ablation stand-in for a KAN: channel Linear D->D, tanh, channel Linear D->D."""

    def __init__(self, channels: int, rng=None, name: str = "mlp", dtype=DEFAULT_DTYPE):
        self.channels = channels
        self.fc1 = LinearMap(channels, channels, "channel", rng, name=f"{name}.fc1", dtype=dtype)
        self.fc2 = LinearMap(channels, channels, "channel", rng, name=f"{name}.fc2", dtype=dtype)

    def parameters(self) -> list[Parameter]:
        return self.fc1.parameters() + self.fc2.parameters()

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.fc2.forward(np.tanh(self.fc1.forward(x)))

    def backward(self, x: np.ndarray, grad_out: np.ndarray):
        h = np.tanh(self.fc1.forward(x))
        g_h, *_ = self.fc2.backward(h, grad_out)
        grad_x, *_ = self.fc1.backward(x, g_h * (1.0 - h * h))
        return (grad_x,)
