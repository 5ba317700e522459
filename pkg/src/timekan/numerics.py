"""Dense tensors, parameters, seeded initialization and a central-difference gradient oracle.

Tensors are plain ``numpy.ndarray`` objects in row-major ``(batch, length, channels)``
layout with float64 as the default dtype.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NumericalError, ShapeError

DEFAULT_DTYPE = np.float64


def make_rng(seed: int) -> np.random.Generator:
    # PCG64 is a fully specified generator: identical streams on every platform.
    return np.random.Generator(np.random.PCG64(int(seed)))


def as_tensor(x, dtype=DEFAULT_DTYPE) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=dtype)
    if arr.ndim > 3:
        raise ShapeError(f"tensors have rank <= 3, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericalError("tensor contains NaN or Inf")
    return arr


_ELEMENTWISE = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
}


def tensor_elementwise(op: str, a, b=None) -> np.ndarray:
    """Apply ``add``/``sub``/``mul`` (tensor-tensor or tensor-scalar) or unary ``tanh``."""
    a = np.asarray(a, dtype=DEFAULT_DTYPE)
    if op == "tanh":
        return np.tanh(a)
    if op not in _ELEMENTWISE:
        raise ValueError(f"unknown elementwise op {op!r}")
    if np.ndim(b) != 0:
        b = np.asarray(b, dtype=DEFAULT_DTYPE)
        if b.shape != a.shape:
            raise ShapeError(f"shape mismatch for {op}: {a.shape} vs {b.shape}")
    return _ELEMENTWISE[op](a, b)


@dataclass
class Parameter:
    name: str
    value: np.ndarray
    grad: np.ndarray = field(init=False)
    m: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)

    def __post_init__(self):
        self.value = np.ascontiguousarray(self.value)
        self.grad = np.zeros_like(self.value)
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def accumulate(self, g: np.ndarray) -> None:
        if g.shape != self.value.shape:
            raise ShapeError(f"gradient for {self.name} has shape {g.shape}, expected {self.value.shape}")
        self.grad += g


def init_parameter(rng: np.random.Generator, shape, scheme: str = "uniform_fan_in",
                   name: str = "", fan_in: int | None = None, dtype=DEFAULT_DTYPE) -> Parameter:
    """Create a parameter with zeroed grad and moments.

    ``uniform_fan_in`` draws from U(-1/sqrt(fan_in), 1/sqrt(fan_in)); ``fan_in`` defaults
    to the product of every extent except the leading (output) one.
    """
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    if any(s < 1 for s in shape):
        raise ShapeError(f"invalid parameter shape {shape}")
    if scheme == "zeros":
        value = np.zeros(shape, dtype=dtype)
    elif scheme == "uniform_fan_in":
        if fan_in is None:
            fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else shape[0]
        bound = 1.0 / np.sqrt(fan_in)
        value = rng.uniform(-bound, bound, size=shape).astype(dtype)
    else:
        raise ValueError(f"unknown init scheme {scheme!r}")
    return Parameter(name, value)


def finite_difference_grad(f: Callable[[np.ndarray], float], x, eps: float = 1e-6) -> np.ndarray:
    """Central differences of scalar ``f`` at ``x``, one coordinate at a time."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + eps
        fp = float(f(x))
        flat[j] = orig - eps
        fm = float(f(x))
        flat[j] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            idx = tuple(int(i) for i in np.unravel_index(j, x.shape))
            raise NumericalError(f"non-finite function value at coordinate {idx}")
        gflat[j] = (fp - fm) / (2.0 * eps)
    return grad


def relative_error(a, b) -> float:
    """max |a-b| / max(1, |a|, |b|) over all elements."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"cannot compare shapes {a.shape} and {b.shape}")
    if a.size == 0:
        return 0.0
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom))
