"""Mixed-radix FFT over the last axis, with Bluestein's algorithm for large prime lengths.

Conventions: forward is unnormalized, ``X[k] = sum_n x[n] exp(-2j*pi*k*n/L)``; the inverse
carries the 1/L factor.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

# Prime lengths up to this size are transformed with a dense DFT matrix.
_DIRECT_PRIME_LIMIT = 32
# Real transforms up to this length use a dense real cos/sin matrix: one BLAS product beats
# the recursion's Python overhead at the look-back lengths the model sees.
_DENSE_REAL_LIMIT = 128


@lru_cache(maxsize=None)
def _smallest_factor(n: int) -> int:
    if n % 2 == 0:
        return 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return f
        f += 2
    return n


@lru_cache(maxsize=None)
def _dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)


@lru_cache(maxsize=None)
def _twiddles(p: int, m: int) -> np.ndarray:
    r = np.arange(p)[:, None]
    k = np.arange(m)[None, :]
    return np.exp(-2j * np.pi * r * k / (p * m))


@lru_cache(maxsize=None)
def _bluestein_plan(n: int):
    size = 1 << (2 * n - 2).bit_length()
    k = np.arange(n)
    # k^2 mod 2n keeps the chirp argument small for large n.
    chirp = np.exp(-1j * np.pi * ((k * k) % (2 * n)) / n)
    b = np.zeros(size, dtype=complex)
    b[:n] = np.conj(chirp)
    b[size - n + 1:] = np.conj(chirp[1:])[::-1]
    return size, chirp, _fft(b)


def _bluestein(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    size, chirp, b_hat = _bluestein_plan(n)
    a = np.zeros(x.shape[:-1] + (size,), dtype=complex)
    a[..., :n] = x * chirp
    conv = _ifft(_fft(a) * b_hat)
    return conv[..., :n] * chirp


def _fft(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    if n == 1:
        return x.astype(complex, copy=True)
    p = _smallest_factor(n)
    if p == n:
        if n <= _DIRECT_PRIME_LIMIT:
            return x @ _dft_matrix(n)
        return _bluestein(x)
    m = n // p
    # sub[..., r, j] = x[..., j*p + r]: decimation in time into p interleaved subsequences.
    sub = x.reshape(x.shape[:-1] + (m, p)).swapaxes(-1, -2)
    y = _fft(sub) * _twiddles(p, m)
    out = _dft_matrix(p) @ y
    return out.reshape(x.shape[:-1] + (n,))


@lru_cache(maxsize=None)
def _real_forward_matrices(n: int):
    k = np.arange(n // 2 + 1)
    angle = 2 * np.pi * np.outer(np.arange(n), k) / n
    return np.cos(angle), -np.sin(angle)


@lru_cache(maxsize=None)
def _real_inverse_matrices(n: int):
    k = np.arange(n // 2 + 1)
    weight = np.full(k.size, 2.0)
    weight[0] = 1.0
    if n % 2 == 0:
        weight[-1] = 1.0
    angle = 2 * np.pi * np.outer(k, np.arange(n)) / n
    # Rows interleave (re, im) to match a float64 view of a complex array. sin vanishes at
    # DC and Nyquist, so their imaginary parts drop out.
    out = np.empty((2 * k.size, n))
    out[0::2] = weight[:, None] * np.cos(angle) / n
    out[1::2] = -weight[:, None] * np.sin(angle) / n
    return out


def _ifft(X: np.ndarray) -> np.ndarray:
    return np.conj(_fft(np.conj(X))) / X.shape[-1]


def fft(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.shape[-1] < 1:
        raise ValueError("fft needs at least one sample")
    return _fft(x)


def ifft(X) -> np.ndarray:
    X = np.asarray(X, dtype=complex)
    if X.shape[-1] < 1:
        raise ValueError("ifft needs at least one sample")
    return _ifft(X)


def rfft(x) -> np.ndarray:
    """Spectrum of a real signal: the ``L//2 + 1`` non-negative frequency bins."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if n < 1:
        raise ValueError("rfft needs at least one sample")
    if n <= _DENSE_REAL_LIMIT:
        cos, sin = _real_forward_matrices(n)
        X = (x @ cos) + 1j * (x @ sin)
    else:
        X = _fft(x.astype(complex))[..., : n // 2 + 1].copy()
    X[..., 0] = X[..., 0].real
    if n % 2 == 0:
        X[..., n // 2] = X[..., n // 2].real
    return X


def irfft(X, n: int) -> np.ndarray:
    """Inverse of :func:`rfft` for output length ``n``.

    The imaginary parts of the DC bin and (for even ``n``) the Nyquist bin are ignored.
    """
    X = np.asarray(X, dtype=complex)
    if n < 1:
        raise ValueError("output length must be positive")
    if X.shape[-1] != n // 2 + 1:
        raise ValueError(f"spectrum has {X.shape[-1]} bins, length {n} needs {n // 2 + 1}")
    if n <= _DENSE_REAL_LIMIT:
        return np.ascontiguousarray(X).view(np.float64) @ _real_inverse_matrices(n)
    full = np.empty(X.shape[:-1] + (n,), dtype=complex)
    full[..., : n // 2 + 1] = X
    full[..., 0] = X[..., 0].real
    if n % 2 == 0:
        full[..., n // 2] = X[..., n // 2].real
    # Hermitian fill: bin n-k mirrors bin k.
    upper = n - (n // 2 + 1)
    if upper:
        full[..., n // 2 + 1:] = np.conj(X[..., 1: upper + 1][..., ::-1])
    return _ifft(full).real.copy()
