"""Frequency-domain resampling, moving-average downsampling and band residuals.

All functions are pure. Resampling functions act on one axis (default: last) and treat
every other axis as batch.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import ConfigError, ShapeError
from .fft import irfft, rfft

__all__ = [
    "rfft",
    "irfft",
    "moving_average_downsample",
    "frequency_upsample",
    "frequency_upsample_adjoint",
    "linear_interp_upsample",
    "linear_interp_upsample_adjoint",
    "band_residual",
    "effective_frequency_count",
    "UPSAMPLERS",
]


def _float_array(x) -> np.ndarray:
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(np.float64)
    return x


def moving_average_downsample(x, d: int, axis: int = -1) -> np.ndarray:
    """Replicate the last sample up to a multiple of ``d``, then take window means (stride ``d``)."""
    if d < 2:
        raise ConfigError(f"moving-average window must be >= 2, got {d}")
    x = np.moveaxis(np.asarray(x, dtype=np.float64), axis, -1)
    L = x.shape[-1]
    if L < 1:
        raise ShapeError("cannot downsample an empty sequence")
    pad = -L % d
    if pad:
        x = np.concatenate([x, np.repeat(x[..., -1:], pad, axis=-1)], axis=-1)
    out = x.reshape(x.shape[:-1] + (x.shape[-1] // d, d)).mean(axis=-1)
    return np.moveaxis(out, -1, axis)


def frequency_upsample(x, out_length: int, axis: int = -1) -> np.ndarray:
    """Band-limited (trigonometric) interpolation by zero-padding the real spectrum.

    The spectrum is scaled by ``out_length / L_in`` so amplitudes are preserved, and an
    even-length input's Nyquist bin is halved so the result is the real minimum-energy
    interpolant.
    """
    x = np.moveaxis(_float_array(x), axis, -1)
    L_in = x.shape[-1]
    if L_in < 1 or out_length < L_in:
        raise ShapeError(f"frequency_upsample needs out_length >= input length >= 1, got {L_in} -> {out_length}")
    if out_length == L_in:
        return np.moveaxis(x.copy(), -1, axis)
    X = rfft(x) * (out_length / L_in)
    if L_in % 2 == 0:
        X[..., L_in // 2] *= 0.5
    padded = np.zeros(X.shape[:-1] + (out_length // 2 + 1,), dtype=complex)
    padded[..., : X.shape[-1]] = X
    out = irfft(padded, out_length).astype(x.dtype, copy=False)
    return np.moveaxis(out, -1, axis)


def frequency_upsample_adjoint(v, in_length: int, axis: int = -1) -> np.ndarray:
    """Transpose of :func:`frequency_upsample`: maps length ``L_out`` back to ``in_length``."""
    v = np.moveaxis(_float_array(v), axis, -1)
    L_out = v.shape[-1]
    if in_length < 1 or L_out < in_length:
        raise ShapeError(f"adjoint needs input length >= in_length >= 1, got {L_out} -> {in_length}")
    if L_out == in_length:
        return np.moveaxis(v.copy(), -1, axis)
    # Truncating the spectrum is the transpose of scale + pad + inverse; the halved Nyquist
    # pair collapses to the real part of the single kept bin.
    V = rfft(v)[..., : in_length // 2 + 1]
    out = irfft(V, in_length).astype(v.dtype, copy=False)
    return np.moveaxis(out, -1, axis)


@lru_cache(maxsize=None)
def _linear_interp_matrix(L_in: int, L_out: int) -> np.ndarray:
    W = np.zeros((L_out, L_in))
    if L_in == 1:
        W[:, 0] = 1.0
        return W
    pos = np.arange(L_out) * (L_in - 1) / (L_out - 1) if L_out > 1 else np.zeros(1)
    lo = np.minimum(np.floor(pos).astype(int), L_in - 2)
    frac = pos - lo
    rows = np.arange(L_out)
    W[rows, lo] += 1.0 - frac
    W[rows, lo + 1] += frac
    W.setflags(write=False)
    return W


def linear_interp_upsample(x, out_length: int, axis: int = -1) -> np.ndarray:
    """Piecewise-linear interpolation with both endpoints pinned."""
    x = np.moveaxis(_float_array(x), axis, -1)
    if out_length < x.shape[-1]:
        raise ShapeError(f"linear_interp_upsample cannot shrink {x.shape[-1]} -> {out_length}")
    W = _linear_interp_matrix(x.shape[-1], out_length)
    return np.moveaxis(x @ W.T.astype(x.dtype, copy=False), -1, axis)


def linear_interp_upsample_adjoint(v, in_length: int, axis: int = -1) -> np.ndarray:
    v = np.moveaxis(_float_array(v), axis, -1)
    W = _linear_interp_matrix(in_length, v.shape[-1])
    return np.moveaxis(v @ W.astype(v.dtype, copy=False), -1, axis)


# name -> (forward, adjoint)
UPSAMPLERS = {
    "frequency": (frequency_upsample, frequency_upsample_adjoint),
    "linear_interp": (linear_interp_upsample, linear_interp_upsample_adjoint),
}


def band_residual(x_i, x_next, upsampler: str = "frequency") -> np.ndarray:
    """Content of level ``i`` missing from level ``i+1``: ``x_i - up(x_next)`` along axis -2."""
    x_i = np.asarray(x_i)
    x_next = np.asarray(x_next)
    if x_i.ndim < 2 or x_i.shape[:-2] != x_next.shape[:-2] or x_i.shape[-1] != x_next.shape[-1]:
        raise ShapeError(f"band_residual shape mismatch: {x_i.shape} vs {x_next.shape}")
    if x_next.shape[-2] > x_i.shape[-2]:
        raise ShapeError(f"lower level is longer than upper level: {x_next.shape} vs {x_i.shape}")
    up, _ = UPSAMPLERS[upsampler]
    return x_i - up(x_next, x_i.shape[-2], axis=-2)


def effective_frequency_count(x, threshold_ratio: float = 0.1) -> int:
    """Number of rfft bins whose amplitude exceeds ``threshold_ratio`` times the peak."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise ShapeError("effective_frequency_count needs a non-empty series")
    amp = np.abs(rfft(x))
    peak = amp.max()
    if peak == 0.0:
        return 0
    return int(np.count_nonzero(amp > threshold_ratio * peak))
