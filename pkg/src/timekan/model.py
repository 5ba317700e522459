"""TimeKAN: hierarchical preprocessing, Decomposition-Learning-Mixing blocks and a linear head."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ConfigError, NumericalError, ShapeError
from .layers import ChebyKanLayer, DepthwiseConv, LinearMap, MlpBlock
from .numerics import Parameter, make_rng
from .spectral import UPSAMPLERS, moving_average_downsample

NORM_EPS = 1e-5


@dataclass
class ModelConfig:
    T: int = 96
    F: int = 96
    D: int = 16
    k: int = 4
    d: int = 2
    b: int = 2
    M: int = 3
    blocks: int = 1
    order_policy: str = "multi_order"  # "multi_order" | "fixed:<n>" | "mlp"
    upsampler: str = "frequency"  # "frequency" | "linear_interp"
    instance_norm: bool = True
    precision: str = "float64"  # "float64" | "float32"
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("T", "F", "D"):
            if getattr(self, name) < 1:
                raise ConfigError(f"model.{name} must be positive")
        if self.k < 2:
            raise ConfigError("model.k must be >= 2")
        if self.d < 2:
            raise ConfigError("model.d must be >= 2")
        if self.b < 1:
            raise ConfigError("model.b must be >= 1")
        if self.blocks < 1:
            raise ConfigError("model.blocks must be >= 1")
        if self.M < 1 or self.M % 2 == 0:
            raise ConfigError("model.M must be odd")
        if self.T % self.d ** (self.k - 1) != 0:
            raise ConfigError(f"model.T={self.T} must be divisible by d^(k-1)={self.d ** (self.k - 1)}")
        if self.upsampler not in UPSAMPLERS:
            raise ConfigError(f"model.upsampler must be one of {sorted(UPSAMPLERS)}")
        if self.precision not in ("float64", "float32"):
            raise ConfigError("model.precision must be float64 or float32")
        self.kan_orders()  # validates order_policy

    def kan_orders(self) -> list[int] | None:
        """Per-level Chebyshev order, level 1 first; ``None`` under the MLP policy."""
        policy = self.order_policy
        if policy == "multi_order":
            return [self.b + self.k - i for i in range(1, self.k + 1)]
        if policy == "mlp":
            return None
        if policy.startswith("fixed:"):
            try:
                n = int(policy.split(":", 1)[1])
            except ValueError:
                n = -1
            if n < 0:
                raise ConfigError(f"bad order policy {policy!r}")
            return [n] * self.k
        raise ConfigError(f"model.order_policy must be multi_order, fixed:<n> or mlp; got {policy!r}")

    def level_lengths(self) -> list[int]:
        return [self.T // self.d ** i for i in range(self.k)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**data)


class TimeKanModel:
    def __init__(self, config: ModelConfig):
        config.validate()
        self.config = c = config
        self.dtype = np.dtype(c.precision)
        rng = make_rng(c.seed)
        self.embeddings = [LinearMap(1, c.D, "channel", rng, name=f"embed{i + 1}", dtype=self.dtype)
                           for i in range(c.k)]
        orders = c.kan_orders()
        self.convs: list[list[DepthwiseConv]] = []
        self.kans: list[list] = []
        for blk in range(c.blocks):
            convs, kans = [], []
            for i in range(c.k):
                prefix = f"block{blk + 1}.band{i + 1}"
                convs.append(DepthwiseConv(c.D, c.M, rng, name=f"{prefix}.conv", dtype=self.dtype))
                if orders is None:
                    kans.append(MlpBlock(c.D, rng, name=f"{prefix}.mlp", dtype=self.dtype))
                else:
                    kans.append(ChebyKanLayer(c.D, c.D, orders[i], rng, name=f"{prefix}.kan", dtype=self.dtype))
            self.convs.append(convs)
            self.kans.append(kans)
        self.head_time = LinearMap(c.T, c.F, "time", rng, name="head.time", dtype=self.dtype)
        self.head_channel = LinearMap(c.D, 1, "channel", rng, name="head.channel", dtype=self.dtype)
        self._up, self._up_adjoint = UPSAMPLERS[c.upsampler]
        self._cache = None

        for p in self.parameters():
            # Start from float32-representable values so checkpoint storage is lossless at init.
            p.value[...] = p.value.astype(np.float32)

        names = [p.name for p in self.parameters()]
        if len(names) != len(set(names)):
            raise ConfigError("duplicate parameter names")

    def parameters(self) -> list[Parameter]:
        params = []
        for emb in self.embeddings:
            params += emb.parameters()
        for convs, kans in zip(self.convs, self.kans):
            for conv, kan in zip(convs, kans):
                params += conv.parameters() + kan.parameters()
        params += self.head_time.parameters() + self.head_channel.parameters()
        return params

    def named_parameters(self) -> dict[str, Parameter]:
        return {p.name: p for p in self.parameters()}

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def kan_orders(self) -> list[int] | None:
        return self.config.kan_orders()

    # -- stages ---------------------------------------------------------------

    def raw_levels(self, x: np.ndarray) -> list[np.ndarray]:
        """Moving-average hierarchy of the scalar series, level 1 first."""
        levels = [x]
        for _ in range(self.config.k - 1):
            levels.append(moving_average_downsample(levels[-1], self.config.d, axis=-1).astype(x.dtype, copy=False))
        return levels

    def hierarchical_preprocess(self, x: np.ndarray) -> list[np.ndarray]:
        return [emb.forward(r[..., None]) for emb, r in zip(self.embeddings, self.raw_levels(x))]

    def cfd_decompose(self, levels: list[np.ndarray]) -> list[np.ndarray]:
        bands = [levels[i] - self._up(levels[i + 1], levels[i].shape[1], axis=1) for i in range(len(levels) - 1)]
        bands.append(levels[-1])
        return bands

    def mkan_learn(self, bands: list[np.ndarray], block_index: int) -> list[np.ndarray]:
        convs, kans = self.convs[block_index], self.kans[block_index]
        return [conv.forward(f) + kan.forward(f) for conv, kan, f in zip(convs, kans, bands)]

    def frequency_mix(self, learned: list[np.ndarray]) -> list[np.ndarray]:
        levels = [None] * len(learned)
        levels[-1] = learned[-1]
        for i in range(len(learned) - 2, -1, -1):
            levels[i] = self._up(levels[i + 1], learned[i].shape[1], axis=1) + learned[i]
        return levels

    # -- whole model ----------------------------------------------------------

    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 2 or x.shape[1] != self.config.T:
            raise ShapeError(f"model expects input of shape (batch, {self.config.T}), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise NumericalError("non-finite values in model input")
        return x

    @staticmethod
    def _check_stage(name: str, arrays) -> None:
        for a in arrays:
            if not np.all(np.isfinite(a)):
                raise NumericalError(f"non-finite values after stage '{name}'")

    def forward(self, x) -> np.ndarray:
        """Forecast ``(batch, F)`` from ``(batch, T)`` and cache intermediates for :meth:`backward`."""
        c = self.config
        x = self._check_input(x)
        if c.instance_norm:
            mean = x.mean(axis=1, keepdims=True)
            scale = x.std(axis=1, keepdims=True) + NORM_EPS
            xn = (x - mean) / scale
        else:
            mean = scale = None
            xn = x
        raw = self.raw_levels(xn)
        levels = [emb.forward(r[..., None]) for emb, r in zip(self.embeddings, raw)]
        self._check_stage("preprocess", levels)
        block_cache = []
        for blk in range(c.blocks):
            bands = self.cfd_decompose(levels)
            self._check_stage(f"block{blk + 1}.decompose", bands)
            learned = self.mkan_learn(bands, blk)
            self._check_stage(f"block{blk + 1}.mkan", learned)
            levels = self.frequency_mix(learned)
            self._check_stage(f"block{blk + 1}.mix", levels)
            block_cache.append(bands)
        x1 = levels[0]
        h = self.head_time.forward(x1)
        y = self.head_channel.forward(h)[..., 0]
        if c.instance_norm:
            y = y * scale + mean
        self._check_stage("head", [y])
        self._cache = {"raw": raw, "bands": block_cache, "x1": x1, "h": h, "scale": scale}
        return y

    __call__ = forward

    def backward(self, grad_out) -> None:
        """Accumulate d(loss)/d(param) into every ``Parameter.grad`` given d(loss)/d(forecast)."""
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        c = self.config
        cache = self._cache
        g = np.asarray(grad_out, dtype=self.dtype)
        if g.shape != (cache["x1"].shape[0], c.F):
            raise ShapeError(f"upstream gradient has shape {g.shape}, expected {(cache['x1'].shape[0], c.F)}")
        if c.instance_norm:
            g = g * cache["scale"]
        g_h, *_ = self.head_channel.backward(cache["h"], g[..., None])
        g_x1, *_ = self.head_time.backward(cache["x1"], g_h)

        lengths = c.level_lengths()
        g_levels = [g_x1] + [np.zeros((g_x1.shape[0], L, c.D), dtype=self.dtype) for L in lengths[1:]]
        for blk in range(c.blocks - 1, -1, -1):
            bands = cache["bands"][blk]
            # frequency_mix: x_k = fh_k, x_i = up(x_{i+1}) + fh_i
            g_learned = [None] * c.k
            carry = g_levels[0]
            g_learned[0] = carry
            for i in range(1, c.k):
                carry = g_levels[i] + self._up_adjoint(carry, lengths[i], axis=1)
                g_learned[i] = carry
            # mkan: fh_i = conv_i(f_i) + kan_i(f_i)
            g_bands = []
            for conv, kan, f, gl in zip(self.convs[blk], self.kans[blk], bands, g_learned):
                gc, *_ = conv.backward(f, gl)
                gk, *_ = kan.backward(f, gl)
                g_bands.append(gc + gk)
            # cfd_decompose: f_i = x_i - up(x_{i+1}), f_k = x_k
            g_levels = [g_bands[0]] + [
                g_bands[i] - self._up_adjoint(g_bands[i - 1], lengths[i], axis=1) for i in range(1, c.k)
            ]
        for emb, r, gl in zip(self.embeddings, cache["raw"], g_levels):
            emb.backward(r[..., None], gl)

    def forecast_multivariate(self, x) -> np.ndarray:
        """Shared-weight forecast of every variate: ``(batch, T, N) -> (batch, F, N)``."""
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 3:
            raise ShapeError(f"expected (batch, T, N), got {x.shape}")
        B, T, N = x.shape
        flat = x.transpose(0, 2, 1).reshape(B * N, T)
        y = self.forward(flat)
        return y.reshape(B, N, -1).transpose(0, 2, 1)

    # -- accounting -----------------------------------------------------------

    def count_params(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def estimate_macs(self, batch: int = 1) -> int:
        return estimate_macs(self.config, batch)

    # -- state ----------------------------------------------------------------

    def state_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.value.copy() for p in self.parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise ConfigError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, p in params.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ShapeError(f"{name}: stored shape {value.shape} != model shape {p.shape}")
            p.value[...] = value


def count_params(model: TimeKanModel) -> int:
    return model.count_params()


def _fft_cost(L: int) -> float:
    return 2.5 * L * math.log2(L) if L > 1 else 0.0


def estimate_macs(config: ModelConfig, batch: int = 1) -> int:
    """Closed-form multiply-accumulate estimate for one forward pass over ``batch`` series.

    FFTs are costed at 2.5*L*log2(L) per transform and channel.
    """
    c = config
    lengths = c.level_lengths()
    orders = c.kan_orders()
    per_block = 0.0
    for i, L in enumerate(lengths):
        per_block += L * c.D * c.M
        if orders is None:
            per_block += 2 * L * c.D * c.D
        else:
            per_block += L * c.D * c.D * (orders[i] + 1)
    for i in range(c.k - 1):
        hi, lo = lengths[i], lengths[i + 1]
        if c.upsampler == "frequency":
            one_up = c.D * (_fft_cost(lo) + _fft_cost(hi))
        else:
            one_up = c.D * 2 * hi
        per_block += 2 * one_up  # decompose and mix
    once = sum(L * c.D for L in lengths)  # embeddings
    once += c.T * c.F * c.D + c.F * c.D  # head
    # Round the fractional FFT cost once per block so totals stay exactly linear in batch and blocks.
    return batch * (once + c.blocks * int(round(per_block)))
