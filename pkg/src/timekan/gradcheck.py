"""Analytic-vs-central-difference gradient checks for every learnable operation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .layers import ChebyKanLayer, DepthwiseConv, LinearMap, MlpBlock
from .model import ModelConfig, TimeKanModel
from .numerics import finite_difference_grad, make_rng, relative_error
from .spectral import UPSAMPLERS

TOLERANCE = 1e-5
EPS = 1e-6
SEEDS = (0, 1, 2, 3, 4)


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    cases: int

    @property
    def ok(self) -> bool:
        return self.max_rel_error <= TOLERANCE


def _param_errors(loss: Callable[[], float], params, analytic: dict) -> float:
    worst = 0.0
    for p in params:
        def f(v, p=p):
            saved = p.value.copy()
            p.value[...] = v
            try:
                return loss()
            finally:
                p.value[...] = saved
        worst = max(worst, relative_error(finite_difference_grad(f, p.value.copy(), EPS), analytic[p.name]))
    return worst


def check_layer(make_layer: Callable, shape, seed: int) -> float:
    """Random linear functional of the layer output; checks input and parameter gradients."""
    rng = make_rng(seed)
    layer = make_layer(rng)
    x = rng.normal(size=shape)
    probe = rng.normal(size=layer.forward(x).shape)

    def loss_x(v):
        return float(np.sum(layer.forward(v) * probe))

    for p in layer.parameters():
        p.zero_grad()
    grad_x = layer.backward(x, probe)[0]
    analytic = {p.name: p.grad.copy() for p in layer.parameters()}
    err = relative_error(finite_difference_grad(loss_x, x, EPS), grad_x)
    return max(err, _param_errors(lambda: loss_x(x), layer.parameters(), analytic))


def check_upsampler(kind: str, L_in: int, L_out: int, channels: int, seed: int) -> float:
    up, adjoint = UPSAMPLERS[kind]
    rng = make_rng(seed)
    x = rng.normal(size=(2, L_in, channels))
    probe = rng.normal(size=(2, L_out, channels))
    fd = finite_difference_grad(lambda v: float(np.sum(up(v, L_out, axis=1) * probe)), x, EPS)
    return relative_error(fd, adjoint(probe, L_in, axis=1))


def check_tanh(shape, seed: int) -> float:
    rng = make_rng(seed)
    x = rng.normal(size=shape)
    probe = rng.normal(size=shape)
    fd = finite_difference_grad(lambda v: float(np.sum(np.tanh(v) * probe)), x, EPS)
    return relative_error(fd, probe * (1.0 - np.tanh(x) ** 2))


def check_model(config: ModelConfig, batch: int = 2, seed: int = 0) -> float:
    """MSE loss of the whole model against a random target, all parameters."""
    model = TimeKanModel(config)
    rng = make_rng(seed + 1000)
    # Move parameters off their zero/small init so every branch contributes.
    for p in model.parameters():
        p.value[...] = rng.normal(scale=0.5, size=p.shape)
    x = rng.normal(size=(batch, config.T)) + np.sin(np.arange(config.T))
    target = rng.normal(size=(batch, config.F))

    def loss() -> float:
        return float(np.mean((model.forward(x) - target) ** 2))

    model.zero_grad()
    pred = model.forward(x)
    model.backward(2.0 * (pred - target) / pred.size)
    analytic = {p.name: p.grad.copy() for p in model.parameters()}
    return _param_errors(loss, model.parameters(), analytic)


LAYER_SHAPES = ((1, 1, 1), (2, 5, 3), (3, 8, 2))
MODEL_CONFIGS = (
    ModelConfig(T=8, F=4, D=2, k=2),
    ModelConfig(T=16, F=4, D=4, k=3),
    ModelConfig(T=8, F=3, D=4, k=3),
    ModelConfig(T=16, F=5, D=2, k=2, blocks=2),
    ModelConfig(T=8, F=4, D=2, k=2, order_policy="mlp"),
    ModelConfig(T=16, F=4, D=2, k=3, upsampler="linear_interp"),
    ModelConfig(T=8, F=4, D=2, k=3, order_policy="fixed:3", instance_norm=False),
)


def _layer_factories(D: int) -> dict[str, Callable]:
    return {
        "kan(order=0)": lambda rng: ChebyKanLayer(D, D + 1, 0, rng),
        "kan(order=2)": lambda rng: ChebyKanLayer(D, D + 1, 2, rng),
        "kan(order=5)": lambda rng: ChebyKanLayer(D, 2, 5, rng),
        "depthwise_conv(M=3)": lambda rng: DepthwiseConv(D, 3, rng),
        "depthwise_conv(M=5)": lambda rng: DepthwiseConv(D, 5, rng),
        "linear(channel)": lambda rng: LinearMap(D, 3, "channel", rng),
        "mlp": lambda rng: MlpBlock(D, rng),
    }


def run_suite(seeds: Iterable[int] = SEEDS) -> list[CheckResult]:
    seeds = tuple(seeds)
    results: dict[str, list[float]] = {}

    def record(name, err):
        results.setdefault(name, []).append(err)

    for seed in seeds:
        for shape in LAYER_SHAPES:
            for name, factory in _layer_factories(shape[-1]).items():
                record(name, check_layer(factory, shape, seed))
            L = shape[1]
            record("linear(time)", check_layer(lambda rng, L=L: LinearMap(L, 4, "time", rng), shape, seed))
            record("tanh", check_tanh(shape, seed))
        for L_in, L_out in ((1, 3), (4, 8), (5, 8), (6, 13), (3, 3)):
            for kind in UPSAMPLERS:
                record(f"upsample({kind})", check_upsampler(kind, L_in, L_out, 2, seed))
    for i, config in enumerate(MODEL_CONFIGS):
        for seed in seeds[:2]:
            cfg = ModelConfig(**{**config.to_dict(), "seed": seed})
            label = (f"model(T={cfg.T},F={cfg.F},D={cfg.D},k={cfg.k},blocks={cfg.blocks},"
                     f"{cfg.order_policy},{cfg.upsampler},norm={int(cfg.instance_norm)})")
            record(label, check_model(cfg, seed=seed))
    return [CheckResult(name, max(errs), len(errs)) for name, errs in results.items()]


def format_report(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{r.name:<{width}}  max_rel_err={r.max_rel_error:.3e}  cases={r.cases}  "
             f"{'ok' if r.ok else 'FAIL'}" for r in results]
    return "\n".join(lines)
