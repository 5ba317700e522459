"""L2 training with Adam, global-norm clipping and early stopping on validation MSE."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .data import DatasetSplit, windows
from .errors import ConfigError, NumericalError, ShapeError
from .model import TimeKanModel
from .numerics import Parameter, make_rng

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 10
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip: float = 5.0  # global grad-norm bound; 0 disables
    max_steps_per_epoch: int = 0  # 0 = full pass over the train windows

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.lr < 0:
            raise ConfigError("train.lr must be >= 0")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("train.batch_size, train.max_epochs and train.patience must be positive")
        if self.patience > self.max_epochs:
            raise ConfigError("train.patience must not exceed train.max_epochs")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.eps <= 0:
            raise ConfigError("Adam betas must be in [0, 1) and eps positive")
        if self.clip < 0 or self.max_steps_per_epoch < 0:
            raise ConfigError("train.clip and train.max_steps_per_epoch must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class FitReport:
    train_loss: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_mse: float = float("inf")
    test_mse: float = float("nan")
    test_mae: float = float("nan")
    param_count: int = 0
    steps: int = 0
    wall_clock_seconds: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _check_pair(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target shape {target.shape}")
    return pred, target


def mse(pred, target) -> float:
    pred, target = _check_pair(pred, target)
    return float(np.mean((pred - target) ** 2))


def mae(pred, target) -> float:
    pred, target = _check_pair(pred, target)
    return float(np.mean(np.abs(pred - target)))


def adam_step(params: list[Parameter], config: TrainConfig, step_index: int) -> None:
    """One bias-corrected Adam update; ``step_index`` counts from 1."""
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** step_index
    c2 = 1.0 - b2 ** step_index
    for p in params:
        p.m *= b1
        p.m += (1.0 - b1) * p.grad
        p.v *= b2
        p.v += (1.0 - b2) * p.grad * p.grad
        p.value -= config.lr * (p.m / c1) / (np.sqrt(p.v / c2) + config.eps)


def clip_grad_norm(params: list[Parameter], max_norm: float) -> float:
    total = float(np.sqrt(sum(float(np.sum(p.grad.astype(np.float64) ** 2)) for p in params)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            p.grad *= scale
    return total


def evaluate(model: TimeKanModel, split: DatasetSplit, part: str, batch_size: int = 256) -> tuple[float, float]:
    """(MSE, MAE) over every window of ``part`` on the standardized scale."""
    c = model.config
    sq = ab = 0.0
    n = 0
    for batch in windows(split, part, c.T, c.F, batch_size=batch_size):
        x, y = batch.flattened()
        pred = model.forward(x)
        diff = pred.astype(np.float64) - y
        sq += float(np.sum(diff * diff))
        ab += float(np.sum(np.abs(diff)))
        n += diff.size
    if n == 0:
        raise ShapeError(f"{part} split yields no windows for T={c.T}, F={c.F}")
    return sq / n, ab / n


def checkpoint_round(state: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    # Checkpoints store float32; keep the in-memory best state identical to what is written.
    return {k: v.astype(np.float32).astype(v.dtype) for k, v in state.items()}


def fit(model: TimeKanModel, split: DatasetSplit, config: TrainConfig) -> FitReport:
    c = model.config
    params = model.parameters()
    rng = make_rng(config.seed)
    report = FitReport(param_count=model.count_params())
    start = time.perf_counter()
    best_state = checkpoint_round(model.state_dict())
    since_best = 0
    step = 0
    for epoch in range(config.max_epochs):
        total, batches = 0.0, 0
        for batch in windows(split, "train", c.T, c.F, batch_size=config.batch_size, rng=rng):
            x, y = batch.flattened()
            model.zero_grad()
            pred = model.forward(x)
            diff = pred - y
            loss = float(np.mean(diff.astype(np.float64) ** 2))
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite training loss at epoch {epoch + 1}, step {step + 1}")
            model.backward(2.0 * diff / diff.size)
            if config.clip > 0:
                clip_grad_norm(params, config.clip)
            step += 1
            adam_step(params, config, step)
            total += loss
            batches += 1
            if config.max_steps_per_epoch and batches >= config.max_steps_per_epoch:
                break
        if batches == 0:
            raise ShapeError("train split yields no windows")
        report.train_loss.append(total / batches)
        val, _ = evaluate(model, split, "val")
        report.val_mse.append(val)
        log.info("epoch %d train %.6f val %.6f", epoch + 1, report.train_loss[-1], val)
        if val < report.best_val_mse:
            report.best_val_mse = val
            report.best_epoch = epoch + 1
            best_state = checkpoint_round(model.state_dict())
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break
    model.load_state_dict(best_state)
    report.steps = step
    report.test_mse, report.test_mae = evaluate(model, split, "test")
    report.wall_clock_seconds = time.perf_counter() - start
    return report
