"""Command-line entry point: ``timekan {train,eval,predict,gradcheck,inspect,ablate}``.

Configuration is a JSON object with flat dotted keys (``"model.k": 3``); ``--set key=value``
overrides individual keys and ``--seed`` sets both the model and the training seed.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .data import effective_frequency_profile, load_csv, split_and_standardize
from .errors import ConfigError, DataError, NumericalError, ShapeError
from .gradcheck import format_report, run_suite
from .model import ModelConfig, TimeKanModel
from .training import FitReport, TrainConfig, evaluate, fit

log = logging.getLogger("timekan")

EXIT_OK, EXIT_USER, EXIT_NUMERIC = 0, 1, 2

DATA_DEFAULTS = {"path": None, "family": "ett", "has_timestamp": None}
ABLATION_VARIANTS = (
    ("order=multi_order", {"order_policy": "multi_order"}),
    ("order=fixed:2", {"order_policy": "fixed:2"}),
    ("order=fixed:5", {"order_policy": "fixed:5"}),
    ("order=mlp", {"order_policy": "mlp"}),
    ("upsampler=frequency", {"upsampler": "frequency"}),
    ("upsampler=linear_interp", {"upsampler": "linear_interp"}),
)


@dataclass
class RunConfig:
    model: ModelConfig
    train: TrainConfig
    data: dict = field(default_factory=lambda: dict(DATA_DEFAULTS))
    out: Path = Path("runs/default")

    def flat(self) -> dict:
        out = {f"model.{k}": v for k, v in self.model.to_dict().items()}
        out.update({f"train.{k}": v for k, v in self.train.to_dict().items()})
        out.update({f"data.{k}": v for k, v in self.data.items()})
        out["out"] = str(self.out)
        return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _coerce(cls, key: str, value):
    types = {f.name: f.type for f in fields(cls)}
    want = types[key]
    if want in ("int", int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    if want in ("float", float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        return float(value)
    if want in ("bool", bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false, got {value!r}")
        return value
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a string, got {value!r}")
    return value


def resolve_config(config_path: str | None, overrides: list[str], seed: int | None,
                   out: str | None) -> RunConfig:
    flat: dict = {}
    if config_path:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            flat.update(json.loads(path.read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        flat[key.strip()] = _parse_value(value.strip())
    if seed is not None:
        flat["seed"] = seed
    if out is not None:
        flat["out"] = out

    model_kw, train_kw, data = {}, {}, dict(DATA_DEFAULTS)
    out_dir = Path("runs/default")
    model_names = {f.name for f in fields(ModelConfig)}
    train_names = {f.name for f in fields(TrainConfig)}
    for key, value in flat.items():
        section, _, name = key.partition(".")
        if key == "seed":
            continue
        if key == "out":
            out_dir = Path(str(value))
        elif section == "model" and name in model_names:
            model_kw[name] = _coerce(ModelConfig, name, value)
        elif section == "train" and name in train_names:
            train_kw[name] = _coerce(TrainConfig, name, value)
        elif section == "data" and name in DATA_DEFAULTS:
            data[name] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if "seed" in flat:
        s = flat["seed"]
        if isinstance(s, bool) or not isinstance(s, int) or s < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {s!r}")
        model_kw["seed"] = train_kw["seed"] = s
    return RunConfig(ModelConfig(**model_kw), TrainConfig(**train_kw), data, out_dir)


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_split(cfg: RunConfig):
    if not cfg.data.get("path"):
        raise ConfigError("data.path is required for this command")
    raw = load_csv(cfg.data["path"], cfg.data.get("has_timestamp"))
    return raw, split_and_standardize(raw, cfg.data.get("family", "ett"), cfg.model.T, cfg.model.F)


def _data_stats(split) -> dict:
    return {"columns": split.column_names, "mean": split.mean.tolist(), "std": split.std.tolist()}


def _train_one(cfg: RunConfig, split) -> tuple[TimeKanModel, FitReport]:
    model = TimeKanModel(cfg.model)
    report = fit(model, split, cfg.train)
    return model, report


def cmd_train(args, cfg: RunConfig) -> int:
    _, split = _load_split(cfg)
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.out / "resolved_config.json", cfg.flat())
    model, report = _train_one(cfg, split)
    ckpt.save_checkpoint(cfg.out / "model.ckpt", model, _data_stats(split))
    metrics = report.to_dict()
    metrics["metric_scale"] = "standardized"
    _write_json(cfg.out / "metrics.json", metrics)
    print(f"best epoch {report.best_epoch}: val MSE {report.best_val_mse:.6f}  "
          f"test MSE {report.test_mse:.6f}  test MAE {report.test_mae:.6f}  (standardized scale)")
    return EXIT_OK


def _checkpoint_path(args, cfg: RunConfig) -> Path:
    return Path(args.checkpoint) if args.checkpoint else cfg.out / "model.ckpt"


def cmd_eval(args, cfg: RunConfig) -> int:
    model, _ = ckpt.load_checkpoint(_checkpoint_path(args, cfg), cfg.model)
    _, split = _load_split(cfg)
    part = args.split
    mse_value, mae_value = evaluate(model, split, part)
    result = {"split": part, "mse": mse_value, "mae": mae_value, "metric_scale": "standardized"}
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.out / "eval.json", result)
    print(f"{part}: MSE {mse_value:.6f}  MAE {mae_value:.6f}  (standardized scale)")
    return EXIT_OK


def cmd_predict(args, cfg: RunConfig) -> int:
    model, manifest = ckpt.load_checkpoint(_checkpoint_path(args, cfg), cfg.model)
    stats = manifest.get("data_stats")
    if not stats:
        raise ConfigError("checkpoint carries no dataset statistics; retrain with `train`")
    if not args.input:
        raise ConfigError("predict needs --input <csv>")
    raw = load_csv(args.input, cfg.data.get("has_timestamp"))
    T = model.config.T
    if raw.values.shape[1] != len(stats["columns"]):
        raise DataError(f"input has {raw.values.shape[1]} value columns, checkpoint expects {len(stats['columns'])}")
    if raw.n_rows < T:
        raise DataError(f"input has {raw.n_rows} rows; look-back window needs T={T}")
    mean = np.asarray(stats["mean"])
    std = np.asarray(stats["std"])
    window = (raw.values[-T:] - mean) / std
    forecast = model.forecast_multivariate(window[None])[0] * std + mean
    cfg.out.mkdir(parents=True, exist_ok=True)
    with (cfg.out / "predictions.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step"] + raw.column_names)
        for step, row in enumerate(forecast, start=1):
            writer.writerow([step] + [repr(float(v)) for v in row])
    print(f"wrote {model.config.F} forecast steps for {len(raw.column_names)} variates (raw units) "
          f"to {cfg.out / 'predictions.csv'}")
    return EXIT_OK


def cmd_gradcheck(args, cfg: RunConfig) -> int:
    results = run_suite()
    print(format_report(results))
    failed = [r.name for r in results if not r.ok]
    if failed:
        print(f"gradient check FAILED for: {', '.join(failed)}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"all {len(results)} checks within tolerance")
    return EXIT_OK


def cmd_inspect(args, cfg: RunConfig) -> int:
    if args.checkpoint:
        model, _ = ckpt.load_checkpoint(args.checkpoint)
    else:
        model = TimeKanModel(cfg.model)
    c = model.config
    orders = model.kan_orders()
    print(f"params: {model.count_params()}")
    print(f"macs(batch=32): {model.estimate_macs(32)}")
    print(f"level lengths: {c.level_lengths()}")
    print("kan orders: " + ("mlp" if orders is None else "[" + ",".join(str(o) for o in orders) + "]"))
    if args.csv:
        raw = load_csv(args.csv, cfg.data.get("has_timestamp"))
        for window in (96, 512):
            if raw.n_rows < window:
                print(f"effective frequencies @ window {window}: skipped ({raw.n_rows} rows)")
                continue
            counts = effective_frequency_profile(raw.values, window, seed=c.seed)
            per = ", ".join(f"{n}={v:.2f}" for n, v in zip(raw.column_names, counts))
            print(f"effective frequencies @ window {window}: mean={counts.mean():.2f} ({per})")
    return EXIT_OK


def cmd_ablate(args, cfg: RunConfig) -> int:
    _, split = _load_split(cfg)
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.out / "resolved_config.json", cfg.flat())
    rows = []
    trained: dict[str, dict] = {}
    for label, change in ABLATION_VARIANTS:
        variant_model = ModelConfig(**{**cfg.model.to_dict(), **change})
        key = json.dumps(variant_model.to_dict(), sort_keys=True)
        if key not in trained:
            # Identical configs train identically, so the baseline is not refit.
            _, report = _train_one(RunConfig(variant_model, cfg.train, cfg.data, cfg.out), split)
            trained[key] = {"test_mse": report.test_mse, "test_mae": report.test_mae,
                            "best_epoch": report.best_epoch, "param_count": report.param_count}
        row = {"variant": label, "config": variant_model.to_dict(), **trained[key]}
        rows.append(row)
        print(f"{label:<26} test MSE {row['test_mse']:.6f}  MAE {row['test_mae']:.6f}")
    order_rows = [r for r in rows if r["variant"].startswith("order=")]
    best = min(order_rows, key=lambda r: r["test_mse"])["variant"]
    _write_json(cfg.out / "ablation.json", {
        "metric_scale": "standardized",
        "rows": rows,
        "best_order_policy": best,
        "multi_order_best": best == "order=multi_order",
    })
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "gradcheck": cmd_gradcheck,
    "inspect": cmd_inspect,
    "ablate": cmd_ablate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="timekan", description="TimeKAN long-term forecasting")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config")
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        if name in ("eval", "predict", "inspect"):
            p.add_argument("--checkpoint")
        if name == "eval":
            p.add_argument("--split", choices=("test", "val"), default="test")
        if name == "predict":
            p.add_argument("--input")
        if name == "inspect":
            p.add_argument("--csv")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args.config, args.set, args.seed, args.out)
        return COMMANDS[args.command](args, cfg)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DataError, ShapeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER


if __name__ == "__main__":
    sys.exit(main())
