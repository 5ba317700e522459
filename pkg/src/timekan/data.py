"""CSV ingestion, train-only standardization, chronological splits and sliding windows."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import DataError

# (train, val) fractions in tenths; test takes the remainder.
SPLIT_RATIOS = {"ett": (6, 2), "other": (7, 1)}


@dataclass
class RawDataset:
    column_names: list[str]
    values: np.ndarray  # (rows, variates)
    timestamps: list[str] | None = None

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]


def load_csv(path, has_timestamp_col: bool | None = None) -> RawDataset:
    """Read a header + numeric-rows CSV.

    With ``has_timestamp_col=None`` a leading column named ``date`` (any case) is treated as
    a timestamp and excluded from the values.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"CSV file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if has_timestamp_col is None:
            has_timestamp_col = bool(header) and header[0].lower() == "date"
        first = 1 if has_timestamp_col else 0
        if len(header) - first < 1:
            raise DataError(f"{path}: no value columns in header")
        rows, stamps = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {line_no} has {len(row)} cells, header has {len(header)}")
            parsed = []
            for col in range(first, len(row)):
                cell = row[col].strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(f"{path}: non-numeric cell {cell!r} at row {line_no}, column {col + 1} "
                                    f"({header[col]})") from None
                if not math.isfinite(value):
                    raise DataError(f"{path}: non-finite cell {cell!r} at row {line_no}, column {col + 1} "
                                    f"({header[col]})")
                parsed.append(value)
            rows.append(parsed)
            if has_timestamp_col:
                stamps.append(row[0])
    if not rows:
        raise DataError(f"{path}: no data rows")
    return RawDataset(header[first:], np.array(rows, dtype=np.float64), stamps if has_timestamp_col else None)


def write_csv(path, dataset: RawDataset) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if dataset.timestamps is not None:
            writer.writerow(["date"] + dataset.column_names)
            for stamp, row in zip(dataset.timestamps, dataset.values):
                writer.writerow([stamp] + [repr(float(v)) for v in row])
        else:
            writer.writerow(dataset.column_names)
            for row in dataset.values:
                writer.writerow([repr(float(v)) for v in row])


@dataclass
class DatasetSplit:
    column_names: list[str]
    standardized: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    ranges: dict[str, tuple[int, int]] = field(default_factory=dict)

    def part(self, name: str) -> np.ndarray:
        lo, hi = self.ranges[name]
        return self.standardized[lo:hi]

    def destandardize(self, values: np.ndarray) -> np.ndarray:
        return values * self.std + self.mean

    def standardize(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std


def split_bounds(n_rows: int, family: str) -> dict[str, tuple[int, int]]:
    if family not in SPLIT_RATIOS:
        raise DataError(f"dataset family must be one of {sorted(SPLIT_RATIOS)}, got {family!r}")
    tr, va = SPLIT_RATIOS[family]
    b1 = n_rows * tr // 10
    b2 = n_rows * (tr + va) // 10
    return {"train": (0, b1), "val": (b1, b2), "test": (b2, n_rows)}


def split_and_standardize(raw: RawDataset, family: str = "ett", T: int | None = None,
                          F: int | None = None) -> DatasetSplit:
    """Chronological 6:2:2 (ETT) or 7:1:2 split with z-scoring by train-only statistics."""
    ranges = split_bounds(raw.n_rows, family)
    if T is not None and F is not None:
        need = T + F
        for name, (lo, hi) in ranges.items():
            if hi - lo < need:
                raise DataError(f"{name} split has {hi - lo} rows; at least T+F={need} are required "
                                f"(dataset has {raw.n_rows} rows)")
    lo, hi = ranges["train"]
    train = raw.values[lo:hi]
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    flat = [name for name, s in zip(raw.column_names, std) if not s > 0]
    if flat:
        raise DataError(f"columns constant over the train split cannot be standardized: {flat}")
    return DatasetSplit(list(raw.column_names), (raw.values - mean) / std, mean, std, ranges)


@dataclass
class WindowBatch:
    inputs: np.ndarray  # (B, T, N)
    targets: np.ndarray  # (B, F, N)

    def flattened(self) -> tuple[np.ndarray, np.ndarray]:
        """Variate-independent view: ``(B*N, T)`` inputs and ``(B*N, F)`` targets."""
        B, T, N = self.inputs.shape
        F = self.targets.shape[1]
        return (self.inputs.transpose(0, 2, 1).reshape(B * N, T),
                self.targets.transpose(0, 2, 1).reshape(B * N, F))


def window_starts(part_length: int, T: int, F: int, stride: int = 1) -> np.ndarray:
    if part_length < T + F:
        return np.zeros(0, dtype=np.int64)
    return np.arange(0, part_length - T - F + 1, stride, dtype=np.int64)


def windows(split: DatasetSplit, part: str, T: int, F: int, stride: int = 1, batch_size: int = 32,
            rng: np.random.Generator | None = None) -> Iterator[WindowBatch]:
    """Yield contiguous (look-back, horizon) batches; shuffled only when ``rng`` is given."""
    data = split.part(part)
    starts = window_starts(len(data), T, F, stride)
    if rng is not None:
        starts = starts[rng.permutation(len(starts))]
    offsets_in = np.arange(T)
    offsets_out = np.arange(T, T + F)
    for i in range(0, len(starts), batch_size):
        s = starts[i:i + batch_size, None]
        yield WindowBatch(data[s + offsets_in], data[s + offsets_out])


def count_windows(split: DatasetSplit, part: str, T: int, F: int, stride: int = 1) -> int:
    return len(window_starts(len(split.part(part)), T, F, stride))


def make_two_tone(n_rows: int, noise_std: float = 0.1, seed: int = 0) -> RawDataset:
    """``sin(2*pi*t/24) + 0.5*sin(2*pi*t/96) + N(0, noise_std^2)``, one variate."""
    rng = np.random.Generator(np.random.PCG64(seed))
    t = np.arange(n_rows, dtype=np.float64)
    y = np.sin(2 * np.pi * t / 24) + 0.5 * np.sin(2 * np.pi * t / 96) + rng.normal(0.0, noise_std, n_rows)
    return RawDataset(["y"], y[:, None])


def make_ett_like(n_rows: int = 17420, seed: int = 0) -> RawDataset:
    """Hourly seven-column series shaped like ETTh1 (load columns plus oil temperature).

    Each column mixes daily and weekly cycles, a slow mean-reverting drift and AR(1) noise, with
    column-specific weights. Used where the real file is unavailable.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    names = ["HUFL", "HULL", "MUFL", "MULL", "LUFL", "LULL", "OT"]
    t = np.arange(n_rows, dtype=np.float64)
    cols = []
    for _ in names:
        daily = sum(rng.uniform(0.5, 1.5) / h * np.sin(2 * np.pi * h * t / 24 + rng.uniform(0, 2 * np.pi))
                    for h in (1, 2, 3))
        weekly = rng.uniform(0.2, 0.8) * np.sin(2 * np.pi * t / 168 + rng.uniform(0, 2 * np.pi))
        slow = np.zeros(n_rows)
        ar = np.zeros(n_rows)
        eps_slow = rng.normal(0.0, 0.05, n_rows)
        eps = rng.normal(0.0, rng.uniform(0.2, 0.5), n_rows)
        for i in range(1, n_rows):
            slow[i] = 0.998 * slow[i - 1] + eps_slow[i]
            ar[i] = 0.8 * ar[i - 1] + eps[i]
        cols.append(rng.uniform(0.0, 3.0) + daily + weekly + slow + ar)
    start = np.datetime64("2016-07-01T00:00")
    stamps = [str(start + np.timedelta64(int(h), "h")).replace("T", " ") for h in t]
    return RawDataset(names, np.stack(cols, axis=1), stamps)


def effective_frequency_profile(values: np.ndarray, window: int, samples: int = 20,
                                seed: int = 0, threshold_ratio: float = 0.1) -> np.ndarray:
    """Mean effective-frequency count per variate over ``samples`` random windows."""
    from .spectral import effective_frequency_count

    values = np.asarray(values, dtype=np.float64)
    n_rows, n_cols = values.shape
    if n_rows < window:
        raise DataError(f"series has {n_rows} rows, window {window} does not fit")
    rng = np.random.Generator(np.random.PCG64(seed))
    starts = rng.integers(0, n_rows - window + 1, size=samples)
    counts = np.zeros(n_cols)
    for s in starts:
        for j in range(n_cols):
            counts[j] += effective_frequency_count(values[s:s + window, j], threshold_ratio)
    return counts / samples
