import numpy as np
import pytest

from timekan.data import (
    RawDataset,
    count_windows,
    effective_frequency_profile,
    load_csv,
    make_ett_like,
    split_and_standardize,
    windows,
    write_csv,
)
from timekan.errors import DataError


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_plain(self, tmp_path):
        raw = load_csv(write(tmp_path, "a,b\n1,2\n3,4\n5,6\n"))
        assert raw.column_names == ["a", "b"]
        np.testing.assert_array_equal(raw.values, [[1, 2], [3, 4], [5, 6]])
        assert raw.timestamps is None

    def test_date_column_excluded(self, tmp_path):
        raw = load_csv(write(tmp_path, "date,x,y\n2016-07-01 00:00:00,1.5,2\n2016-07-01 01:00:00,3,4\n"))
        assert raw.column_names == ["x", "y"]
        assert raw.values.shape == (2, 2)
        assert raw.timestamps[1] == "2016-07-01 01:00:00"

    def test_nan_cell_located(self, tmp_path):
        with pytest.raises(DataError, match=r"row 3, column 2"):
            load_csv(write(tmp_path, "a,b\n1,2\n3,NaN\n"))

    def test_non_numeric_cell(self, tmp_path):
        with pytest.raises(DataError, match=r"row 2, column 1"):
            load_csv(write(tmp_path, "a,b\nx,2\n"))

    def test_ragged_row(self, tmp_path):
        with pytest.raises(DataError, match="row 3"):
            load_csv(write(tmp_path, "a,b\n1,2\n3\n"))

    def test_timestamp_only(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(write(tmp_path, "date\n2016\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="nope.csv"):
            load_csv(tmp_path / "nope.csv")

    def test_write_round_trip(self, tmp_path, rng):
        raw = RawDataset(["u", "v"], rng.normal(size=(5, 2)), [f"t{i}" for i in range(5)])
        write_csv(tmp_path / "r.csv", raw)
        back = load_csv(tmp_path / "r.csv")
        np.testing.assert_array_equal(back.values, raw.values)
        assert back.timestamps == raw.timestamps


def ramp(rows, cols=2, rng=None):
    values = np.arange(rows * cols, dtype=float).reshape(rows, cols) ** 1.1
    return RawDataset([f"c{i}" for i in range(cols)], values)


class TestSplit:
    def test_ett_ratio(self):
        split = split_and_standardize(ramp(100), "ett")
        assert split.ranges == {"train": (0, 60), "val": (60, 80), "test": (80, 100)}

    def test_other_ratio(self):
        split = split_and_standardize(ramp(100), "other")
        assert split.ranges == {"train": (0, 70), "val": (70, 80), "test": (80, 100)}

    def test_train_standardized(self, rng):
        raw = RawDataset(["a", "b"], rng.normal(3, 2, size=(200, 2)))
        split = split_and_standardize(raw, "ett")
        train = split.part("train")
        np.testing.assert_allclose(train.mean(axis=0), 0, atol=1e-9)
        np.testing.assert_allclose(train.std(axis=0), 1, atol=1e-9)

    def test_no_leakage(self, rng):
        values = rng.normal(size=(100, 2))
        a = split_and_standardize(RawDataset(["a", "b"], values.copy()), "ett")
        changed = values.copy()
        changed[80:] = rng.normal(10, 5, size=(20, 2))
        b = split_and_standardize(RawDataset(["a", "b"], changed), "ett")
        assert a.mean.tobytes() == b.mean.tobytes() and a.std.tobytes() == b.std.tobytes()

    def test_round_trip(self, rng):
        values = rng.normal(5, 3, size=(50, 3))
        split = split_and_standardize(RawDataset(["a", "b", "c"], values), "other")
        assert np.max(np.abs(split.destandardize(split.standardized) - values)) <= 1e-10

    def test_constant_column_rejected(self):
        values = np.column_stack([np.arange(50.0), np.ones(50)])
        with pytest.raises(DataError, match="c1"):
            split_and_standardize(RawDataset(["c0", "c1"], values), "ett")

    def test_short_split_rejected(self):
        with pytest.raises(DataError, match="T\\+F=30"):
            split_and_standardize(ramp(100), "ett", T=20, F=10)

    def test_unknown_family(self):
        with pytest.raises(DataError):
            split_and_standardize(ramp(100), "weather")


class TestWindows:
    def make(self, rows, T, F):
        split = split_and_standardize(ramp(rows * 10 // 6 + 1, 1), "ett")
        assert len(split.part("train")) >= rows
        return split

    def test_exact_fit_single_window(self):
        split = split_and_standardize(ramp(50, 1), "ett")
        n = len(split.part("train"))
        assert count_windows(split, "train", n - 5, 5) == 1

    def test_plus_two_rows(self):
        split = split_and_standardize(ramp(50, 1), "ett")
        n = len(split.part("train"))
        assert count_windows(split, "train", n - 7, 5) == 3
        batches = list(windows(split, "train", n - 7, 5, batch_size=2))
        assert [b.inputs.shape[0] for b in batches] == [2, 1]

    def test_adjacency(self):
        split = split_and_standardize(ramp(200, 2), "ett")
        data = split.part("val")
        for batch in windows(split, "val", 8, 4, batch_size=7):
            for inp, tgt in zip(batch.inputs, batch.targets):
                start = int(np.flatnonzero((data[:, 0] == inp[0, 0]))[0])
                np.testing.assert_array_equal(data[start:start + 8], inp)
                np.testing.assert_array_equal(data[start + 8], tgt[0])

    def test_eval_order_ascending_and_shuffle_deterministic(self):
        split = split_and_standardize(ramp(300, 1), "ett")
        fixed = np.concatenate([b.inputs[:, 0, 0] for b in windows(split, "train", 8, 4)])
        assert np.all(np.diff(fixed) > 0)
        run = lambda seed: np.concatenate([b.inputs[:, 0, 0] for b in
                                           windows(split, "train", 8, 4, rng=np.random.default_rng(seed))])
        np.testing.assert_array_equal(run(3), run(3))
        assert not np.array_equal(run(3), run(4))
        np.testing.assert_array_equal(np.sort(run(3)), fixed)

    def test_flattened_is_variate_major(self, rng):
        split = split_and_standardize(RawDataset(["a", "b", "c"], rng.normal(size=(100, 3))), "ett")
        batch = next(windows(split, "train", 6, 2, batch_size=4))
        x, y = batch.flattened()
        assert x.shape == (12, 6) and y.shape == (12, 2)
        np.testing.assert_array_equal(x[1 * 3 + 2], batch.inputs[1, :, 2])
        np.testing.assert_array_equal(y[1 * 3 + 2], batch.targets[1, :, 2])


def test_ett_like_shape_and_effective_frequency_growth():
    raw = make_ett_like(3000, seed=0)
    assert raw.column_names[-1] == "OT" and raw.values.shape == (3000, 7)
    short = effective_frequency_profile(raw.values, 96, samples=10)
    long = effective_frequency_profile(raw.values, 512, samples=10)
    assert short.shape == (7,)
    assert long.mean() > short.mean()
