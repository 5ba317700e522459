import numpy as np
import pytest

from timekan.data import make_two_tone, write_csv

ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion, printed now and in the summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}"
        request.config.stash[ACCEPTANCE_LINES].append(line)
        print(line)
        return ok

    return record


def set_identity_mkan(model):
    """Conv kernels become centred deltas and KAN coefficients zero, so every band passes through."""
    for convs, kans in zip(model.convs, model.kans):
        for conv, kan in zip(convs, kans):
            conv.kernels.value[...] = 0.0
            conv.kernels.value[:, conv.kernel_size // 2] = 1.0
            conv.bias.value[...] = 0.0
            for p in kan.parameters():
                p.value[...] = 0.0


def direct_dft(x):
    """O(L^2) summation oracle, independent of the FFT code."""
    x = np.asarray(x, dtype=float)
    L = len(x)
    n = np.arange(L)
    return np.array([np.sum(x * np.exp(-2j * np.pi * k * n / L)) for k in range(L)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_tone_csv(tmp_path):
    path = tmp_path / "two_tone.csv"
    write_csv(path, make_two_tone(700, seed=1))
    return path


def trig_interp_matrix(L_in, L_out):
    """Band-limited interpolation matrix written out from the inverse-DFT definition.

    Entry (n, m) is (1/L_in) * sum_k w_k cos(2*pi*k*(n/L_out - m/L_in)) over the symmetric
    band |k| <= L_in/2, with weight 1/2 on each of the two Nyquist terms when L_in is even.
    """
    n = np.arange(L_out)[:, None] / L_out
    m = np.arange(L_in)[None, :] / L_in
    K = np.zeros((L_out, L_in))
    half = (L_in - 1) // 2
    for k in range(-half, half + 1):
        K += np.cos(2 * np.pi * k * (n - m))
    if L_in % 2 == 0:
        ny = L_in // 2
        K += 0.5 * np.cos(2 * np.pi * ny * (n - m)) + 0.5 * np.cos(2 * np.pi * -ny * (n - m))
    return K / L_in
