import numpy as np
import pytest

from timekan.errors import ConfigError, NumericalError, ShapeError
from timekan.gradcheck import check_model
from timekan.model import ModelConfig, TimeKanModel, count_params, estimate_macs

from conftest import set_identity_mkan


def zero_all(model):
    for p in model.parameters():
        p.value[...] = 0.0


class TestConfig:
    def test_defaults(self):
        c = ModelConfig()
        assert (c.T, c.F, c.D, c.k, c.d, c.b, c.M, c.blocks) == (96, 96, 16, 4, 2, 2, 3, 1)
        assert c.order_policy == "multi_order" and c.upsampler == "frequency" and c.instance_norm

    def test_multi_order(self):
        assert ModelConfig().kan_orders() == [5, 4, 3, 2]
        c = ModelConfig(T=48, k=3, b=1)
        assert c.kan_orders() == [c.b + c.k - i for i in (1, 2, 3)] == [3, 2, 1]

    def test_fixed_and_mlp(self):
        assert ModelConfig(order_policy="fixed:2").kan_orders() == [2, 2, 2, 2]
        assert ModelConfig(order_policy="mlp").kan_orders() is None

    @pytest.mark.parametrize("kw", [dict(T=90), dict(k=1), dict(d=1), dict(b=0), dict(M=4), dict(blocks=0),
                                    dict(order_policy="cubic"), dict(order_policy="fixed:x"),
                                    dict(upsampler="spline")])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            ModelConfig(**kw)

    def test_model_orders_match_layers(self):
        model = TimeKanModel(ModelConfig())
        assert [kan.order for kan in model.kans[0]] == [5, 4, 3, 2]


class TestPreprocess:
    def test_lengths(self):
        model = TimeKanModel(ModelConfig(T=8, F=2, k=3, D=3))
        levels = model.hierarchical_preprocess(np.zeros((2, 8)))
        assert [lv.shape for lv in levels] == [(2, 8, 3), (2, 4, 3), (2, 2, 3)]

    def test_constant_input(self):
        model = TimeKanModel(ModelConfig(T=8, F=2, k=2, D=3))
        levels = model.hierarchical_preprocess(np.full((1, 8), 2.0))
        for emb, lv in zip(model.embeddings, levels):
            expected = 2.0 * emb.weight.value[:, 0] + emb.bias.value
            np.testing.assert_allclose(lv[0], np.broadcast_to(expected, lv[0].shape))

    def test_two_tone_window_means(self):
        t = np.arange(16)
        x = np.sin(2 * np.pi * t / 4) + 0.5 * np.cos(2 * np.pi * t / 16)
        model = TimeKanModel(ModelConfig(T=16, F=2, k=3, D=2))
        raw = model.raw_levels(x[None])
        np.testing.assert_allclose(raw[1][0], [(x[2 * i] + x[2 * i + 1]) / 2 for i in range(8)])
        np.testing.assert_allclose(raw[2][0], [x[4 * i:4 * i + 4].mean() for i in range(4)])


class TestDecomposeMix:
    def test_zero_levels(self):
        model = TimeKanModel(ModelConfig(T=16, F=2, k=3, D=2))
        levels = [np.zeros((1, L, 2)) for L in (16, 8, 4)]
        assert all(not b.any() for b in model.cfd_decompose(levels))
        assert all(not lv.any() for lv in model.frequency_mix(levels))

    def test_k2_one_residual_plus_base(self, rng):
        model = TimeKanModel(ModelConfig(T=8, F=2, k=2, D=2))
        levels = [rng.normal(size=(1, 8, 2)), rng.normal(size=(1, 4, 2))]
        bands = model.cfd_decompose(levels)
        assert len(bands) == 2
        np.testing.assert_array_equal(bands[1], levels[1])

    def test_low_band_energy_removed(self):
        model = TimeKanModel(ModelConfig(T=32, F=2, k=2, D=1))
        t16, t32 = np.arange(16), np.arange(32)
        low = lambda t, L: np.cos(2 * np.pi * 3 * t / L) + np.sin(2 * np.pi * t / L)
        x1 = (low(t32, 32) + np.cos(2 * np.pi * 12 * t32 / 32))[None, :, None]
        x2 = low(t16, 16)[None, :, None]
        f1 = model.cfd_decompose([x1, x2])[0][0, :, 0]
        power = np.abs(np.fft.rfft(f1)) ** 2
        assert power[:8].sum() <= 1e-6 * power.sum()

    def test_mix_hand_case(self):
        model = TimeKanModel(ModelConfig(T=4, F=2, k=2, D=1))
        fh1 = np.array([1.0, 2.0, 3.0, 4.0])[None, :, None]
        fh2 = np.array([1.0, -1.0])[None, :, None]
        # upsampling [1, -1] to length 4 with the halved Nyquist bin gives cos(pi*n/2) = [1, 0, -1, 0]
        levels = model.frequency_mix([fh1, fh2])
        np.testing.assert_allclose(levels[0][0, :, 0], [2.0, 2.0, 2.0, 4.0], atol=1e-12)
        np.testing.assert_array_equal(levels[1], fh2)

    @pytest.mark.parametrize("k", [2, 3, 4])
    @pytest.mark.parametrize("T", [16, 48, 96])
    @pytest.mark.parametrize("upsampler", ["frequency", "linear_interp"])
    def test_mix_inverts_decompose(self, k, T, upsampler, rng):
        model = TimeKanModel(ModelConfig(T=T, F=4, k=k, D=3, upsampler=upsampler))
        set_identity_mkan(model)
        levels = model.hierarchical_preprocess(rng.normal(size=(2, T)))
        out = model.frequency_mix(model.mkan_learn(model.cfd_decompose(levels), 0))
        for a, b in zip(levels, out):
            assert np.max(np.abs(a - b)) <= 1e-9


class TestMkan:
    def test_zero_parameters(self, rng):
        model = TimeKanModel(ModelConfig(T=16, F=2, k=3, D=2))
        zero_all(model)
        bands = [rng.normal(size=(1, L, 2)) for L in (16, 8, 4)]
        assert all(not b.any() for b in model.mkan_learn(bands, 0))

    def test_identity_branch(self, rng):
        model = TimeKanModel(ModelConfig(T=16, F=2, k=2, D=2))
        set_identity_mkan(model)
        bands = [rng.normal(size=(1, L, 2)) for L in (16, 8)]
        for a, b in zip(bands, model.mkan_learn(bands, 0)):
            np.testing.assert_array_equal(a, b)


class TestForward:
    def test_zero_parameters_give_window_mean(self, rng):
        model = TimeKanModel(ModelConfig(T=16, F=4, k=2, D=2))
        zero_all(model)
        x = rng.normal(size=(3, 16)) + 5
        np.testing.assert_allclose(model.forward(x), np.repeat(x.mean(axis=1, keepdims=True), 4, axis=1))

    def test_zero_parameters_without_norm_give_head_bias(self, rng):
        model = TimeKanModel(ModelConfig(T=16, F=4, k=2, D=2, instance_norm=False))
        zero_all(model)
        model.head_time.bias.value[...] = [1.0, 2.0, 3.0, 4.0]
        model.head_channel.weight.value[...] = 1.0
        model.head_channel.bias.value[...] = 0.5
        out = model.forward(rng.normal(size=(2, 16)))
        np.testing.assert_allclose(out, np.tile([2.5, 4.5, 6.5, 8.5], (2, 1)))

    def test_batch_independence(self, rng):
        model = TimeKanModel(ModelConfig(T=16, F=4, k=3, D=4))
        x = rng.normal(size=(1, 16))
        one = model.forward(x)
        two = model.forward(np.vstack([x, x]))
        np.testing.assert_allclose(two, np.vstack([one, one]), atol=1e-14)

    def test_reduces_to_head_of_embedding_with_identity_mkan(self, rng):
        model = TimeKanModel(ModelConfig(T=16, F=4, k=3, D=3, instance_norm=False, blocks=2))
        set_identity_mkan(model)
        x = rng.normal(size=(2, 16))
        x1 = model.embeddings[0].forward(x[..., None])
        direct = model.head_channel.forward(model.head_time.forward(x1))[..., 0]
        np.testing.assert_allclose(model.forward(x), direct, atol=1e-9)

    def test_input_shape_checked(self):
        with pytest.raises(ShapeError):
            TimeKanModel(ModelConfig(T=16, F=4, k=2, D=2)).forward(np.zeros((2, 15)))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_stage_named(self, rng):
        model = TimeKanModel(ModelConfig(T=16, F=4, k=2, D=2))
        model.kans[0][1].theta.value[...] = np.inf
        with pytest.raises(NumericalError, match="block1.mkan"):
            model.forward(rng.normal(size=(1, 16)))

    def test_deterministic(self, rng):
        x = rng.normal(size=(3, 96))
        a = TimeKanModel(ModelConfig(seed=5)).forward(x)
        b = TimeKanModel(ModelConfig(seed=5)).forward(x)
        assert a.tobytes() == b.tobytes()

    def test_variate_independence(self, rng):
        model = TimeKanModel(ModelConfig(T=16, F=4, k=3, D=4))
        x = rng.normal(size=(2, 16, 3))
        multi = model.forecast_multivariate(x)
        for j in range(3):
            np.testing.assert_array_equal(multi[:, :, j], model.forward(x[:, :, j]))

    def test_float32_mode_close_to_float64(self, rng):
        x = rng.normal(size=(2, 32))
        cfg = dict(T=32, F=8, k=3, D=4, seed=3)
        y64 = TimeKanModel(ModelConfig(**cfg)).forward(x)
        m32 = TimeKanModel(ModelConfig(precision="float32", **cfg))
        y32 = m32.forward(x)
        assert y32.dtype == np.float32
        np.testing.assert_allclose(y32, y64, atol=1e-4)


class TestBackward:
    def test_before_forward(self):
        with pytest.raises(RuntimeError):
            TimeKanModel(ModelConfig(T=8, F=4, k=2, D=2)).backward(np.zeros((1, 4)))

    def test_zero_upstream(self, rng):
        model = TimeKanModel(ModelConfig(T=16, F=4, k=3, D=2))
        model.forward(rng.normal(size=(2, 16)))
        model.backward(np.zeros((2, 4)))
        assert all(not p.grad.any() for p in model.parameters())

    def test_linear_in_upstream(self, rng):
        model = TimeKanModel(ModelConfig(T=16, F=4, k=3, D=2))
        model.forward(rng.normal(size=(2, 16)))
        g = rng.normal(size=(2, 4))
        model.backward(g)
        once = {p.name: p.grad.copy() for p in model.parameters()}
        model.zero_grad()
        model.backward(2 * g)
        for p in model.parameters():
            np.testing.assert_allclose(p.grad, 2 * once[p.name], rtol=1e-12, atol=1e-15)

    def test_toy_config_gradient(self):
        assert check_model(ModelConfig(T=8, F=4, D=2, k=2), batch=2, seed=0) <= 1e-5

    @pytest.mark.parametrize("k", [2, 3])
    @pytest.mark.parametrize("D", [2, 4])
    @pytest.mark.parametrize("T", [8, 16])
    def test_random_toy_configs(self, k, D, T):
        assert check_model(ModelConfig(T=T, F=3, D=D, k=k, seed=T + D + k), seed=k) <= 1e-5

    @pytest.mark.parametrize("kw", [dict(blocks=2), dict(order_policy="mlp"), dict(upsampler="linear_interp"),
                                    dict(order_policy="fixed:5", instance_norm=False), dict(d=3, T=9, k=2)])
    def test_variants(self, kw):
        base = dict(T=16, F=3, D=2, k=3)
        base.update(kw)
        assert check_model(ModelConfig(**base)) <= 1e-5


class TestAccounting:
    def test_default_param_count(self):
        model = TimeKanModel(ModelConfig())
        head = 96 * 96 + 96 + 16 + 1
        embeddings = 4 * (16 + 16)
        kans = 16 * 16 * (6 + 5 + 4 + 3)
        convs = 4 * (16 * 3 + 16)
        assert head + embeddings + kans + convs == 14321
        assert count_params(model) == model.count_params() == 14321
        assert 10_000 <= model.count_params() <= 20_000

    def test_blocks_double_only_block_terms(self):
        one = TimeKanModel(ModelConfig()).count_params()
        two = TimeKanModel(ModelConfig(blocks=2)).count_params()
        per_block = 16 * 16 * 18 + 4 * 64
        assert two - one == per_block

    def test_kan_params_scale_with_d_squared(self):
        def kan_params(D):
            model = TimeKanModel(ModelConfig(D=D))
            return sum(p.size for p in model.parameters() if p.name.endswith(".theta"))

        assert kan_params(32) == 4 * kan_params(16)

    def test_macs_linear_in_batch_and_blocks(self):
        c1 = ModelConfig()
        assert estimate_macs(c1, 64) == 2 * estimate_macs(c1, 32)
        m = [estimate_macs(ModelConfig(blocks=b), 32) for b in (1, 2, 3)]
        assert m[2] - m[1] == m[1] - m[0] > 0
