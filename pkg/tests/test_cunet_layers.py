import numpy as np
import pytest

from fecglab import autodiff as ad
from fecglab.autodiff import Tensor
from fecglab.cunet.layers import (
    ActivationMixture,
    ComplexConvLayer,
    ComplexInstanceNorm,
    ComplexTensor,
    DiagonalLayer,
    activate,
    crelu,
    gk,
    gs,
)
from fecglab.cunet.model import CUNet, CUNetConfig, make_identity_model
from fecglab.errors import ConfigError, StructuralError


def ct(z):
    """ComplexTensor from a complex numpy array."""
    return ComplexTensor.from_complex(np.asarray(z, dtype=np.complex128))


class TestActivations:
    def test_crelu_fixed_point(self):
        out = crelu(ct([[-1.0 + 2.0j]]))
        assert out.to_complex()[0, 0] == 0.0 + 2.0j

    def test_gk_three_four(self):
        out = gk(ct([[3.0 + 4.0j]]))
        np.testing.assert_allclose(out.to_complex()[0, 0], 0.5 + (2.0 / 3.0) * 1j)

    def test_gs_min_max(self):
        out = gs(ct([[3.0 + 1.0j]]))
        assert out.to_complex()[0, 0] == 1.0 + 3.0j

    def test_gs_re_leq_im(self):
        rng = np.random.default_rng(0)
        z = ct(rng.standard_normal((4, 5)) + 1j * rng.standard_normal((4, 5)))
        out = gs(z)
        assert np.all(out.re.data <= out.im.data)

    def test_gk_magnitude_below_one_and_phase_preserved(self):
        rng = np.random.default_rng(1)
        z = rng.standard_normal((50,)) + 1j * rng.standard_normal((50,))
        out = gk(ct(z)).to_complex()
        assert np.all(np.abs(out) < 1.0)
        np.testing.assert_allclose(np.angle(out), np.angle(z), atol=1e-12)

    def test_all_activations_fix_zero(self):
        z = ct(np.zeros((3, 3)))
        mix = ActivationMixture()
        for kind in ("identity", "crelu", "gk", "gs", "rho"):
            out = activate(kind, z, mix)
            assert np.all(out.to_complex() == 0)

    def test_rho_at_simplex_vertices(self):
        rng = np.random.default_rng(2)
        z = ct(rng.standard_normal((6, 7)) + 1j * rng.standard_normal((6, 7)))
        pieces = [crelu(z), gk(z), gs(z)]
        for i in range(3):
            logits = np.full(3, -60.0)
            logits[i] = 60.0
            mix = ActivationMixture(logits)
            out = activate("rho", z, mix)
            np.testing.assert_allclose(
                out.to_complex(), pieces[i].to_complex(), atol=1e-15
            )

    def test_rho_requires_mixture(self):
        with pytest.raises(ConfigError):
            activate("rho", ct(np.zeros((2, 2))), None)

    def test_mixture_weights_on_simplex(self):
        mix = ActivationMixture((0.3, -1.2, 4.0))
        w = mix.effective_weights()
        assert np.all(w >= 0) and np.all(w <= 1)
        assert abs(w.sum() - 1.0) < 1e-9


class TestDiagonalLayer:
    def _x(self, seed=0, shape=(2, 1, 4, 5)):
        rng = np.random.default_rng(seed)
        return ct(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

    def test_zero_beta_is_identity(self):
        layer = DiagonalLayer(4, 5)
        x = self._x()
        np.testing.assert_array_equal(layer.forward(x).to_complex(), x.to_complex())

    def test_pi_beta_negates(self):
        layer = DiagonalLayer(4, 5)
        layer.beta.data[:] = np.pi
        x = self._x(1)
        np.testing.assert_allclose(
            layer.forward(x).to_complex(), -x.to_complex(), atol=1e-12
        )

    def test_magnitude_preserved(self):
        layer = DiagonalLayer(4, 5)
        layer.beta.data[:] = np.random.default_rng(3).uniform(0, 2 * np.pi, (4, 5))
        x = self._x(2)
        np.testing.assert_allclose(
            np.abs(layer.forward(x).to_complex()), np.abs(x.to_complex()), atol=1e-12
        )

    def test_shape_mismatch_rejected(self):
        layer = DiagonalLayer(4, 5)
        with pytest.raises(StructuralError):
            layer.forward(self._x(shape=(1, 1, 4, 6)))


def naive_conv_same(x, w, b, stride=1):
    """Direct loop convolution oracle: x (C,H,W), w (Co,C,k,k), b (Co,)."""
    co, c, k, _ = w.shape
    pad = (k - 1) // 2
    h, wd = x.shape[1:]
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    out = np.zeros((co, ho, wo))
    for o in range(co):
        for i in range(ho):
            for j in range(wo):
                acc = 0.0
                for ci in range(c):
                    for a in range(k):
                        for bb in range(k):
                            acc += w[o, ci, a, bb] * xp[ci, i * stride + a, j * stride + bb]
                out[o, i, j] = acc + b[o]
    return out


class TestComplexConv:
    def test_identity_1x1(self):
        layer = ComplexConvLayer(1, 1, 1, activation="identity")
        layer.w_re.data = np.ones((1, 1, 1, 1))
        layer.w_im.data = np.ones((1, 1, 1, 1))
        layer.b_re.data[:] = 0
        layer.b_im.data[:] = 0
        x = ct(np.random.default_rng(0).standard_normal((1, 1, 4, 4))
               + 1j * np.random.default_rng(1).standard_normal((1, 1, 4, 4)))
        np.testing.assert_allclose(layer.forward(x).to_complex(), x.to_complex())

    def test_zero_imag_kernel_decouples(self):
        layer = ComplexConvLayer(1, 1, 3, activation="identity")
        layer.w_im.data[:] = 0
        layer.b_im.data[:] = 0.7
        x = ct(np.random.default_rng(2).standard_normal((1, 1, 4, 4)) * (1 + 0j))
        out = layer.forward(x)
        np.testing.assert_allclose(out.im.data, 0.7)

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(5)
        layer = ComplexConvLayer(1, 1, 3, activation="identity", rng=rng)
        x_re = rng.standard_normal((1, 1, 4, 4))
        x_im = rng.standard_normal((1, 1, 4, 4))
        out = layer.forward(ComplexTensor(Tensor(x_re), Tensor(x_im)))
        ref_re = naive_conv_same(x_re[0], layer.w_re.data, layer.b_re.data)
        ref_im = naive_conv_same(x_im[0], layer.w_im.data, layer.b_im.data)
        np.testing.assert_allclose(out.re.data[0], ref_re, atol=1e-12)
        np.testing.assert_allclose(out.im.data[0], ref_im, atol=1e-12)

    def test_strided_matches_naive_oracle(self):
        rng = np.random.default_rng(6)
        layer = ComplexConvLayer(2, 3, 3, activation="identity", stride=2, rng=rng)
        x_re = rng.standard_normal((1, 2, 8, 6))
        x_im = rng.standard_normal((1, 2, 8, 6))
        out = layer.forward(ComplexTensor(Tensor(x_re), Tensor(x_im)))
        ref_re = naive_conv_same(x_re[0], layer.w_re.data, layer.b_re.data, stride=2)
        np.testing.assert_allclose(out.re.data[0], ref_re, atol=1e-12)
        assert out.shape == (1, 3, 4, 3)

    def test_channel_mismatch_rejected(self):
        layer = ComplexConvLayer(2, 3, 3)
        x = ct(np.zeros((1, 1, 4, 4)))
        with pytest.raises(StructuralError):
            layer.forward(x)

    def test_full_mode_cross_terms(self):
        rng = np.random.default_rng(7)
        layer = ComplexConvLayer(1, 1, 1, activation="identity", mode="full", rng=rng)
        z = rng.standard_normal() + 1j * rng.standard_normal()
        x = ct(np.full((1, 1, 2, 2), z))
        w = complex(layer.w_re.data[0, 0, 0, 0], layer.w_im.data[0, 0, 0, 0])
        np.testing.assert_allclose(layer.forward(x).to_complex(), w * z, atol=1e-12)


class TestModelForward:
    def test_zero_input_zero_output(self):
        model = CUNet(CUNetConfig(n_freqs=16, n_frames=16, depth=2, channels=(4, 8)))
        out = model.forward_complex(np.zeros((1, 16, 16), dtype=complex))
        np.testing.assert_allclose(out, 0.0, atol=1e-12)

    @pytest.mark.parametrize("n_freqs", [64, 128])
    @pytest.mark.parametrize("n_frames", [64, 128, 256])
    def test_shape_contract(self, n_freqs, n_frames):
        model = CUNet(CUNetConfig(n_freqs=n_freqs, n_frames=n_frames,
                                  depth=2, channels=(2, 4)))
        rng = np.random.default_rng(0)
        x = rng.standard_normal((1, n_freqs, n_frames)) * (1 + 1j)
        out = model.forward_complex(x)
        assert out.shape == (1, n_freqs, n_frames)

    def test_shape_contract_non_divisible(self):
        # 129 x 33 requires the internal pad-and-crop path.
        model = CUNet(CUNetConfig(n_freqs=129, n_frames=33, depth=3,
                                  channels=(2, 4, 4)))
        x = np.random.default_rng(1).standard_normal((2, 129, 33)) * (1 - 2j)
        assert model.forward_complex(x).shape == (2, 129, 33)

    def test_identity_model_reproduces_input(self):
        model = make_identity_model(9, 7)
        rng = np.random.default_rng(2)
        x = rng.standard_normal((1, 9, 7)) + 1j * rng.standard_normal((1, 9, 7))
        np.testing.assert_allclose(model.forward_complex(x), x, atol=1e-12)

    def test_depth1_matches_step_by_step_reference(self):
        """Layer-by-layer numpy recomputation of a depth-1 net, no autodiff."""
        cfg = CUNetConfig(n_freqs=8, n_frames=8, depth=1, channels=(2,),
                          activation="identity", seed=3)
        model = CUNet(cfg)
        rng = np.random.default_rng(4)
        model.entry_diag.beta.data[:] = rng.uniform(0, 2 * np.pi, (8, 8))
        model.exit_diag.beta.data[:] = rng.uniform(0, 2 * np.pi, (8, 8))
        z0 = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))

        def norm_np(x, gain, bias, eps=1e-5):
            mean = x.mean(axis=(1, 2), keepdims=True)
            var = ((x - mean) ** 2).mean(axis=(1, 2), keepdims=True)
            return (x - mean) / np.sqrt(var + eps) * gain[:, None, None] + bias[:, None, None]

        def conv_np(x_re, x_im, layer, stride=1):
            re = naive_conv_same(x_re, layer.w_re.data, layer.b_re.data, stride)
            im = naive_conv_same(x_im, layer.w_im.data, layer.b_im.data, stride)
            return re, im

        # entry diagonal
        z = np.exp(1j * model.entry_diag.beta.data) * z0
        re, im = z.real[None], z.imag[None]
        # down block: conv + norm -> skip; strided conv
        blk = model.down_blocks[0]
        re, im = conv_np(re, im, blk.conv)
        re = norm_np(re, blk.norm.gain_re.data, blk.norm.bias_re.data)
        im = norm_np(im, blk.norm.gain_im.data, blk.norm.bias_im.data)
        skip_re, skip_im = re, im
        re, im = conv_np(re, im, blk.down, stride=2)
        # bottleneck
        re, im = conv_np(re, im, model.bottleneck)
        re = norm_np(re, model.bottleneck_norm.gain_re.data, model.bottleneck_norm.bias_re.data)
        im = norm_np(im, model.bottleneck_norm.gain_im.data, model.bottleneck_norm.bias_im.data)
        # up block: upsample, concat skip, conv + norm
        re = re.repeat(2, axis=1).repeat(2, axis=2)
        im = im.repeat(2, axis=1).repeat(2, axis=2)
        re = np.concatenate([re, skip_re], axis=0)
        im = np.concatenate([im, skip_im], axis=0)
        up = model.up_blocks[0]
        re, im = conv_np(re, im, up.conv)
        re = norm_np(re, up.norm.gain_re.data, up.norm.bias_re.data)
        im = norm_np(im, up.norm.gain_im.data, up.norm.bias_im.data)
        # out conv (1x1) and exit diagonal
        re, im = conv_np(re, im, model.out_conv)
        expected = np.exp(1j * model.exit_diag.beta.data) * (re[0] + 1j * im[0])

        out = model.forward_complex(z0[None])[0]
        np.testing.assert_allclose(out, expected, atol=1e-10)


class TestInstanceNorm:
    def test_zero_stays_zero(self):
        norm = ComplexInstanceNorm(3)
        x = ct(np.zeros((2, 3, 4, 4)))
        np.testing.assert_allclose(norm.forward(x).to_complex(), 0.0)

    def test_normalizes_per_channel(self):
        norm = ComplexInstanceNorm(2)
        rng = np.random.default_rng(0)
        x = ct(rng.standard_normal((1, 2, 16, 16)) * 5 + 3 + 0j)
        out = norm.forward(x)
        means = out.re.data.mean(axis=(2, 3))
        stds = out.re.data.std(axis=(2, 3))
        np.testing.assert_allclose(means, 0.0, atol=1e-10)
        np.testing.assert_allclose(stds, 1.0, atol=1e-2)
