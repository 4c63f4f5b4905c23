"""Complex-valued layers built on the split real/imaginary representation.

A complex feature map is a pair of real (B, C, F, T) tensors. Convolutions
apply real kernels to the real part and imaginary kernels to the imaginary
part (the decoupled form; a full complex product is available as an ablation
switch). Diagonal layers rotate each time-frequency bin by a learnable phase.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import ConfigError, StructuralError

ACTIVATION_KINDS = ("identity", "crelu", "gk", "gs", "rho")

CONV_MODES = ("split", "full")


@dataclass
class ComplexTensor:
    re: Tensor
    im: Tensor

    def __post_init__(self):
        if self.re.data.shape != self.im.data.shape:
            raise StructuralError(
                f"re/im shape mismatch: {self.re.data.shape} vs {self.im.data.shape}"
            )

    @property
    def shape(self):
        return self.re.data.shape

    @classmethod
    def from_complex(cls, z: np.ndarray) -> "ComplexTensor":
        z = np.asarray(z)
        return cls(re=Tensor(z.real.copy()), im=Tensor(z.imag.copy()))

    def to_complex(self) -> np.ndarray:
        return self.re.data + 1j * self.im.data


# -- activations --------------------------------------------------------------


def crelu(z: ComplexTensor) -> ComplexTensor:
    return ComplexTensor(ad.relu(z.re), ad.relu(z.im))


def gk(z: ComplexTensor) -> ComplexTensor:
    denom = ad.hypot(z.re, z.im) + 1.0
    return ComplexTensor(z.re / denom, z.im / denom)


def gs(z: ComplexTensor) -> ComplexTensor:
    return ComplexTensor(ad.minimum(z.re, z.im), ad.maximum(z.re, z.im))


class ActivationMixture:
    """Convex combination of CReLU, GK and GS with learnable logits.

    Effective weights are the normalized exponentials of the logits, so they
    live on the simplex by construction.
    """

    def __init__(self, logits=(0.0, 0.0, 0.0)):
        self.logits = ad.parameter(np.asarray(logits, dtype=np.float64))
        if self.logits.data.shape != (3,):
            raise ConfigError("mixture needs exactly 3 logits")

    def weights(self) -> Tensor:
        shifted = self.logits - float(np.max(self.logits.data))
        e = ad.exp(shifted)
        return e / ad.tsum(e)

    def effective_weights(self) -> np.ndarray:
        return self.weights().data

    def parameters(self):
        return [("mu_logits", self.logits)]


def activate(kind: str, z: ComplexTensor, mix: ActivationMixture | None = None) -> ComplexTensor:
    if kind not in ACTIVATION_KINDS:
        raise ConfigError(f"unknown activation {kind!r}")
    if kind == "identity":
        return z
    if kind == "crelu":
        return crelu(z)
    if kind == "gk":
        return gk(z)
    if kind == "gs":
        return gs(z)
    if mix is None:
        raise ConfigError("the convex-combination activation requires a mixture")
    mu = mix.weights()
    a, b, c = crelu(z), gk(z), gs(z)

    def pick(i):
        return ad.reshape(ad.tsum(mu * _one_hot(i)), (1,) * z.re.data.ndim)

    m1, m2, m3 = pick(0), pick(1), pick(2)
    re = m1 * a.re + m2 * b.re + m3 * c.re
    im = m1 * a.im + m2 * b.im + m3 * c.im
    return ComplexTensor(re, im)


def _one_hot(i: int) -> Tensor:
    v = np.zeros(3)
    v[i] = 1.0
    return Tensor(v)


# -- layers --------------------------------------------------------------------


class ComplexConvLayer:
    """Complex convolution with same padding and optional stride."""

    def __init__(
        self,
        n_in: int,
        n_out: int,
        kernel: int,
        activation: str = "rho",
        stride: int = 1,
        mode: str = "split",
        rng: np.random.Generator | None = None,
        name: str = "conv",
    ):
        if kernel == 0:
            raise ConfigError("kernel size must be nonzero")
        if mode not in CONV_MODES:
            raise ConfigError(f"unknown conv mode {mode!r}")
        rng = rng or np.random.default_rng(0)
        scale = np.sqrt(1.0 / (n_in * kernel * kernel))
        shape = (n_out, n_in, kernel, kernel)
        self.w_re = ad.parameter(scale * rng.standard_normal(shape))
        self.w_im = ad.parameter(scale * rng.standard_normal(shape))
        self.b_re = ad.parameter(np.zeros(n_out))
        self.b_im = ad.parameter(np.zeros(n_out))
        self.activation = activation
        self.stride = stride
        self.mode = mode
        self.name = name
        self.mix = ActivationMixture() if activation == "rho" else None

    def forward(self, x: ComplexTensor) -> ComplexTensor:
        if self.mode == "split":
            re = ad.conv2d(x.re, self.w_re, self.b_re, stride=self.stride)
            im = ad.conv2d(x.im, self.w_im, self.b_im, stride=self.stride)
        else:
            # Full complex product: (Wre + i Wim) * (re + i im).
            re = (
                ad.conv2d(x.re, self.w_re, self.b_re, stride=self.stride)
                - ad.conv2d(x.im, self.w_im, None, stride=self.stride)
            )
            im = (
                ad.conv2d(x.im, self.w_re, self.b_im, stride=self.stride)
                + ad.conv2d(x.re, self.w_im, None, stride=self.stride)
            )
        return activate(self.activation, ComplexTensor(re, im), self.mix)

    def parameters(self):
        params = [
            (f"{self.name}.w_re", self.w_re),
            (f"{self.name}.w_im", self.w_im),
            (f"{self.name}.b_re", self.b_re),
            (f"{self.name}.b_im", self.b_im),
        ]
        if self.mix is not None:
            params.append((f"{self.name}.mu_logits", self.mix.logits))
        return params


class DiagonalLayer:
    """Elementwise multiplication by exp(i * beta); preserves magnitudes."""

    def __init__(self, n_freqs: int, n_frames: int, name: str = "diag"):
        self.beta = ad.parameter(np.zeros((n_freqs, n_frames)))
        self.name = name

    def forward(self, x: ComplexTensor) -> ComplexTensor:
        if x.shape[-2:] != self.beta.data.shape:
            raise StructuralError(
                f"diagonal layer expects trailing shape {self.beta.data.shape}, "
                f"got {x.shape[-2:]}"
            )
        c, s = ad.cos(self.beta), ad.sin(self.beta)
        re = c * x.re - s * x.im
        im = s * x.re + c * x.im
        return ComplexTensor(re, im)

    def parameters(self):
        return [(f"{self.name}.beta", self.beta)]


class ComplexInstanceNorm:
    """Per-channel normalization applied separately to real and imaginary parts."""

    def __init__(self, n_channels: int, eps: float = 1e-5, name: str = "norm"):
        self.gain_re = ad.parameter(np.ones(n_channels))
        self.gain_im = ad.parameter(np.ones(n_channels))
        self.bias_re = ad.parameter(np.zeros(n_channels))
        self.bias_im = ad.parameter(np.zeros(n_channels))
        self.eps = eps
        self.name = name

    def _normalize(self, t: Tensor, gain: Tensor, bias: Tensor) -> Tensor:
        mean = ad.tmean(t, axis=(2, 3), keepdims=True)
        centered = t - mean
        var = ad.tmean(ad.square(centered), axis=(2, 3), keepdims=True)
        inv = Tensor(1.0) / ad.sqrt(var + self.eps)
        g = ad.reshape(gain, (1, -1, 1, 1))
        b = ad.reshape(bias, (1, -1, 1, 1))
        return centered * inv * g + b

    def forward(self, x: ComplexTensor) -> ComplexTensor:
        return ComplexTensor(
            self._normalize(x.re, self.gain_re, self.bias_re),
            self._normalize(x.im, self.gain_im, self.bias_im),
        )

    def parameters(self):
        return [
            (f"{self.name}.gain_re", self.gain_re),
            (f"{self.name}.gain_im", self.gain_im),
            (f"{self.name}.bias_re", self.bias_re),
            (f"{self.name}.bias_im", self.bias_im),
        ]
