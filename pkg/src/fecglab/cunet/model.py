"""Complex UNet: encoder/bottleneck/decoder with diagonal entry/exit layers.

The network operates on fixed-geometry spectrogram tiles: diagonal layers own
one phase per time-frequency bin, so a model instance is built for a specific
(F, T) grid. Interior processing pads the grid to a multiple of 2**depth and
crops back before the exit diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..errors import StructuralError
from .layers import (
    ComplexConvLayer,
    ComplexInstanceNorm,
    ComplexTensor,
    DiagonalLayer,
)


@dataclass(frozen=True)
class CUNetConfig:
    n_freqs: int
    n_frames: int
    depth: int = 3
    channels: tuple = (8, 16, 32)
    kernel: int = 3
    activation: str = "rho"
    conv_mode: str = "split"  # "full" enables the complex-product ablation
    seed: int = 0

    def __post_init__(self):
        if len(self.channels) != self.depth:
            raise StructuralError("need one channel width per depth level")


class _DownBlock:
    def __init__(self, n_in, n_out, cfg, rng, name):
        self.conv = ComplexConvLayer(
            n_in, n_out, cfg.kernel, cfg.activation, 1, cfg.conv_mode, rng, f"{name}.conv"
        )
        self.norm = ComplexInstanceNorm(n_out, name=f"{name}.norm")
        self.down = ComplexConvLayer(
            n_out, n_out, cfg.kernel, cfg.activation, 2, cfg.conv_mode, rng, f"{name}.down"
        )

    def forward(self, x):
        skip = self.norm.forward(self.conv.forward(x))
        return self.down.forward(skip), skip

    def parameters(self):
        return self.conv.parameters() + self.norm.parameters() + self.down.parameters()


class _UpBlock:
    def __init__(self, n_in, n_skip, n_out, cfg, rng, name):
        self.conv = ComplexConvLayer(
            n_in + n_skip, n_out, cfg.kernel, cfg.activation, 1, cfg.conv_mode, rng,
            f"{name}.conv",
        )
        self.norm = ComplexInstanceNorm(n_out, name=f"{name}.norm")

    def forward(self, x, skip):
        up = ComplexTensor(ad.upsample2x(x.re), ad.upsample2x(x.im))
        cat = ComplexTensor(
            ad.concat([up.re, skip.re], axis=1),
            ad.concat([up.im, skip.im], axis=1),
        )
        return self.norm.forward(self.conv.forward(cat))

    def parameters(self):
        return self.conv.parameters() + self.norm.parameters()


class CUNet:
    """The complex UNet with all learnable state."""

    def __init__(self, cfg: CUNetConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        self.entry_diag = DiagonalLayer(cfg.n_freqs, cfg.n_frames, "entry_diag")
        self.exit_diag = DiagonalLayer(cfg.n_freqs, cfg.n_frames, "exit_diag")

        self.down_blocks = []
        prev = 1
        for i, ch in enumerate(cfg.channels):
            self.down_blocks.append(_DownBlock(prev, ch, cfg, rng, f"down{i}"))
            prev = ch

        if cfg.depth > 0:
            self.bottleneck = ComplexConvLayer(
                prev, prev, cfg.kernel, cfg.activation, 1, cfg.conv_mode, rng, "bottleneck"
            )
            self.bottleneck_norm = ComplexInstanceNorm(prev, name="bottleneck.norm")
        else:
            self.bottleneck = None
            self.bottleneck_norm = None

        self.up_blocks = []
        cur = prev
        for i in reversed(range(cfg.depth)):
            skip_ch = cfg.channels[i]
            out_ch = cfg.channels[i - 1] if i > 0 else cfg.channels[0]
            self.up_blocks.append(_UpBlock(cur, skip_ch, out_ch, cfg, rng, f"up{i}"))
            cur = out_ch

        self.out_conv = ComplexConvLayer(
            cur, 1, 1, "identity", 1, cfg.conv_mode, rng, "out_conv"
        )

    # -- parameter plumbing -------------------------------------------------

    def parameters(self):
        """Ordered (name, Tensor) pairs; the order is the checkpoint order."""
        params = self.entry_diag.parameters()
        for blk in self.down_blocks:
            params += blk.parameters()
        if self.bottleneck is not None:
            params += self.bottleneck.parameters()
            params += self.bottleneck_norm.parameters()
        for blk in self.up_blocks:
            params += blk.parameters()
        params += self.out_conv.parameters()
        params += self.exit_diag.parameters()
        return params

    def zero_grad(self):
        for _, p in self.parameters():
            p.grad = None

    def get_state(self):
        return [(name, p.data.copy()) for name, p in self.parameters()]

    def set_state(self, state):
        params = self.parameters()
        if len(state) != len(params):
            raise StructuralError("state size mismatch")
        for (name, p), (sname, data) in zip(params, state):
            if name != sname or p.data.shape != data.shape:
                raise StructuralError(f"state entry {sname!r} does not match {name!r}")
            p.data = data.copy().astype(np.float64)

    # -- forward --------------------------------------------------------------

    def forward(self, x: ComplexTensor) -> ComplexTensor:
        cfg = self.cfg
        if x.shape[-2:] != (cfg.n_freqs, cfg.n_frames):
            raise StructuralError(
                f"model built for grid {(cfg.n_freqs, cfg.n_frames)}, got {x.shape[-2:]}"
            )
        z = self.entry_diag.forward(x)

        factor = 2 ** cfg.depth
        pad_f = (-cfg.n_freqs) % factor
        pad_t = (-cfg.n_frames) % factor
        if pad_f or pad_t:
            z = ComplexTensor(ad.pad2d(z.re, pad_f, pad_t), ad.pad2d(z.im, pad_f, pad_t))

        skips = []
        for blk in self.down_blocks:
            z, skip = blk.forward(z)
            skips.append(skip)
        if self.bottleneck is not None:
            z = self.bottleneck_norm.forward(self.bottleneck.forward(z))
        for blk, skip in zip(self.up_blocks, reversed(skips)):
            z = blk.forward(z, skip)
        z = self.out_conv.forward(z)

        if pad_f or pad_t:
            z = ComplexTensor(
                ad.crop2d(z.re, cfg.n_freqs, cfg.n_frames),
                ad.crop2d(z.im, cfg.n_freqs, cfg.n_frames),
            )
        return self.exit_diag.forward(z)

    def forward_complex(self, grid: np.ndarray) -> np.ndarray:
        """Inference-only helper: complex (B, F, T) in, complex (B, F, T) out."""
        grid = np.asarray(grid, dtype=np.complex128)
        x = ComplexTensor.from_complex(grid[:, None, :, :])
        y = self.forward(x)
        return y.to_complex()[:, 0]


def make_identity_model(n_freqs: int, n_frames: int) -> CUNet:
    """Depth-0 net that reproduces its input: zero phases, unit 1x1 kernels."""
    model = CUNet(CUNetConfig(n_freqs=n_freqs, n_frames=n_frames, depth=0, channels=()))
    model.out_conv.w_re.data = np.ones((1, 1, 1, 1))
    model.out_conv.w_im.data = np.ones((1, 1, 1, 1))
    model.out_conv.b_re.data = np.zeros(1)
    model.out_conv.b_im.data = np.zeros(1)
    return model
