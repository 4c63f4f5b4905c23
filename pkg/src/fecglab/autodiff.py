"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Complex network quantities are represented as pairs of real tensors (the
real/imaginary split), so this engine only ever differentiates real-valued
computation graphs. Every op is CPU numpy with a fixed reduction order,
which keeps runs bit-identical under a fixed seed.
"""

from __future__ import annotations

import numpy as np

from .errors import StructuralError


class Tensor:
    """Node in the computation tape."""

    __slots__ = ("data", "grad", "parents", "requires_grad")

    def __init__(self, data, parents=(), requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        # parents: tuple of (Tensor, fn) where fn maps upstream grad ->
        # contribution to that parent's grad.
        self.parents = parents
        self.requires_grad = requires_grad or any(p.requires_grad for p, _ in parents)

    @property
    def shape(self):
        return self.data.shape

    # -- operators ---------------------------------------------------------

    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return add(self, neg(_wrap(other)))

    def __rsub__(self, other):
        return add(_wrap(other), neg(self))

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __neg__(self):
        return neg(self)

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise StructuralError("implicit backward requires a scalar output")
            grad = np.ones_like(self.data)
        order = _topo_order(self)
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad and not node.parents:
                node.grad = g if node.grad is None else node.grad + g
            for parent, fn in node.parents:
                if not parent.requires_grad:
                    continue
                contrib = fn(g)
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + contrib
                else:
                    grads[key] = contrib
            # Interior nodes keep their grads too, handy for layer tests.
            if node.parents and node.requires_grad:
                node.grad = g


def _topo_order(root: Tensor):
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            stack.append((parent, False))
    return list(reversed(order))


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward pass."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -- elementwise ops --------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    return Tensor(
        a.data + b.data,
        parents=(
            (a, lambda g: _unbroadcast(g, a.data.shape)),
            (b, lambda g: _unbroadcast(g, b.data.shape)),
        ),
    )


def neg(a: Tensor) -> Tensor:
    return Tensor(-a.data, parents=((a, lambda g: -g),))


def mul(a: Tensor, b: Tensor) -> Tensor:
    return Tensor(
        a.data * b.data,
        parents=(
            (a, lambda g: _unbroadcast(g * b.data, a.data.shape)),
            (b, lambda g: _unbroadcast(g * a.data, b.data.shape)),
        ),
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    return Tensor(
        a.data / b.data,
        parents=(
            (a, lambda g: _unbroadcast(g / b.data, a.data.shape)),
            (b, lambda g: _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)),
        ),
    )


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return Tensor(a.data * mask, parents=((a, lambda g: g * mask),))


def minimum(a: Tensor, b: Tensor) -> Tensor:
    take_a = a.data <= b.data
    return Tensor(
        np.where(take_a, a.data, b.data),
        parents=(
            (a, lambda g: _unbroadcast(g * take_a, a.data.shape)),
            (b, lambda g: _unbroadcast(g * ~take_a, b.data.shape)),
        ),
    )


def maximum(a: Tensor, b: Tensor) -> Tensor:
    take_a = a.data >= b.data
    return Tensor(
        np.where(take_a, a.data, b.data),
        parents=(
            (a, lambda g: _unbroadcast(g * take_a, a.data.shape)),
            (b, lambda g: _unbroadcast(g * ~take_a, b.data.shape)),
        ),
    )


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return Tensor(out, parents=((a, lambda g: g * 0.5 / np.maximum(out, 1e-300)),))


def hypot(a: Tensor, b: Tensor) -> Tensor:
    """sqrt(a^2 + b^2) with zero (sub)gradient at the origin."""
    out = np.hypot(a.data, b.data)
    safe = np.maximum(out, 1e-300)
    return Tensor(
        out,
        parents=(
            (a, lambda g: g * np.where(out > 0, a.data / safe, 0.0)),
            (b, lambda g: g * np.where(out > 0, b.data / safe, 0.0)),
        ),
    )


def square(a: Tensor) -> Tensor:
    return Tensor(a.data * a.data, parents=((a, lambda g: g * 2.0 * a.data),))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return Tensor(out, parents=((a, lambda g: g * out),))


def cos(a: Tensor) -> Tensor:
    return Tensor(np.cos(a.data), parents=((a, lambda g: -g * np.sin(a.data)),))


def sin(a: Tensor) -> Tensor:
    return Tensor(np.sin(a.data), parents=((a, lambda g: g * np.cos(a.data)),))


# -- reductions and shape ops ------------------------------------------------


def tsum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return np.broadcast_to(g, a.data.shape).copy()
        g2 = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(g2, a.data.shape).copy()

    return Tensor(out, parents=((a, backward),))


def tmean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    if axis is None:
        count = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.data.shape[ax] for ax in axes]))
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


def reshape(a: Tensor, shape) -> Tensor:
    return Tensor(
        a.data.reshape(shape),
        parents=((a, lambda g: g.reshape(a.data.shape)),),
    )


def concat(tensors, axis: int) -> Tensor:
    datas = [t.data for t in tensors]
    out = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def make_backward(i):
        sl = [slice(None)] * out.ndim
        sl[axis] = slice(offsets[i], offsets[i + 1])
        sl = tuple(sl)
        return lambda g: g[sl]

    return Tensor(out, parents=tuple((t, make_backward(i)) for i, t in enumerate(tensors)))


def pad2d(a: Tensor, pad_h: int, pad_w: int) -> Tensor:
    """Zero-pad the two trailing axes (bottom/right only)."""
    widths = [(0, 0)] * (a.data.ndim - 2) + [(0, pad_h), (0, pad_w)]
    out = np.pad(a.data, widths)
    h, w = a.data.shape[-2:]

    def backward(g):
        return g[..., :h, :w]

    return Tensor(out, parents=((a, backward),))


def crop2d(a: Tensor, h: int, w: int) -> Tensor:
    """Keep the top-left h x w corner of the two trailing axes."""

    def backward(g):
        widths = [(0, 0)] * (a.data.ndim - 2) + [
            (0, a.data.shape[-2] - h),
            (0, a.data.shape[-1] - w),
        ]
        return np.pad(g, widths)

    return Tensor(a.data[..., :h, :w], parents=((a, backward),))


def upsample2x(a: Tensor) -> Tensor:
    """Nearest-neighbor x2 upsampling of the two trailing axes."""
    out = a.data.repeat(2, axis=-2).repeat(2, axis=-1)

    def backward(g):
        s = g.shape
        g = g.reshape(s[:-2] + (s[-2] // 2, 2, s[-1] // 2, 2))
        return g.sum(axis=(-3, -1))

    return Tensor(out, parents=((a, backward),))


# -- spectral ops (linear, with hand-derived adjoints) ------------------------


def irfft_pair(re: Tensor, im: Tensor, n: int) -> Tensor:
    """Inverse one-sided FFT of (re + i*im) along the last axis.

    Imaginary parts of the DC and Nyquist bins do not influence the real
    output, so their gradients are zero.
    """
    out = np.fft.irfft(re.data + 1j * im.data, n=n)
    n_bins = re.data.shape[-1]
    scale = np.full(n_bins, 2.0 / n)
    scale[0] = 1.0 / n
    if n % 2 == 0 and n_bins == n // 2 + 1:
        scale[-1] = 1.0 / n

    def backward_re(g):
        return np.fft.rfft(g, n=n).real * scale

    def backward_im(g):
        gi = np.fft.rfft(g, n=n).imag * scale
        gi[..., 0] = 0.0
        if n % 2 == 0 and n_bins == n // 2 + 1:
            gi[..., -1] = 0.0
        return gi

    return Tensor(out, parents=((re, backward_re), (im, backward_im)))


def overlap_add(frames: Tensor, hop: int, out_len: int) -> Tensor:
    """Sum frames (..., n_frames, frame_len) into a signal of out_len samples."""
    n_frames, frame_len = frames.data.shape[-2:]
    lead = frames.data.shape[:-2]
    out = np.zeros(lead + (out_len,))
    for t in range(n_frames):
        start = t * hop
        out[..., start : start + frame_len] += frames.data[..., t, :]

    def backward(g):
        grad = np.empty_like(frames.data)
        for t in range(n_frames):
            start = t * hop
            grad[..., t, :] = g[..., start : start + frame_len]
        return grad

    return Tensor(out, parents=((frames, backward),))


def slice_last(a: Tensor, start: int, stop: int) -> Tensor:
    def backward(g):
        grad = np.zeros_like(a.data)
        grad[..., start:stop] = g
        return grad

    return Tensor(a.data[..., start:stop], parents=((a, backward),))


# -- 2-D convolution ----------------------------------------------------------


def _im2col(x: np.ndarray, k: int, stride: int, pad: int):
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    h_out = (h + 2 * pad - k) // stride + 1
    w_out = (w + 2 * pad - k) // stride + 1
    sb, sc, sh, sw = xp.strides
    patches = np.lib.stride_tricks.as_strided(
        xp,
        shape=(b, c, k, k, h_out, w_out),
        strides=(sb, sc, sh, sw, sh * stride, sw * stride),
        writeable=False,
    )
    cols = patches.reshape(b, c * k * k, h_out * w_out)
    return np.ascontiguousarray(cols), h_out, w_out


def _col2im(cols: np.ndarray, x_shape, k: int, stride: int, pad: int):
    b, c, h, w = x_shape
    h_out = (h + 2 * pad - k) // stride + 1
    w_out = (w + 2 * pad - k) // stride + 1
    xp = np.zeros((b, c, h + 2 * pad, w + 2 * pad))
    cols = cols.reshape(b, c, k, k, h_out, w_out)
    for i in range(k):
        for j in range(k):
            xp[:, :, i : i + stride * h_out : stride, j : j + stride * w_out : stride] += cols[
                :, :, i, j
            ]
    if pad:
        return xp[:, :, pad:-pad, pad:-pad]
    return xp


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1) -> Tensor:
    """Same-padded 2-D convolution. x: (B,Cin,H,W); w: (Cout,Cin,k,k)."""
    n_out, n_in, k, k2 = w.data.shape
    if k != k2:
        raise StructuralError("kernels must be square")
    if x.data.shape[1] != n_in:
        raise StructuralError(
            f"input has {x.data.shape[1]} channels, kernel expects {n_in}"
        )
    pad = (k - 1) // 2
    cols, h_out, w_out = _im2col(x.data, k, stride, pad)
    w_mat = w.data.reshape(n_out, n_in * k * k)
    out = np.matmul(w_mat, cols).reshape(x.data.shape[0], n_out, h_out, w_out)
    if b is not None:
        out = out + b.data.reshape(1, n_out, 1, 1)

    def backward_x(g):
        g_mat = g.reshape(g.shape[0], n_out, -1)
        g_cols = np.matmul(w_mat.T, g_mat)
        return _col2im(g_cols, x.data.shape, k, stride, pad)

    def backward_w(g):
        g_mat = g.reshape(g.shape[0], n_out, -1)
        gw = np.matmul(g_mat, cols.transpose(0, 2, 1)).sum(axis=0)
        return gw.reshape(w.data.shape)

    parents = [(x, backward_x), (w, backward_w)]
    if b is not None:
        parents.append((b, lambda g: g.sum(axis=(0, 2, 3))))
    return Tensor(out, parents=tuple(parents))
