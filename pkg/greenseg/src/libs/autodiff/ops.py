import functools
from typing import Optional, Union

import numpy as np

try:
    from .enums import Mode, PoolKind
    from .exceptions import ContractViolation
    from .tensor import Tensor, as_tensor, record
except (ImportError, ModuleNotFoundError):
    from enums import Mode, PoolKind
    from exceptions import ContractViolation
    from tensor import Tensor, as_tensor, record

Padding = Union[int, tuple[int, int, int, int]]


def _expect_rank(t: Tensor, rank: int, op: str, label: str) -> None:
    if t.ndim != rank:
        raise ContractViolation(
            f"{op}: {label} must have rank {rank}, got shape {t.shape}")


def _padding(pad: Padding) -> tuple[int, int, int, int]:
    if isinstance(pad, int):
        return pad, pad, pad, pad
    if len(pad) != 4:
        raise ContractViolation(
            f"padding must be an int or (top, bottom, left, right), got {pad}")
    return tuple(int(p) for p in pad)


def _tap(offset: int, step: int, count: int) -> slice:
    return slice(offset, offset + step * (count - 1) + 1, step)


def conv2d(x: Tensor,
           k: Tensor,
           b: Optional[Tensor] = None,
           stride: int = 1,
           pad: Padding = 0,
           dilation: int = 1) -> Tensor:
    """2-D cross-correlation over NCHW input with an (Cout, Cin, Kh, Kw) kernel.

    Taps are accumulated one by one, so a dilated kernel gives bitwise the
    same result as the equivalent zero-inflated dense kernel.
    """
    _expect_rank(x, 4, "conv2d", "x")
    _expect_rank(k, 4, "conv2d", "k")
    n, c, h, w = x.shape
    cout, cin, kh, kw = k.shape
    if c != cin:
        raise ContractViolation(
            f"conv2d: x has {c} channels on axis 1, kernel expects {cin}")
    if b is not None and b.shape != (cout,):
        raise ContractViolation(
            f"conv2d: bias shape {b.shape} does not match {cout} output channels")
    if stride < 1 or dilation < 1:
        raise ContractViolation(
            f"conv2d: stride and dilation must be >= 1, got {stride}, {dilation}")

    top, bottom, left, right = _padding(pad)
    hp, wp = h + top + bottom, w + left + right
    ekh, ekw = (kh - 1) * dilation + 1, (kw - 1) * dilation + 1
    if ekh > hp or ekw > wp:
        raise ContractViolation(
            f"conv2d: effective kernel {ekh}x{ekw} exceeds padded input {hp}x{wp}")
    ho, wo = (hp - ekh) // stride + 1, (wp - ekw) // stride + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (top, bottom), (left, right)))
    dtype = np.result_type(x.dtype, k.dtype)
    acc = np.zeros((cout, n, ho, wo), dtype=dtype)
    for i in range(kh):
        for j in range(kw):
            window = xp[:, :, _tap(i * dilation, stride, ho), _tap(j * dilation, stride, wo)]
            acc += np.tensordot(k.data[:, :, i, j], window, axes=([1], [1]))
    out = np.ascontiguousarray(acc.transpose(1, 0, 2, 3))
    if b is not None:
        out += b.data[None, :, None, None]

    def backward(g: np.ndarray):
        gt = g.transpose(1, 0, 2, 3)
        gk = np.zeros_like(k.data) if k.requires_grad else None
        gxp = np.zeros_like(xp) if x.requires_grad else None
        for i in range(kh):
            for j in range(kw):
                rows = _tap(i * dilation, stride, ho)
                cols = _tap(j * dilation, stride, wo)
                if gk is not None:
                    gk[:, :, i, j] = np.tensordot(
                        gt, xp[:, :, rows, cols], axes=([1, 2, 3], [0, 2, 3]))
                if gxp is not None:
                    gxp[:, :, rows, cols] += np.tensordot(
                        k.data[:, :, i, j], gt, axes=([0], [0])).transpose(1, 0, 2, 3)
        gx = None if gxp is None else gxp[:, :, top:top + h, left:left + w]
        gb = None if b is None else g.sum(axis=(0, 2, 3)).astype(b.dtype)
        return gx, gk, gb

    parents = (x, k) if b is None else (x, k, b)
    return record(out, parents, backward)


def transposed_conv2d(x: Tensor,
                      k: Tensor,
                      b: Optional[Tensor] = None,
                      stride: int = 2) -> Tensor:
    """Adjoint of a no-padding strided conv2d. Kernel layout is (Cin, Cout, Kh, Kw)."""
    _expect_rank(x, 4, "transposed_conv2d", "x")
    _expect_rank(k, 4, "transposed_conv2d", "k")
    n, c, h, w = x.shape
    cin, cout, kh, kw = k.shape
    if c != cin:
        raise ContractViolation(
            f"transposed_conv2d: x has {c} channels on axis 1, kernel expects {cin}")
    if b is not None and b.shape != (cout,):
        raise ContractViolation(
            f"transposed_conv2d: bias shape {b.shape} does not match {cout} channels")

    ho, wo = (h - 1) * stride + kh, (w - 1) * stride + kw
    out = np.zeros((n, cout, ho, wo), dtype=np.result_type(x.dtype, k.dtype))
    for i in range(kh):
        for j in range(kw):
            out[:, :, _tap(i, stride, h), _tap(j, stride, w)] += np.tensordot(
                x.data, k.data[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
    if b is not None:
        out += b.data[None, :, None, None]

    def backward(g: np.ndarray):
        gx = np.zeros_like(x.data) if x.requires_grad else None
        gk = np.zeros_like(k.data) if k.requires_grad else None
        for i in range(kh):
            for j in range(kw):
                window = g[:, :, _tap(i, stride, h), _tap(j, stride, w)]
                if gx is not None:
                    gx += np.tensordot(
                        window, k.data[:, :, i, j], axes=([1], [1])).transpose(0, 3, 1, 2)
                if gk is not None:
                    gk[:, :, i, j] = np.tensordot(
                        x.data, window, axes=([0, 2, 3], [0, 2, 3]))
        gb = None if b is None else g.sum(axis=(0, 2, 3)).astype(b.dtype)
        return gx, gk, gb

    parents = (x, k) if b is None else (x, k, b)
    return record(out, parents, backward)


@functools.lru_cache(maxsize=32)
def _upsample_matrix(n: int) -> np.ndarray:
    """(2n, n) bilinear interpolation weights, half-pixel centres, clamped edges."""
    matrix = np.zeros((2 * n, n))
    for o in range(2 * n):
        src = min(max((o + 0.5) / 2.0 - 0.5, 0.0), n - 1.0)
        i0 = int(np.floor(src))
        i1 = min(i0 + 1, n - 1)
        frac = src - i0
        matrix[o, i0] += 1.0 - frac
        matrix[o, i1] += frac
    matrix.setflags(write=False)
    return matrix


def bilinear_upsample2x(x: Tensor) -> Tensor:
    _expect_rank(x, 4, "bilinear_upsample2x", "x")
    _, _, h, w = x.shape
    ah = _upsample_matrix(h).astype(x.dtype)
    aw = _upsample_matrix(w).astype(x.dtype)
    out = np.matmul(np.matmul(ah, x.data), aw.T)

    def backward(g: np.ndarray):
        return (np.matmul(np.matmul(ah.T, g), aw),)

    return record(out, (x,), backward)


def pool2d(x: Tensor,
           kind: Union[PoolKind, str] = PoolKind.MAX,
           size: int = 2,
           stride: int = 2) -> Tensor:
    """Non-overlapping pooling. Max ties resolve to the first window element
    in row-major order."""
    _expect_rank(x, 4, "pool2d", "x")
    kind = PoolKind(kind)
    if size != stride:
        raise ContractViolation(
            f"pool2d: only non-overlapping windows are supported, got size {size}, stride {stride}")
    n, c, h, w = x.shape
    if h % stride or w % stride:
        raise ContractViolation(
            f"pool2d: spatial size {h}x{w} is not divisible by stride {stride}")
    ho, wo = h // stride, w // stride
    windows = (x.data.reshape(n, c, ho, stride, wo, stride)
               .transpose(0, 1, 2, 4, 3, 5)
               .reshape(n, c, ho, wo, stride * stride))

    def unfold(gw: np.ndarray) -> np.ndarray:
        return (gw.reshape(n, c, ho, wo, stride, stride)
                .transpose(0, 1, 2, 4, 3, 5)
                .reshape(n, c, h, w))

    match kind:
        case PoolKind.MAX:
            idx = windows.argmax(axis=-1)[..., None]
            out = np.take_along_axis(windows, idx, axis=-1)[..., 0]

            def backward(g: np.ndarray):
                gw = np.zeros_like(windows)
                np.put_along_axis(gw, idx, g[..., None], axis=-1)
                return (unfold(gw),)
        case PoolKind.AVG:
            out = windows.mean(axis=-1)

            def backward(g: np.ndarray):
                gw = np.broadcast_to(g[..., None] / (stride * stride), windows.shape)
                return (unfold(np.ascontiguousarray(gw)),)

    return record(out, (x,), backward)


def batch_norm(x: Tensor,
               gamma: Tensor,
               beta: Tensor,
               running_mean: Tensor,
               running_var: Tensor,
               mode: Union[Mode, str] = Mode.TRAIN,
               momentum: float = 0.9,
               epsilon: float = 1e-5) -> Tensor:
    """Per-channel normalisation over (N, H, W).

    In training mode batch statistics (biased variance) are used and the
    running buffers are updated in place as
    ``running = momentum * running + (1 - momentum) * batch``.
    """
    _expect_rank(x, 4, "batch_norm", "x")
    channels = x.shape[1]
    for label, t in (("gamma", gamma), ("beta", beta),
                     ("running_mean", running_mean), ("running_var", running_var)):
        if t.shape != (channels,):
            raise ContractViolation(
                f"batch_norm: {label} shape {t.shape} does not match {channels} channels")

    g_ = gamma.data[None, :, None, None]
    if Mode(mode) is Mode.TRAIN:
        mean = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        inv_std = 1.0 / np.sqrt(var + epsilon)
        xhat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
        running_mean.data[...] = momentum * running_mean.data + (1.0 - momentum) * mean
        running_var.data[...] = momentum * running_var.data + (1.0 - momentum) * var
        m = x.data.size // channels

        def backward(g: np.ndarray):
            gxhat = g * g_
            gx = (inv_std[None, :, None, None] / m) * (
                m * gxhat
                - gxhat.sum(axis=(0, 2, 3), keepdims=True)
                - xhat * (gxhat * xhat).sum(axis=(0, 2, 3), keepdims=True))
            return (gx,
                    (g * xhat).sum(axis=(0, 2, 3)).astype(gamma.dtype),
                    g.sum(axis=(0, 2, 3)).astype(beta.dtype))
    else:
        inv_std = 1.0 / np.sqrt(running_var.data + epsilon)
        xhat = (x.data - running_mean.data[None, :, None, None]) * inv_std[None, :, None, None]

        def backward(g: np.ndarray):
            return (g * g_ * inv_std[None, :, None, None],
                    (g * xhat).sum(axis=(0, 2, 3)).astype(gamma.dtype),
                    g.sum(axis=(0, 2, 3)).astype(beta.dtype))

    out = (xhat * g_ + beta.data[None, :, None, None]).astype(x.dtype, copy=False)
    return record(out, (x, gamma, beta), backward)


def leaky_relu(x: Tensor, slope: float = 0.0) -> Tensor:
    """``x`` where positive, ``slope * x`` otherwise (zero takes the negative branch)."""
    positive = x.data > 0
    out = np.where(positive, x.data, slope * x.data).astype(x.dtype, copy=False)

    def backward(g: np.ndarray):
        return (np.where(positive, g, slope * g).astype(g.dtype, copy=False),)

    return record(out, (x,), backward)


def relu(x: Tensor) -> Tensor:
    return leaky_relu(x, 0.0)


def sigmoid(x: Tensor) -> Tensor:
    decay = np.exp(-np.abs(x.data))
    out = np.where(x.data >= 0, 1.0 / (1.0 + decay), decay / (1.0 + decay)).astype(x.dtype)

    def backward(g: np.ndarray):
        return (g * out * (1.0 - out),)

    return record(out, (x,), backward)


def dropout(x: Tensor,
            rate: float,
            mode: Union[Mode, str] = Mode.TRAIN,
            rng: Optional[np.random.Generator] = None) -> Tensor:
    """Inverted dropout: kept units are scaled by ``1 / (1 - rate)`` in
    training, inference is the identity."""
    if not 0.0 <= rate < 1.0:
        raise ContractViolation(f"dropout: rate must lie in [0, 1), got {rate}")
    if Mode(mode) is Mode.INFER or rate == 0.0:
        return x
    rng = rng if rng is not None else np.random.default_rng()
    scale = (rng.random(x.shape) >= rate).astype(x.dtype) / x.dtype.type(1.0 - rate)
    out = x.data * scale

    def backward(g: np.ndarray):
        return (g * scale,)

    return record(out, (x,), backward)


def concat_channels(*xs: Tensor) -> Tensor:
    if not xs:
        raise ContractViolation("concat_channels: needs at least one operand")
    for t in xs:
        _expect_rank(t, 4, "concat_channels", "operand")
    ref = xs[0].shape
    for t in xs[1:]:
        if (t.shape[0], t.shape[2], t.shape[3]) != (ref[0], ref[2], ref[3]):
            raise ContractViolation(
                f"concat_channels: shapes {ref} and {t.shape} differ outside axis 1")
    out = np.concatenate([t.data for t in xs], axis=1)
    bounds = np.cumsum([t.shape[1] for t in xs])[:-1]

    def backward(g: np.ndarray):
        return tuple(np.split(g, bounds, axis=1))

    return record(out, xs, backward)


def add(x: Union[Tensor, np.ndarray], y: Union[Tensor, np.ndarray]) -> Tensor:
    x, y = as_tensor(x), as_tensor(y)
    if x.shape != y.shape:
        raise ContractViolation(f"add: shapes {x.shape} and {y.shape} differ")
    out = x.data + y.data

    def backward(g: np.ndarray):
        return g, g

    return record(out, (x, y), backward)
