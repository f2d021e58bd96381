"""Dynamic context feature transformation.

Per-pixel spatial kernels (SKP) and per-channel kernels (CKP) are predicted
from the features themselves, combined by decoupled dynamic filtering (DDF),
then refined by a global context block (CB).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .tensor import Tensor, conv2d, global_avg_pool, relu, softmax_spatial, store
from .weights import ModelWeights


@dataclass(frozen=True)
class SpatialKernels:
    """One k x k filter per pixel, flattened along the channel axis: (k*k, H, W)."""

    values: Tensor
    k: int

    def __post_init__(self):
        if self.values.channels != self.k * self.k:
            raise ShapeError(f"spatial kernels need {self.k * self.k} channels, got {self.values.channels}")


@dataclass(frozen=True)
class ChannelKernels:
    """One k x k filter per feature channel: (C, k, k)."""

    values: Tensor

    def __post_init__(self):
        if self.values.height != self.values.width:
            raise ShapeError(f"channel kernels must be square, got {self.values.shape}")

    @property
    def k(self) -> int:
        return self.values.height


def bottleneck(channels: int) -> int:
    return max(1, channels // 4)


def dyct_weight_shapes(prefix: str, channels: int, k: int = 3) -> dict[str, tuple[int, ...]]:
    c, kk, r = channels, k * k, bottleneck(channels)
    layers = {
        "skp.0": (c, c, 3, 3),
        "skp.1": (kk, c, 3, 3),
        "ckp": (c * kk, c, 1, 1),
        "cb.attn": (1, c, 1, 1),
        "cb.fc0": (r, c, 1, 1),
        "cb.fc1": (c, r, 1, 1),
    }
    shapes: dict[str, tuple[int, ...]] = {}
    for name, shape in layers.items():
        shapes[f"{prefix}.{name}.weight"] = shape
        shapes[f"{prefix}.{name}.bias"] = (shape[0],)
    return shapes


def skp_predict(f: Tensor, weights: ModelWeights, prefix: str, k: int = 3,
                normalize: bool = False) -> SpatialKernels:
    hidden = relu(conv2d(f, weights.conv(f"{prefix}.skp.0")))
    ks = conv2d(hidden, weights.conv(f"{prefix}.skp.1"))
    if normalize:
        # softmax over taps at each pixel
        z = ks.data.astype(np.float64)
        e = np.exp(z - z.max(axis=0, keepdims=True))
        ks = store(e / e.sum(axis=0, keepdims=True))
    return SpatialKernels(ks, k)


def ckp_predict(f: Tensor, weights: ModelWeights, prefix: str, k: int = 3) -> ChannelKernels:
    flat = conv2d(global_avg_pool(f), weights.conv(f"{prefix}.ckp"))
    if flat.channels != f.channels * k * k:
        raise ShapeError(f"ckp emits {flat.channels} values, expected {f.channels * k * k}")
    return ChannelKernels(Tensor(flat.data.reshape(f.channels, k, k)))


def _check_ddf(f: Tensor, ks: SpatialKernels, kc: ChannelKernels) -> int:
    k = ks.k
    if kc.k != k:
        raise ShapeError(f"spatial kernel size {k} differs from channel kernel size {kc.k}")
    if (ks.values.height, ks.values.width) != (f.height, f.width):
        raise ShapeError(f"spatial kernels {ks.values.shape} do not cover features {f.shape}")
    if kc.values.channels != f.channels:
        raise ShapeError(f"channel kernels for {kc.values.channels} channels, features have {f.channels}")
    return k


def ddf_apply(f: Tensor, ks: SpatialKernels, kc: ChannelKernels) -> Tensor:
    """Depthwise dynamic filtering with per-tap weight ``ks[t, i, j] * kc[c, t]``."""
    k = _check_ddf(f, ks, kc)
    pad = k // 2
    _, h, w = f.shape
    fp = np.pad(f.data.astype(np.float64), ((0, 0), (pad, pad), (pad, pad)), mode="edge")
    s = ks.values.data.astype(np.float64)
    c = kc.values.data.astype(np.float64)
    out = np.zeros(f.shape, dtype=np.float64)
    for u in range(k):
        for v in range(k):
            t = u * k + v
            out += (s[t][None] * c[:, u, v, None, None]) * fp[:, u : u + h, v : v + w]
    return store(out)


def ddf_oracle(f: Tensor, ks: SpatialKernels, kc: ChannelKernels) -> np.ndarray:
    """Matrix form of the local feature transform.

    At every pixel the full transform matrix of shape (C, k*k*C) is
    materialized (block-diagonal, since the filter is depthwise) and
    multiplied with the flattened k x k x C neighbourhood. Returns float64.
    """
    k = _check_ddf(f, ks, kc)
    pad = k // 2
    n_ch, h, w = f.shape
    src = f.data.astype(np.float64)
    s = ks.values.data.astype(np.float64)
    c = kc.values.data.astype(np.float64).reshape(n_ch, k * k)
    out = np.empty((n_ch, h, w))
    for i in range(h):
        rows = [min(max(i + u - pad, 0), h - 1) for u in range(k)]
        for j in range(w):
            cols = [min(max(j + v - pad, 0), w - 1) for v in range(k)]
            patch = np.array([[src[ch, r, q] for r in rows for q in cols] for ch in range(n_ch)])
            transform = np.zeros((n_ch, n_ch * k * k))
            for ch in range(n_ch):
                transform[ch, ch * k * k : (ch + 1) * k * k] = s[:, i, j] * c[ch]
            out[:, i, j] = transform @ patch.reshape(-1)
    return out


def context_vector(f: Tensor, weights: ModelWeights, prefix: str) -> Tensor:
    """Attention-pooled (C, 1, 1) descriptor of the whole feature map."""
    attn = softmax_spatial(conv2d(f, weights.conv(f"{prefix}.cb.attn")))
    pooled = np.einsum("chw,hw->c", f.data.astype(np.float64), attn.data[0].astype(np.float64))
    return store(pooled.reshape(-1, 1, 1))


def context_block(f: Tensor, weights: ModelWeights, prefix: str) -> Tensor:
    ctx = context_vector(f, weights, prefix)
    t = relu(conv2d(ctx, weights.conv(f"{prefix}.cb.fc0")))
    t = conv2d(t, weights.conv(f"{prefix}.cb.fc1"))
    if t.channels != f.channels:
        raise ShapeError(f"context transform emits {t.channels} channels, features have {f.channels}")
    return store(f.data.astype(np.float64) + t.data)


def dyct_forward(f: Tensor, weights: ModelWeights, prefix: str, k: int = 3,
                 normalize: bool = False) -> Tensor:
    ks = skp_predict(f, weights, prefix, k, normalize)
    kc = ckp_predict(f, weights, prefix, k)
    return context_block(ddf_apply(f, ks, kc), weights, prefix)


@dataclass(frozen=True)
class TransformFootprint:
    full: int  # values in the materialized per-pixel transform
    decoupled: int  # values emitted by decoupled spatial + channel prediction

    @property
    def ratio(self) -> float:
        return self.full / self.decoupled


def transform_footprint(height: int, width: int, c_in: int, c_out: int | None = None,
                        k: int = 3) -> TransformFootprint:
    """Kernel-value counts for a full versus decoupled dynamic transform.

    The full transform predicts ``c_out`` kernels of shape (k, k, c_in) at
    every pixel; the decoupled form predicts one k x k kernel per pixel plus
    one k x k kernel per channel.
    """
    if c_out is None:
        c_out = c_in
    return TransformFootprint(
        full=height * width * c_out * k * k * c_in,
        decoupled=height * width * k * k + c_in * k * k,
    )
