"""Minimal rank-3 tensor container and the static numerical kernels.

Every tensor is a read-only ``(channels, height, width)`` float32 array.
Kernels compute in float64 and store the result back to float32 with
saturation at the float32 range, so a finite input can never produce a
NaN or Inf no matter how large the intermediate activations grow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NonFiniteError, ShapeError

__all__ = [
    "Tensor",
    "ConvParams",
    "conv2d",
    "conv2d_reference",
    "bilinear_upsample",
    "global_avg_pool",
    "softmax_spatial",
    "relu",
    "store",
    "FLOAT32_MAX",
]

FLOAT32_MAX = float(np.finfo(np.float32).max)

# Output rows per conv2d band; bounds the im2col buffer on large frames.
_BAND_ELEMENTS = 1 << 22


def store(values) -> "Tensor":
    """Round float64 results to a float32 Tensor, saturating at +/-FLOAT32_MAX."""
    arr = np.asarray(values, dtype=np.float64)
    if np.isnan(arr).any():
        raise NonFiniteError("NaN produced inside a kernel")
    return Tensor(np.clip(arr, -FLOAT32_MAX, FLOAT32_MAX).astype(np.float32))


class Tensor:
    """Immutable channel-major ``(c, y, x)`` array of 32-bit floats."""

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float32, order="C", copy=True)
        if arr.ndim != 3:
            raise ShapeError(f"tensor must be rank 3 (c, h, w), got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteError("tensor data contains NaN or Inf")
        arr.flags.writeable = False
        self._data = arr

    @classmethod
    def full(cls, channels: int, height: int, width: int, value: float) -> "Tensor":
        return cls(np.full((channels, height, width), value, dtype=np.float32))

    @classmethod
    def zeros(cls, channels: int, height: int, width: int) -> "Tensor":
        return cls.full(channels, height, width, 0.0)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple[int, int, int]:
        return self._data.shape

    @property
    def channels(self) -> int:
        return self._data.shape[0]

    @property
    def height(self) -> int:
        return self._data.shape[1]

    @property
    def width(self) -> int:
        return self._data.shape[2]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._data
        return self._data.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._data, other._data)

    __hash__ = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


@dataclass(frozen=True)
class ConvParams:
    """Static convolution weights, ``weight`` shaped (out, in, k, k)."""

    weight: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: str = "replicate"

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float32)
        b = np.asarray(self.bias, dtype=np.float32)
        if w.ndim != 4 or w.shape[2] != w.shape[3]:
            raise ShapeError(f"conv weight must be (out, in, k, k), got {w.shape}")
        if w.shape[2] % 2 == 0:
            raise ShapeError(f"conv kernel size must be odd, got {w.shape[2]}")
        if b.shape != (w.shape[0],):
            raise ShapeError(f"conv bias must be ({w.shape[0]},), got {b.shape}")
        if self.stride not in (1, 2):
            raise ShapeError(f"stride must be 1 or 2, got {self.stride}")
        if self.padding != "replicate":
            raise ShapeError(f"unsupported padding mode {self.padding!r}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def kernel(self) -> int:
        return self.weight.shape[2]


def _check_conv(x: Tensor, params: ConvParams) -> None:
    if x.channels != params.in_channels:
        raise ShapeError(
            f"conv expects {params.in_channels} input channels, got {x.channels}"
        )


def conv2d(x: Tensor, params: ConvParams) -> Tensor:
    """Cross-correlation with replicate padding.

    Stride 2 samples output positions 0, 2, 4, ... so the output is
    ``ceil(H/2) x ceil(W/2)``.
    """
    _check_conv(x, params)
    k, s = params.kernel, params.stride
    pad = k // 2
    c_in, h, w = x.shape
    h_out, w_out = -(-h // s), -(-w // s)
    xp = np.pad(x.data.astype(np.float64), ((0, 0), (pad, pad), (pad, pad)), mode="edge")
    wmat = params.weight.astype(np.float64).reshape(params.out_channels, c_in * k * k)
    bias = params.bias.astype(np.float64)[:, None]

    out = np.empty((params.out_channels, h_out, w_out), dtype=np.float64)
    band = max(1, _BAND_ELEMENTS // max(1, c_in * k * k * w_out))
    for r0 in range(0, h_out, band):
        r1 = min(h_out, r0 + band)
        rows = xp[:, r0 * s : (r1 - 1) * s + k, :]
        win = sliding_window_view(rows, (k, k), axis=(1, 2))[:, ::s, ::s]
        # (c, rows, cols, ky, kx) -> (c, ky, kx, rows, cols)
        cols = win.transpose(0, 3, 4, 1, 2).reshape(c_in * k * k, (r1 - r0) * w_out)
        out[:, r0:r1, :] = (wmat @ cols + bias).reshape(-1, r1 - r0, w_out)
    return store(out)


def conv2d_reference(x: Tensor, params: ConvParams) -> np.ndarray:
    """Direct nested-loop evaluation of :func:`conv2d` in float64.

    Slow; used as an oracle only. Returns the unrounded float64 result.
    """
    _check_conv(x, params)
    k, s = params.kernel, params.stride
    pad = k // 2
    c_in, h, w = x.shape
    h_out, w_out = -(-h // s), -(-w // s)
    src = x.data.astype(np.float64)
    wt = params.weight.astype(np.float64)
    out = np.zeros((params.out_channels, h_out, w_out))
    for o in range(params.out_channels):
        for oy in range(h_out):
            for ox in range(w_out):
                acc = float(params.bias[o])
                for c in range(c_in):
                    for u in range(k):
                        yy = min(max(oy * s + u - pad, 0), h - 1)
                        for v in range(k):
                            xx = min(max(ox * s + v - pad, 0), w - 1)
                            acc += wt[o, c, u, v] * src[c, yy, xx]
                out[o, oy, ox] = acc
    return out


def _interp_axis(arr: np.ndarray, factor: int, axis: int) -> np.ndarray:
    n = arr.shape[axis]
    dst = np.arange(n * factor, dtype=np.float64)
    src = np.clip((dst + 0.5) / factor - 0.5, 0.0, n - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n - 1)
    t = src - i0
    shape = [1] * arr.ndim
    shape[axis] = -1
    t = t.reshape(shape)
    return np.take(arr, i0, axis=axis) * (1.0 - t) + np.take(arr, i1, axis=axis) * t


def bilinear_upsample(x: Tensor, factor: int) -> Tensor:
    """Bilinear resize by an integer factor, align-corners-false convention."""
    if factor < 1:
        raise ShapeError(f"upsample factor must be >= 1, got {factor}")
    if factor == 1:
        return x
    arr = _interp_axis(x.data.astype(np.float64), factor, axis=1)
    return store(_interp_axis(arr, factor, axis=2))


def global_avg_pool(x: Tensor) -> Tensor:
    return store(x.data.astype(np.float64).mean(axis=(1, 2), keepdims=True))


def softmax_spatial(x: Tensor) -> Tensor:
    """Softmax over all pixels of a single-channel map."""
    if x.channels != 1:
        raise ShapeError(f"softmax_spatial needs 1 channel, got {x.channels}")
    z = x.data.astype(np.float64)
    e = np.exp(z - z.max())
    return store(e / e.sum())


def relu(x: Tensor) -> Tensor:
    return Tensor(np.maximum(x.data, 0.0))
