"""Hierarchical modulation: vector estimation (HME) and global-then-local
scale-and-shift (HM)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .color import ImageFrame
from .errors import ShapeError
from .tensor import Tensor, bilinear_upsample, conv2d, global_avg_pool, relu, store
from .weights import ModelWeights

HME_STAGES = 5
HME_FACTOR = 1 << HME_STAGES


@dataclass(frozen=True)
class ModulationSet:
    v_ga: Tensor  # (C, 1, 1) global scale
    v_gb: Tensor  # (C, 1, 1) global shift
    v_la: Tensor  # (C, H, W) local scale
    v_lb: Tensor  # (C, H, W) local shift

    def __post_init__(self):
        c = self.v_ga.channels
        if self.v_ga.shape != (c, 1, 1) or self.v_gb.shape != (c, 1, 1):
            raise ShapeError("global modulation vectors must be (C, 1, 1)")
        if self.v_la.shape != self.v_lb.shape or self.v_la.channels != c:
            raise ShapeError("local modulation fields must share shape (C, H, W)")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.v_la.shape

    @classmethod
    def identity(cls, channels: int, height: int, width: int) -> "ModulationSet":
        return cls(
            Tensor.full(channels, 1, 1, 1.0),
            Tensor.zeros(channels, 1, 1),
            Tensor.full(channels, height, width, 1.0),
            Tensor.zeros(channels, height, width),
        )


def hme_weight_shapes(channels: int) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    c_in = 3
    for i in range(HME_STAGES):
        shapes[f"hme.down.{i}.weight"] = (channels, c_in, 3, 3)
        shapes[f"hme.down.{i}.bias"] = (channels,)
        c_in = channels
    for branch in ("global", "local"):
        shapes[f"hme.{branch}.weight"] = (2 * channels, channels, 1, 1)
        shapes[f"hme.{branch}.bias"] = (2 * channels,)
    return shapes


def _split(t: Tensor) -> tuple[Tensor, Tensor]:
    half = t.channels // 2
    return Tensor(t.data[:half]), Tensor(t.data[half:])


def hme_features(x: Tensor, weights: ModelWeights) -> Tensor:
    """F_D5: five stride-2 3x3 convolutions, each followed by ReLU."""
    f = x
    for i in range(HME_STAGES):
        f = relu(conv2d(f, weights.conv(f"hme.down.{i}", stride=2)))
    return f


def hme_estimate(
    x_s: ImageFrame, weights: ModelWeights, target_dims: tuple[int, int, int]
) -> ModulationSet:
    """Predict global and local modulation fields from the input frame."""
    c, h, w = target_dims
    if (x_s.height, x_s.width) != (h, w):
        raise ShapeError(f"target dims {(h, w)} differ from frame {(x_s.height, x_s.width)}")
    if h % HME_FACTOR or w % HME_FACTOR:
        raise ShapeError(f"frame {h}x{w} is not divisible by {HME_FACTOR}; pad it first")
    f_d5 = hme_features(x_s.pixels, weights)
    if f_d5.channels != c:
        raise ShapeError(f"HME produces {f_d5.channels} channels, target needs {c}")

    v_ga, v_gb = _split(conv2d(global_avg_pool(f_d5), weights.conv("hme.global")))
    local = bilinear_upsample(conv2d(f_d5, weights.conv("hme.local")), HME_FACTOR)
    v_la, v_lb = _split(local)
    return ModulationSet(v_ga, v_gb, v_la, v_lb)


def hm_apply(f: Tensor, m: ModulationSet) -> Tensor:
    """``(f * v_ga + v_gb) * v_la + v_lb`` with the global vectors broadcast over space."""
    if f.shape != m.shape:
        raise ShapeError(f"feature map {f.shape} does not match modulation {m.shape}")
    g = f.data.astype(np.float64) * m.v_ga.data + m.v_gb.data
    return store(g * m.v_la.data + m.v_lb.data)
