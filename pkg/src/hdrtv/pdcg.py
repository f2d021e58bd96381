"""Stage-2 over-exposure generator and the mask blend."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .color import Gamut, ImageFrame, Mask, Transfer
from .dyct import dyct_forward, dyct_weight_shapes
from .errors import ConfigError, ShapeError
from .tensor import Tensor, bilinear_upsample, conv2d, relu, store
from .weights import ModelWeights

DOWN_STAGES = 3
UP_STAGES = 3


@dataclass(frozen=True)
class PdcgConfig:
    channels: int = 32
    blocks: int = 16
    kernel: int = 3
    normalize_kernels: bool = False

    def __post_init__(self):
        if self.blocks < 1:
            raise ConfigError(f"blocks must be >= 1, got {self.blocks}")
        if self.channels < 4:
            raise ConfigError(f"channels must be >= 4, got {self.channels}")

    def weight_shapes(self) -> dict[str, tuple[int, ...]]:
        c = self.channels
        shapes: dict[str, tuple[int, ...]] = {}

        def conv(name, c_out, c_in, k=3):
            shapes[f"{name}.weight"] = (c_out, c_in, k, k)
            shapes[f"{name}.bias"] = (c_out,)

        for i in range(DOWN_STAGES):
            conv(f"pdcg.down.{i}", c, 4 if i == 0 else c)
        for i in range(self.blocks):
            shapes.update(dyct_weight_shapes(f"pdcg.block.{i}.dyct", c, self.kernel))
            conv(f"pdcg.block.{i}.conv", c, c)
        for i in range(UP_STAGES):
            conv(f"pdcg.up.{i}", c, c)
        conv("pdcg.tail", 3, c)
        return shapes


def pdcg_encode(x_hr: ImageFrame, m_h: Mask, weights: ModelWeights) -> list[Tensor]:
    """F_d1, F_d2, F_d3 from the 4-channel (RGB + mask) input."""
    if (m_h.values.height, m_h.values.width) != (x_hr.height, x_hr.width):
        raise ShapeError(f"mask {m_h.values.shape} does not match frame {x_hr.pixels.shape}")
    f = Tensor(np.concatenate([x_hr.data, m_h.values.data], axis=0))
    feats = []
    for i in range(DOWN_STAGES):
        f = relu(conv2d(f, weights.conv(f"pdcg.down.{i}", stride=2)))
        feats.append(f)
    return feats


def pdcg_blocks(f: Tensor, weights: ModelWeights, cfg: PdcgConfig) -> Tensor:
    """Residual blocks in series, each ``f + conv(dyct(f))``."""
    for i in range(cfg.blocks):
        prefix = f"pdcg.block.{i}"
        y = dyct_forward(f, weights, f"{prefix}.dyct", cfg.kernel, cfg.normalize_kernels)
        y = conv2d(y, weights.conv(f"{prefix}.conv"))
        f = store(f.data.astype(np.float64) + y.data)
    return f


def pdcg_decode(f: Tensor, skip: Tensor, weights: ModelWeights) -> Tensor:
    f = conv2d(bilinear_upsample(f, 2), weights.conv("pdcg.up.0"))
    f = store(f.data.astype(np.float64) + skip.data)
    for i in range(1, UP_STAGES):
        f = conv2d(bilinear_upsample(f, 2), weights.conv(f"pdcg.up.{i}"))
    return conv2d(f, weights.conv("pdcg.tail"))


def pdcg_forward(x_hr: ImageFrame, m_h: Mask, weights: ModelWeights,
                 cfg: PdcgConfig = PdcgConfig()) -> ImageFrame:
    """Raw generator output, before blending with ``x_hr``."""
    x_hr.require(Transfer.PQ, Gamut.BT2020)
    factor = 1 << DOWN_STAGES
    if x_hr.height % factor or x_hr.width % factor:
        raise ShapeError(f"frame {x_hr.height}x{x_hr.width} is not divisible by {factor}")
    weights.check_shapes(cfg.weight_shapes())
    _, d2, d3 = pdcg_encode(x_hr, m_h, weights)
    out = pdcg_decode(pdcg_blocks(d3, weights, cfg), d2, weights)
    return ImageFrame(store(np.clip(out.data, 0.0, 1.0)), Gamut.BT2020, Transfer.PQ)


def blend(raw: ImageFrame, x_hr: ImageFrame, m_h: Mask) -> ImageFrame:
    """``raw * m + x_hr * (1 - m)`` with the mask broadcast over channels."""
    for f in (raw, x_hr):
        f.require(Transfer.PQ, Gamut.BT2020)
    if raw.pixels.shape != x_hr.pixels.shape:
        raise ShapeError(f"raw {raw.pixels.shape} and x_hr {x_hr.pixels.shape} differ")
    if (m_h.values.height, m_h.values.width) != (x_hr.height, x_hr.width):
        raise ShapeError(f"mask {m_h.values.shape} does not match frame {x_hr.pixels.shape}")
    m = m_h.values.data.astype(np.float64)
    out = raw.data.astype(np.float64) * m + x_hr.data.astype(np.float64) * (1.0 - m)
    return ImageFrame(store(out), x_hr.gamut, x_hr.transfer)
