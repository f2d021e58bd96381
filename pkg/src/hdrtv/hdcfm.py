"""Stage-1 feature-mapping network: SDR frame to PQ/BT.2020 frame."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .color import Gamut, ImageFrame, Transfer
from .dyct import dyct_forward, dyct_weight_shapes
from .errors import ConfigError
from .modulation import hm_apply, hme_estimate, hme_weight_shapes
from .tensor import conv2d, store
from .weights import ModelWeights

PUBLISHED_PARAMS = 100_630


@dataclass(frozen=True)
class HdcfmConfig:
    channels: int = 32
    dyct_blocks: int = 2
    kernel: int = 3
    normalize_kernels: bool = False

    def __post_init__(self):
        if self.channels < 4:
            raise ConfigError(f"channels must be >= 4, got {self.channels}")
        if self.dyct_blocks < 1:
            raise ConfigError(f"dyct_blocks must be >= 1, got {self.dyct_blocks}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError(f"kernel must be a positive odd number, got {self.kernel}")

    def weight_shapes(self) -> dict[str, tuple[int, ...]]:
        c = self.channels
        shapes = {
            "hdcfm.head.weight": (c, 3, 3, 3),
            "hdcfm.head.bias": (c,),
        }
        shapes.update(hme_weight_shapes(c))
        for i in range(self.dyct_blocks):
            shapes.update(dyct_weight_shapes(f"dyct.{i}", c, self.kernel))
        shapes["hdcfm.tail.weight"] = (3, c, 3, 3)
        shapes["hdcfm.tail.bias"] = (3,)
        return shapes


def count_params(cfg) -> tuple[dict[str, int], int]:
    """Per-tensor parameter counts and their total for any config with ``weight_shapes``."""
    table = {name: int(np.prod(shape)) for name, shape in cfg.weight_shapes().items()}
    return table, sum(table.values())


def hdcfm_forward(x_s: ImageFrame, weights: ModelWeights, cfg: HdcfmConfig = HdcfmConfig()) -> ImageFrame:
    x_s.require(Transfer.SDR_GAMMA, Gamut.BT709)
    weights.check_shapes(cfg.weight_shapes())
    c = cfg.channels
    m = hme_estimate(x_s, weights, (c, x_s.height, x_s.width))

    f = conv2d(x_s.pixels, weights.conv("hdcfm.head"))
    f = hm_apply(f, m)
    for i in range(cfg.dyct_blocks):
        f = dyct_forward(f, weights, f"dyct.{i}", cfg.kernel, cfg.normalize_kernels)
    f = hm_apply(f, m)
    out = conv2d(f, weights.conv("hdcfm.tail"))
    return ImageFrame(store(np.clip(out.data, 0.0, 1.0)), Gamut.BT2020, Transfer.PQ)
