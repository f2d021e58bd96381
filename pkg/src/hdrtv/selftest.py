"""Quick oracle-equivalence and invariant checks runnable without pytest."""

from __future__ import annotations

import math
from collections.abc import Callable, Iterator

import numpy as np

from . import color, metrics
from .color import Gamut, ImageFrame, Mask, Transfer
from .dyct import ChannelKernels, SpatialKernels, ddf_apply, ddf_oracle
from .hdcfm import HdcfmConfig, count_params
from .modulation import ModulationSet, hm_apply
from .pdcg import blend
from .tensor import ConvParams, Tensor, conv2d, conv2d_reference


def _conv_oracle(rng) -> float:
    worst = 0.0
    for stride in (1, 2):
        x = Tensor(rng.standard_normal((4, 8, 8)))
        p = ConvParams(rng.standard_normal((8, 4, 3, 3)), rng.standard_normal(8), stride=stride)
        worst = max(worst, float(np.abs(conv2d(x, p).data - conv2d_reference(x, p)).max()))
    return worst


def _ddf_oracle(rng) -> float:
    worst = 0.0
    for _ in range(5):
        c, h, w = rng.integers(1, 9), rng.integers(1, 13), rng.integers(1, 13)
        f = Tensor(rng.standard_normal((c, h, w)))
        ks = SpatialKernels(Tensor(rng.standard_normal((9, h, w))), 3)
        kc = ChannelKernels(Tensor(rng.standard_normal((c, 3, 3))))
        worst = max(worst, float(np.abs(ddf_apply(f, ks, kc).data - ddf_oracle(f, ks, kc)).max()))
    return worst


def _identities(rng) -> bool:
    f = Tensor(rng.standard_normal((8, 6, 7)))
    delta = np.zeros((9, 6, 7))
    delta[4] = 1.0
    ok = ddf_apply(f, SpatialKernels(Tensor(delta), 3), ChannelKernels(Tensor.full(8, 3, 3, 1.0))) == f
    ok &= hm_apply(f, ModulationSet.identity(8, 6, 7)) == f
    a = ImageFrame.from_array(rng.random((3, 6, 7)), Gamut.BT2020, Transfer.PQ)
    b = ImageFrame.from_array(rng.random((3, 6, 7)), Gamut.BT2020, Transfer.PQ)
    ok &= blend(a, b, Mask(Tensor.zeros(1, 6, 7))).pixels == b.pixels
    ok &= blend(a, b, Mask(Tensor.full(1, 6, 7, 1.0))).pixels == a.pixels
    return bool(ok)


def _pq_roundtrip(_rng) -> float:
    v = np.linspace(0.0, 1.0, 10_001)
    return float(np.abs(color.pq_encode(color.pq_decode(v)) - v).max())


def _gamut(_rng) -> float:
    fwd = color.gamut_matrix(Gamut.BT709, Gamut.BT2020)
    inv = color.gamut_matrix(Gamut.BT2020, Gamut.BT709)
    return float(max(np.abs(fwd @ inv - np.eye(3)).max(), np.abs(fwd.sum(1) - 1).max()))


def _psnr_one_code(_rng) -> float:
    codes = np.full((3, 16, 16), 100, dtype=np.uint8)
    a = color.dequantize(codes, 8, Gamut.BT709, Transfer.SDR_GAMMA)
    b = color.dequantize(codes + 1, 8, Gamut.BT709, Transfer.SDR_GAMMA)
    return abs(metrics.psnr(a, b) - 20 * math.log10(255))


def _census(_rng) -> bool:
    return 80_000 <= count_params(HdcfmConfig())[1] <= 121_000


CHECKS: list[tuple[str, Callable, Callable]] = [
    ("conv2d vs nested-loop reference", _conv_oracle, lambda e: e <= 1e-5),
    ("ddf_apply vs matrix-form oracle", _ddf_oracle, lambda e: e <= 1e-4),
    ("identity constructions exact", _identities, bool),
    ("PQ round trip", _pq_roundtrip, lambda e: e <= 1e-5),
    ("gamut matrix inverse and white rows", _gamut, lambda e: e <= 1e-6),
    ("PSNR one-code anchor", _psnr_one_code, lambda e: e <= 1e-3),
    ("HDCFM parameter budget", _census, bool),
]


def run(seed: int = 0) -> Iterator[tuple[str, bool, object]]:
    rng = np.random.default_rng(seed)
    for name, check, accept in CHECKS:
        try:
            value = check(rng)
            yield name, bool(accept(value)), value
        except Exception as exc:  # report and keep going
            yield name, False, exc
