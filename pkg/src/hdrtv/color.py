"""SDR/HDR signal chain: transfer functions, gamut conversion, quantization
and the over-exposure mask."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError, StateError
from .tensor import Tensor, store


class Gamut(enum.Enum):
    BT709 = "bt709"
    BT2020 = "bt2020"


class Transfer(enum.Enum):
    SDR_GAMMA = "sdr-gamma"
    PQ = "pq"
    LINEAR = "linear"


SDR_GAMMA = 2.4

# SMPTE ST 2084
PQ_M1 = 2610 / 16384
PQ_M2 = 2523 / 4096 * 128
PQ_C1 = 3424 / 4096
PQ_C2 = 2413 / 4096 * 32
PQ_C3 = 2392 / 4096 * 32
PQ_PEAK_NITS = 10000.0

PRIMARIES = {
    Gamut.BT709: ((0.640, 0.330), (0.300, 0.600), (0.150, 0.060)),
    Gamut.BT2020: ((0.708, 0.292), (0.170, 0.797), (0.131, 0.046)),
}
WHITE_D65 = (0.3127, 0.3290)


@dataclass(frozen=True)
class ImageFrame:
    """A 3-channel image tagged with its colorimetry.

    Pixel values are clamped to [0, 1] on construction.
    """

    pixels: Tensor
    gamut: Gamut
    transfer: Transfer

    def __post_init__(self):
        if self.pixels.channels != 3:
            raise ShapeError(f"ImageFrame needs 3 channels, got {self.pixels.channels}")
        data = self.pixels.data
        if data.min() < 0.0 or data.max() > 1.0:
            object.__setattr__(self, "pixels", Tensor(np.clip(data, 0.0, 1.0)))

    @classmethod
    def from_array(cls, rgb, gamut: Gamut, transfer: Transfer) -> "ImageFrame":
        return cls(Tensor(rgb), gamut, transfer)

    @property
    def height(self) -> int:
        return self.pixels.height

    @property
    def width(self) -> int:
        return self.pixels.width

    @property
    def data(self) -> np.ndarray:
        return self.pixels.data

    def require(self, transfer: Transfer, gamut: Gamut | None = None) -> None:
        if self.transfer is not transfer:
            raise StateError(f"expected {transfer.value} frame, got {self.transfer.value}")
        if gamut is not None and self.gamut is not gamut:
            raise StateError(f"expected {gamut.value} gamut, got {self.gamut.value}")


@dataclass(frozen=True)
class Mask:
    """Single-channel soft mask with values in [0, 1]."""

    values: Tensor

    def __post_init__(self):
        if self.values.channels != 1:
            raise ShapeError(f"mask needs 1 channel, got {self.values.channels}")
        data = self.values.data
        if data.min() < 0.0 or data.max() > 1.0:
            object.__setattr__(self, "values", Tensor(np.clip(data, 0.0, 1.0)))


# -- transfer functions on raw arrays ---------------------------------------


def gamma_decode(v):
    return np.power(np.asarray(v, dtype=np.float64), SDR_GAMMA)


def gamma_encode(v):
    return np.power(np.asarray(v, dtype=np.float64), 1.0 / SDR_GAMMA)


def pq_decode(e):
    """PQ code value in [0, 1] to absolute luminance in nits."""
    ep = np.power(np.clip(np.asarray(e, dtype=np.float64), 0.0, 1.0), 1.0 / PQ_M2)
    y = np.power(np.maximum(ep - PQ_C1, 0.0) / (PQ_C2 - PQ_C3 * ep), 1.0 / PQ_M1)
    return y * PQ_PEAK_NITS


def pq_encode(nits):
    """Absolute luminance in nits to PQ code value; input clamped to [0, 10000]."""
    y = np.clip(np.asarray(nits, dtype=np.float64), 0.0, PQ_PEAK_NITS) / PQ_PEAK_NITS
    yp = np.power(y, PQ_M1)
    return np.power((PQ_C1 + PQ_C2 * yp) / (1.0 + PQ_C3 * yp), PQ_M2)


# -- frame-level operations ------------------------------------------------


def sdr_eotf(frame: ImageFrame) -> ImageFrame:
    frame.require(Transfer.SDR_GAMMA)
    return ImageFrame(store(gamma_decode(frame.data)), frame.gamut, Transfer.LINEAR)


def sdr_oetf(frame: ImageFrame) -> ImageFrame:
    frame.require(Transfer.LINEAR)
    return ImageFrame(store(gamma_encode(frame.data)), frame.gamut, Transfer.SDR_GAMMA)


def pq_eotf(frame: ImageFrame) -> Tensor:
    """Decode a PQ frame to a luminance tensor in nits (not clamped to [0, 1])."""
    frame.require(Transfer.PQ)
    return store(pq_decode(frame.data))


def pq_oetf(nits: Tensor, gamut: Gamut = Gamut.BT2020) -> ImageFrame:
    return ImageFrame(store(pq_encode(np.asarray(nits))), gamut, Transfer.PQ)


def rgb_to_xyz_matrix(gamut: Gamut) -> np.ndarray:
    """Normalized primary matrix from chromaticities and the D65 white point."""
    prim = np.array(
        [[x / y, 1.0, (1.0 - x - y) / y] for x, y in PRIMARIES[gamut]], dtype=np.float64
    ).T
    wx, wy = WHITE_D65
    white = np.array([wx / wy, 1.0, (1.0 - wx - wy) / wy])
    scale = np.linalg.solve(prim, white)
    return prim * scale


def _gamut_matrices() -> dict[tuple[Gamut, Gamut], np.ndarray]:
    npm = {g: rgb_to_xyz_matrix(g) for g in Gamut}
    mats = {}
    for src in Gamut:
        for dst in Gamut:
            m = np.linalg.solve(npm[dst], npm[src])
            if not np.allclose(m.sum(axis=1), 1.0, atol=1e-9):
                raise AssertionError(f"gamut matrix {src}->{dst} does not preserve white")
            mats[src, dst] = m
    return mats


GAMUT_MATRICES = _gamut_matrices()


def gamut_matrix(src: Gamut, dst: Gamut) -> np.ndarray:
    return GAMUT_MATRICES[src, dst].copy()


def gamut_convert(frame: ImageFrame, target: Gamut) -> ImageFrame:
    """Convert linear RGB between primaries; negative results are clamped to 0."""
    frame.require(Transfer.LINEAR)
    if frame.gamut is target:
        return frame
    m = GAMUT_MATRICES[frame.gamut, target]
    out = np.einsum("ij,jhw->ihw", m, frame.data.astype(np.float64))
    return ImageFrame(store(np.maximum(out, 0.0)), target, Transfer.LINEAR)


def quantize(frame: ImageFrame, bits: int) -> np.ndarray:
    """Integer code values ``round(v * (2**bits - 1))``, halves rounded away from zero."""
    if bits not in (8, 16):
        raise ConfigError(f"bits must be 8 or 16, got {bits}")
    scale = (1 << bits) - 1
    codes = np.floor(frame.data.astype(np.float64) * scale + 0.5)
    return codes.astype(np.uint8 if bits == 8 else np.uint16)


def dequantize(codes: np.ndarray, bits: int, gamut: Gamut, transfer: Transfer) -> ImageFrame:
    if bits not in (8, 16):
        raise ConfigError(f"bits must be 8 or 16, got {bits}")
    values = np.asarray(codes, dtype=np.float64) / ((1 << bits) - 1)
    return ImageFrame(store(values), gamut, transfer)


def validate_mask_params(tau: float, ramp: float) -> None:
    if not 0.0 < tau < 1.0:
        raise ConfigError(f"mask tau must lie in (0, 1), got {tau}")
    if not ramp > 0.0:
        raise ConfigError(f"mask ramp must be positive, got {ramp}")
    if tau + ramp > 1.0 + 1e-9:
        raise ConfigError(f"mask tau + ramp must not exceed 1, got {tau + ramp}")


def overexposure_mask(sdr: ImageFrame, tau: float = 0.95, ramp: float = 0.05) -> Mask:
    """Soft highlight mask: a linear ramp on the max channel from ``tau`` to ``tau + ramp``."""
    sdr.require(Transfer.SDR_GAMMA)
    validate_mask_params(tau, ramp)
    peak = sdr.data.astype(np.float64).max(axis=0, keepdims=True)
    return Mask(store(np.clip((peak - tau) / ramp, 0.0, 1.0)))
