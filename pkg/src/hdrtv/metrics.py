"""Objective image quality metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .color import Gamut, ImageFrame, Transfer, pq_decode, pq_encode
from .errors import ConfigError, ShapeError, StateError

HIST_BINS = 72

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# BT.2100 ICtCp
RGB2020_TO_LMS = np.array(
    [[1688, 2146, 262], [683, 2951, 462], [99, 309, 3688]], dtype=np.float64
) / 4096
LMS_TO_ICTCP = np.array(
    [[2048, 2048, 0], [6610, -13613, 7003], [17933, -17390, -543]], dtype=np.float64
) / 4096
DELTA_E_ITP_SCALE = 720.0


def _pair(a: ImageFrame, b: ImageFrame) -> tuple[np.ndarray, np.ndarray]:
    if a.pixels.shape != b.pixels.shape:
        raise ShapeError(f"frame shapes differ: {a.pixels.shape} vs {b.pixels.shape}")
    if a.transfer is not b.transfer:
        raise ShapeError(f"transfer tags differ: {a.transfer.value} vs {b.transfer.value}")
    return a.data.astype(np.float64), b.data.astype(np.float64)


def psnr(a: ImageFrame, b: ImageFrame) -> float:
    """PSNR in dB for unit peak; identical frames give ``math.inf``."""
    x, y = _pair(a, b)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(r**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = g.size
    rows = sliding_window_view(img, n, axis=0) @ g
    return sliding_window_view(rows, n, axis=1) @ g


def ssim(a: ImageFrame, b: ImageFrame) -> float:
    """Single-scale SSIM on the unweighted channel-mean luma, valid region only."""
    x, y = _pair(a, b)
    if min(x.shape[1:]) < SSIM_WINDOW:
        raise ConfigError(f"frame {x.shape[1:]} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    x, y = x.mean(axis=0), y.mean(axis=0)
    g = gaussian_window()
    c1, c2 = SSIM_K1**2, SSIM_K2**2

    mu_x, mu_y = _filter_valid(x, g), _filter_valid(y, g)
    var_x = _filter_valid(x * x, g) - mu_x * mu_x
    var_y = _filter_valid(y * y, g) - mu_y * mu_y
    cov = _filter_valid(x * y, g) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def ictcp(pq_rgb: np.ndarray) -> np.ndarray:
    """ICtCp of PQ-coded BT.2020 RGB, channel-first ``(3, ...)``."""
    nits = pq_decode(pq_rgb)
    lms = np.einsum("ij,j...->i...", RGB2020_TO_LMS, nits)
    return np.einsum("ij,j...->i...", LMS_TO_ICTCP, pq_encode(lms))


def delta_e_itp_map(a: ImageFrame, b: ImageFrame) -> np.ndarray:
    for f in (a, b):
        if f.transfer is not Transfer.PQ or f.gamut is not Gamut.BT2020:
            raise StateError(f"delta E ITP needs PQ/BT.2020 frames, got {f.transfer.value}/{f.gamut.value}")
    if a.pixels.shape != b.pixels.shape:
        raise ShapeError(f"frame shapes differ: {a.pixels.shape} vs {b.pixels.shape}")
    d = ictcp(a.data.astype(np.float64)) - ictcp(b.data.astype(np.float64))
    d[1] *= 0.5  # T = 0.5 * Ct
    return DELTA_E_ITP_SCALE * np.sqrt(np.sum(d * d, axis=0))


def delta_e_itp(a: ImageFrame, b: ImageFrame) -> float:
    return float(delta_e_itp_map(a, b).mean())


@dataclass(frozen=True)
class Histogram72:
    bins: np.ndarray  # int64 counts
    total: int

    @property
    def density(self) -> np.ndarray:
        return self.bins / self.total


def histogram72(frame: ImageFrame) -> Histogram72:
    """72 uniform bins over [0, 1] of per-pixel intensity (channel mean)."""
    intensity = frame.data.astype(np.float64).mean(axis=0).ravel()
    idx = np.minimum((intensity * HIST_BINS).astype(np.int64), HIST_BINS - 1)
    bins = np.bincount(idx, minlength=HIST_BINS)
    return Histogram72(bins, int(intensity.size))


def hist_distance(h1: Histogram72, h2: Histogram72) -> float:
    """L1 distance between normalized histograms, in [0, 2]."""
    return float(np.abs(h1.density - h2.density).sum())
