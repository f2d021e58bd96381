"""End-to-end SDR to HDR conversion."""

from __future__ import annotations

from dataclasses import dataclass, field

from .color import ImageFrame, overexposure_mask, validate_mask_params
from .errors import ConfigError
from .hdcfm import HdcfmConfig, hdcfm_forward
from .io import pad_to_multiple, unpad
from .pdcg import PdcgConfig, blend, pdcg_forward
from .weights import ModelWeights

STAGES = ("hdcfm", "full")
PAD_MULTIPLE = 32


@dataclass(frozen=True)
class PipelineConfig:
    stage: str = "full"
    hdcfm: HdcfmConfig = field(default_factory=HdcfmConfig)
    pdcg: PdcgConfig = field(default_factory=PdcgConfig)
    mask_tau: float = 0.95
    mask_ramp: float = 0.05

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ConfigError(f"stage must be one of {STAGES}, got {self.stage!r}")
        validate_mask_params(self.mask_tau, self.mask_ramp)

    def weight_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes = self.hdcfm.weight_shapes()
        if self.stage == "full":
            shapes.update(self.pdcg.weight_shapes())
        return shapes


def convert(sdr: ImageFrame, weights: ModelWeights, cfg: PipelineConfig = PipelineConfig()) -> ImageFrame:
    """Convert an SDR frame of any size; returns a PQ/BT.2020 frame of the same size."""
    padded, record = pad_to_multiple(sdr, PAD_MULTIPLE)
    x_hr = hdcfm_forward(padded, weights, cfg.hdcfm)
    if cfg.stage == "full":
        m_h = overexposure_mask(padded, cfg.mask_tau, cfg.mask_ramp)
        raw = pdcg_forward(x_hr, m_h, weights, cfg.pdcg)
        x_hr = blend(raw, x_hr, m_h)
    return unpad(x_hr, record)
