"""SDR to HDR10 frame conversion: dynamic feature-mapping networks, the
surrounding color-science chain, and objective quality metrics."""

from .color import Gamut, ImageFrame, Mask, Transfer
from .errors import (
    ConfigError,
    CorruptWeights,
    HdrtvError,
    IoError,
    MissingWeightError,
    NonFiniteError,
    ShapeError,
    StateError,
    UnsupportedFormat,
)
from .hdcfm import HdcfmConfig, count_params, hdcfm_forward
from .pdcg import PdcgConfig, blend, pdcg_forward
from .pipeline import PipelineConfig, convert
from .tensor import ConvParams, Tensor
from .weights import ModelWeights, load_weights, save_weights, seeded_weights

__version__ = "0.1.0"
