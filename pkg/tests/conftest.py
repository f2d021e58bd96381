import numpy as np
import pytest

from hdrtv.color import Gamut, ImageFrame, Transfer


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def sdr_frame(rng, h=64, w=64):
    return ImageFrame.from_array(rng.random((3, h, w)), Gamut.BT709, Transfer.SDR_GAMMA)


def hdr_frame(rng, h=64, w=64):
    return ImageFrame.from_array(rng.random((3, h, w)), Gamut.BT2020, Transfer.PQ)
