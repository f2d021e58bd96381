import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import hdr_frame, sdr_frame
from hdrtv.color import Gamut, ImageFrame, Mask, Transfer
from hdrtv.errors import ConfigError, MissingWeightError, ShapeError, StateError
from hdrtv.hdcfm import HdcfmConfig, count_params, hdcfm_forward
from hdrtv.pdcg import PdcgConfig, blend, pdcg_blocks, pdcg_encode, pdcg_forward
from hdrtv.tensor import Tensor
from hdrtv.weights import ModelWeights, seeded_weights

SMALL_PDCG = PdcgConfig(channels=8, blocks=3)


@pytest.fixture(scope="module")
def hdcfm_weights():
    return seeded_weights(0, HdcfmConfig())


@pytest.fixture(scope="module")
def pdcg_weights():
    return seeded_weights(0, PdcgConfig())


class TestHdcfmConfig:
    @pytest.mark.parametrize("kwargs", [{"channels": 3}, {"dyct_blocks": 0}, {"kernel": 2}])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            HdcfmConfig(**kwargs)

    def test_head_count(self):
        table, _ = count_params(HdcfmConfig())
        assert table["hdcfm.head.weight"] + table["hdcfm.head.bias"] == 3 * 32 * 9 + 32 == 896

    def test_total_near_published_budget(self):
        _, total = count_params(HdcfmConfig())
        assert 80_000 <= total <= 121_000

    def test_census_matches_hand_count(self):
        c = 32
        conv3 = lambda i, o: i * o * 9 + o  # noqa: E731
        conv1 = lambda i, o: i * o + o  # noqa: E731
        hme = conv3(3, c) + 4 * conv3(c, c) + 2 * conv1(c, 2 * c)
        dyct = conv3(c, c) + conv3(c, 9) + conv1(c, 9 * c) + conv1(c, 1) + conv1(c, c // 4) + conv1(c // 4, c)
        expected = conv3(3, c) + conv3(c, 3) + hme + 2 * dyct
        assert count_params(HdcfmConfig())[1] == expected == 87_751

    def test_doubling_width_triples_dyct_share(self):
        def dyct_share(c):
            table, _ = count_params(HdcfmConfig(channels=c))
            return sum(v for k, v in table.items() if k.startswith("dyct."))

        assert dyct_share(64) >= 3 * dyct_share(32)


class TestHdcfmForward:
    def test_shape_range_and_tags(self, rng, hdcfm_weights):
        out = hdcfm_forward(sdr_frame(rng), hdcfm_weights)
        assert out.pixels.shape == (3, 64, 64)
        assert out.transfer is Transfer.PQ and out.gamut is Gamut.BT2020
        assert np.isfinite(out.data).all()
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0

    def test_deterministic(self, rng, hdcfm_weights):
        x = sdr_frame(rng)
        assert hdcfm_forward(x, hdcfm_weights).pixels == hdcfm_forward(x, hdcfm_weights).pixels

    def test_zero_tail_gives_zero_output(self, rng, hdcfm_weights):
        w = hdcfm_weights.with_tensors({"hdcfm.tail.weight": np.zeros((3, 32, 3, 3)),
                                        "hdcfm.tail.bias": np.zeros(3)})
        assert not hdcfm_forward(sdr_frame(rng), w).data.any()

    def test_finite_over_20_seeds(self, rng):
        x = sdr_frame(rng)
        for seed in range(20):
            out = hdcfm_forward(x, seeded_weights(seed, HdcfmConfig()))
            assert np.isfinite(out.data).all()

    def test_finite_with_moderate_weights(self, rng, hdcfm_weights):
        # scaled weights keep activations well inside float32 range
        w = ModelWeights({k: v * 0.3 for k, v in hdcfm_weights.items()})
        out = hdcfm_forward(sdr_frame(rng), w)
        interior = (out.data > 0) & (out.data < 1)
        assert interior.mean() > 0.5

    def test_missing_weight_named(self, rng, hdcfm_weights):
        w = ModelWeights({k: v for k, v in hdcfm_weights.items() if k != "dyct.1.ckp.bias"})
        with pytest.raises(MissingWeightError, match="dyct.1.ckp.bias"):
            hdcfm_forward(sdr_frame(rng), w)

    def test_empty_store(self, rng):
        with pytest.raises(MissingWeightError):
            hdcfm_forward(sdr_frame(rng), ModelWeights())

    def test_wrong_weight_shape(self, rng, hdcfm_weights):
        w = hdcfm_weights.with_tensors({"hdcfm.head.bias": np.zeros(31)})
        with pytest.raises(ShapeError):
            hdcfm_forward(sdr_frame(rng), w)

    def test_requires_sdr_input(self, rng, hdcfm_weights):
        with pytest.raises(StateError):
            hdcfm_forward(hdr_frame(rng), hdcfm_weights)

    def test_requires_divisible_dims(self, rng, hdcfm_weights):
        with pytest.raises(ShapeError):
            hdcfm_forward(sdr_frame(rng, 40, 64), hdcfm_weights)


def flat_mask(h, w, value):
    return Mask(Tensor.full(1, h, w, value))


class TestPdcgForward:
    def test_shape_and_range(self, rng, pdcg_weights):
        out = pdcg_forward(hdr_frame(rng), flat_mask(64, 64, 0.3), pdcg_weights)
        assert out.pixels.shape == (3, 64, 64)
        assert np.isfinite(out.data).all() and out.data.min() >= 0 and out.data.max() <= 1

    def test_rectangular_input(self, rng):
        w = seeded_weights(1, SMALL_PDCG)
        out = pdcg_forward(hdr_frame(rng, 24, 40), flat_mask(24, 40, 0.0), w, SMALL_PDCG)
        assert out.pixels.shape == (3, 24, 40)

    def test_zero_tail(self, rng, pdcg_weights):
        w = pdcg_weights.with_tensors({"pdcg.tail.weight": np.zeros((3, 32, 3, 3)),
                                       "pdcg.tail.bias": np.zeros(3)})
        assert not pdcg_forward(hdr_frame(rng), flat_mask(64, 64, 1.0), w).data.any()

    def test_zero_block_convs_pass_through(self, rng, pdcg_weights):
        zeros = {}
        for i in range(16):
            zeros[f"pdcg.block.{i}.conv.weight"] = np.zeros((32, 32, 3, 3))
            zeros[f"pdcg.block.{i}.conv.bias"] = np.zeros(32)
        w = pdcg_weights.with_tensors(zeros)
        _, _, d3 = pdcg_encode(hdr_frame(rng), flat_mask(64, 64, 0.5), w)
        assert pdcg_blocks(d3, w, PdcgConfig()) == d3

    def test_deterministic(self, rng, pdcg_weights):
        x, m = hdr_frame(rng), flat_mask(64, 64, 0.7)
        assert pdcg_forward(x, m, pdcg_weights).pixels == pdcg_forward(x, m, pdcg_weights).pixels

    def test_finite_over_20_seeds(self, rng):
        x, m = hdr_frame(rng, 32, 32), flat_mask(32, 32, 0.5)
        for seed in range(20):
            out = pdcg_forward(x, m, seeded_weights(seed, PdcgConfig()))
            assert np.isfinite(out.data).all()

    def test_indivisible(self, rng):
        w = seeded_weights(1, SMALL_PDCG)
        with pytest.raises(ShapeError):
            pdcg_forward(hdr_frame(rng, 20, 16), flat_mask(20, 16, 0), w, SMALL_PDCG)

    def test_mask_shape_mismatch(self, rng):
        w = seeded_weights(1, SMALL_PDCG)
        with pytest.raises(ShapeError):
            pdcg_forward(hdr_frame(rng, 16, 16), flat_mask(8, 16, 0), w, SMALL_PDCG)

    def test_requires_pq_input(self, rng):
        with pytest.raises(StateError):
            pdcg_forward(sdr_frame(rng, 16, 16), flat_mask(16, 16, 0), seeded_weights(1, SMALL_PDCG), SMALL_PDCG)

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            PdcgConfig(blocks=0)


def const_frame(v, h=4, w=5):
    return ImageFrame(Tensor.full(3, h, w, v), Gamut.BT2020, Transfer.PQ)


class TestBlend:
    def test_zero_mask(self, rng):
        raw, x = hdr_frame(rng, 6, 6), hdr_frame(rng, 6, 6)
        assert blend(raw, x, flat_mask(6, 6, 0.0)).pixels == x.pixels

    def test_unit_mask(self, rng):
        raw, x = hdr_frame(rng, 6, 6), hdr_frame(rng, 6, 6)
        assert blend(raw, x, flat_mask(6, 6, 1.0)).pixels == raw.pixels

    def test_half_mask(self):
        out = blend(const_frame(0.2), const_frame(0.8), flat_mask(4, 5, 0.5))
        np.testing.assert_allclose(out.data, 0.5, atol=1e-7)

    def test_idempotent_on_equal_inputs(self, rng):
        x = hdr_frame(rng, 7, 3)
        m = Mask(Tensor(rng.random((1, 7, 3))))
        assert blend(x, x, m).pixels == x.pixels

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_convexity(self, seed):
        r = np.random.default_rng(seed)
        raw, x = hdr_frame(r, 5, 5), hdr_frame(r, 5, 5)
        out = blend(raw, x, Mask(Tensor(r.random((1, 5, 5))))).data
        assert (out >= np.minimum(raw.data, x.data)).all()
        assert (out <= np.maximum(raw.data, x.data)).all()

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeError):
            blend(hdr_frame(rng, 4, 4), hdr_frame(rng, 4, 5), flat_mask(4, 4, 0))
        with pytest.raises(ShapeError):
            blend(hdr_frame(rng, 4, 4), hdr_frame(rng, 4, 4), flat_mask(4, 3, 0))

    def test_requires_pq_frames(self, rng):
        sdr = sdr_frame(rng, 4, 4)
        with pytest.raises(StateError):
            blend(sdr, hdr_frame(rng, 4, 4), flat_mask(4, 4, 0))
        with pytest.raises(StateError):
            blend(hdr_frame(rng, 4, 4), sdr, flat_mask(4, 4, 0))
