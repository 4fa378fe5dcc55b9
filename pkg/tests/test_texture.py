import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from facepad.errors import CorruptHeaderError, InvalidInputError, ShapeMismatchError, TruncatedPayloadError
from facepad.texture import (
    DescriptorSettings,
    coalbp_histogram,
    decode_cache,
    describe_image,
    encode_cache,
    lbp_histogram,
    lpq_histogram,
    rgb_to_planes,
    uniform_table,
    vector_length,
)
from facepad.texture.color import rgb_to_hsv, rgb_to_ycbcr
from facepad.texture.lbp import lbp_codes

import oracles

planes16 = arrays(np.uint8, (16, 16), elements=st.integers(0, 255))
low_planes = arrays(np.uint8, st.tuples(st.integers(5, 12), st.integers(5, 12)),
                    elements=st.integers(0, 3))


def test_u2_table_has_58_uniform_codes():
    table = uniform_table()
    assert table.max() == 58
    assert len(set(table.tolist())) == 59
    assert (table < 58).sum() == 58
    assert table[0] == 0 and table[255] == 57


def test_lbp_flat_plane_is_all_ones_code():
    codes = lbp_codes(np.full((5, 5), 9, np.uint8))
    assert np.all(codes == 255)
    hist = lbp_histogram(np.full((5, 5), 9, np.uint8))
    assert hist[uniform_table()[255]] == 1.0


def test_lbp_bit_order_starts_east_counter_clockwise():
    p = np.zeros((3, 3), np.uint8)
    p[1, 1] = 5
    p[1, 2] = 9  # east -> bit 0
    assert lbp_codes(p)[0, 0] == 1
    p[1, 2], p[0, 1] = 0, 9  # north -> bit 2
    assert lbp_codes(p)[0, 0] == 4


@settings(max_examples=30, deadline=None)
@given(planes16)
def test_lbp_matches_oracle(p):
    assert np.array_equal(lbp_histogram(p), oracles.lbp_hist(p))


@settings(max_examples=30, deadline=None)
@given(low_planes)
def test_coalbp_matches_oracle_with_ties(p):
    assert np.array_equal(coalbp_histogram(p), oracles.coalbp_hist(p))


@settings(max_examples=20, deadline=None)
@given(planes16)
def test_lpq_matches_oracle(p):
    assert np.array_equal(lpq_histogram(p), oracles.lpq_hist(p))


@pytest.mark.parametrize("f", [lbp_histogram, coalbp_histogram, lpq_histogram])
def test_histograms_are_normalised(f):
    p = np.random.default_rng(3).integers(0, 256, (20, 17)).astype(np.uint8)
    h = f(p)
    assert h.sum() == pytest.approx(1.0) and h.min() >= 0


def test_too_small_planes_fail():
    with pytest.raises(InvalidInputError):
        lbp_histogram(np.zeros((2, 5), np.uint8))
    with pytest.raises(InvalidInputError):
        coalbp_histogram(np.zeros((3, 9), np.uint8))
    with pytest.raises(InvalidInputError):
        lpq_histogram(np.zeros((2, 2), np.uint8))


def test_lpq_without_whitening_constant_plane():
    h = lpq_histogram(np.full((6, 6), 100, np.uint8), whiten=False)
    assert h.max() == 1.0


def test_hsv_examples():
    px = np.array([[[255, 0, 0], [0, 255, 0], [0, 0, 255], [128, 128, 128], [0, 0, 0]]], np.uint8)
    h, s, v = rgb_to_hsv(px)
    assert h[0].tolist() == [0, 85, 170, 0, 0]
    assert s[0].tolist() == [255, 255, 255, 0, 0]
    assert v[0].tolist() == [255, 255, 255, 128, 0]


def test_ycbcr_examples():
    px = np.array([[[255, 255, 255], [0, 0, 0], [128, 128, 128], [255, 0, 0]]], np.uint8)
    y, cb, cr = rgb_to_ycbcr(px)
    assert y[0].tolist() == [255, 0, 128, 76]
    assert cb[0].tolist() == [128, 128, 128, 85]
    assert cr[0].tolist() == [128, 128, 128, 255]


@settings(max_examples=30, deadline=None)
@given(arrays(np.uint8, (3, 4, 3)))
def test_planes_are_8bit_and_same_shape(px):
    planes = rgb_to_planes(px, include_gray=True)
    for name in ("H", "S", "V", "Y", "Cb", "Cr", "gray"):
        assert planes[name].dtype == np.uint8 and planes[name].shape == (3, 4)


def test_descriptor_layout_and_slices():
    rgb = np.random.default_rng(0).integers(0, 256, (32, 32, 3)).astype(np.uint8)
    vec = describe_image(rgb)
    assert len(vec) == vector_length() == 8034
    assert (vec.total("LBP"), vec.total("CoALBP"), vec.total("LPQ")) == (354, 6144, 1536)
    planes = rgb_to_planes(rgb)
    np.testing.assert_allclose(vec.slice("CoALBP", "Cr"), coalbp_histogram(planes["Cr"]), rtol=1e-6)
    with_gray = describe_image(rgb, DescriptorSettings(include_gray=True))
    assert len(with_gray) == 59 * 7 + 1024 * 7 + 256 * 7


# -- cache file -----------------------------------------------------------------

def _cache_bytes(n=3):
    rng = np.random.default_rng(1)
    recs = [(f"img_{i}.png", describe_image(rng.integers(0, 256, (20, 20, 3)).astype(np.uint8)))
            for i in range(n)]
    return recs, encode_cache(recs, {"note": "x"})


def test_cache_round_trip_is_bitwise():
    recs, raw = _cache_bytes()
    back, meta = decode_cache(raw)
    assert meta == {"note": "x"}
    for (a, va), (b, vb) in zip(recs, back):
        assert a == b and va.values.tobytes() == vb.values.tobytes() and va.layout == vb.layout
    assert encode_cache(back, meta) == raw


def test_cache_corruption_classes():
    _, raw = _cache_bytes()
    with pytest.raises(CorruptHeaderError):
        decode_cache(b"XXXX" + raw[4:])
    with pytest.raises(CorruptHeaderError):
        decode_cache(raw[:4] + b"\x09" + raw[5:])
    with pytest.raises(TruncatedPayloadError):
        decode_cache(raw[:-7])
    with pytest.raises(CorruptHeaderError):
        decode_cache(raw + b"\x00")


def test_cache_layout_mismatch():
    recs, _ = _cache_bytes(1)
    vec = recs[0][1]
    vec.layout[-1] = type(vec.layout[-1])("LPQ", "Cr", vec.layout[-1].offset, 255)
    with pytest.raises(ShapeMismatchError):
        decode_cache(encode_cache(recs))
