import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from haarsr.errors import DimensionError
from haarsr.haar import HaarPyramid1, analyze, synthesize, zero_detail


def test_analyze_2x2_example():
    p = analyze([[1, 2], [3, 4]])
    assert (p.A[0, 0], p.H[0, 0], p.V[0, 0], p.D[0, 0]) == (2.5, -0.5, -1.0, 0.0)


def test_constant_has_no_detail():
    p = analyze(np.full((4, 4), 5.0))
    assert np.all(p.A == 5)
    for band in p.details():
        assert np.all(band == 0)


def test_synthesize_2x2_example():
    pyr = HaarPyramid1(*(np.array([[v]]) for v in (2.5, -0.5, -1.0, 0.0)))
    np.testing.assert_array_equal(synthesize(pyr), [[1, 2], [3, 4]])


def test_zero_detail_is_cell_constant():
    img = synthesize(zero_detail(np.array([[7.0, 3.0]])))
    np.testing.assert_array_equal(img, [[7, 7, 3, 3], [7, 7, 3, 3]])


def test_round_trip_8x8(rng):
    img = rng.uniform(0, 255, (8, 8))
    np.testing.assert_allclose(synthesize(analyze(img)), img, rtol=0, atol=1e-12)


@pytest.mark.parametrize("shape, axis", [((3, 4), "height"), ((4, 5), "width")])
def test_odd_dimension_names_axis(shape, axis):
    with pytest.raises(DimensionError, match=axis):
        analyze(np.zeros(shape))


def test_mismatched_subbands():
    with pytest.raises(DimensionError):
        HaarPyramid1(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2)))


def test_rejects_nan():
    img = np.zeros((2, 2))
    img[0, 0] = np.nan
    with pytest.raises(Exception):
        analyze(img)


even = st.integers(1, 16).map(lambda k: 2 * k)
images = st.tuples(even, even).flatmap(
    lambda s: arrays(np.float64, s, elements=st.floats(-1e3, 1e3, allow_nan=False))
)


@settings(max_examples=200, deadline=None)
@given(images)
def test_perfect_reconstruction(img):
    assert np.abs(synthesize(analyze(img)) - img).max(initial=0) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(images, st.floats(-10, 10), st.floats(-10, 10), st.integers(0, 2**31))
def test_linearity(img, a, b, seed):
    other = np.random.default_rng(seed).uniform(-100, 100, img.shape)
    lhs = analyze(a * img + b * other)
    p, q = analyze(img), analyze(other)
    for name in "AHVD":
        want = a * getattr(p, name) + b * getattr(q, name)
        np.testing.assert_allclose(getattr(lhs, name), want, rtol=0, atol=1e-12 * (1 + np.abs(want).max()))


@settings(max_examples=50, deadline=None)
@given(even, even, st.floats(-1e4, 1e4))
def test_constant_annihilation(h, w, c):
    for band in analyze(np.full((h, w), c)).details():
        assert np.all(band == 0)
