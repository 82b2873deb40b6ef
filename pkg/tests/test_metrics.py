import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from haarsr.errors import DimensionError
from haarsr.metrics import C1, CSV_HEADER, evaluate, psnr, psnr_from_rmse, rmse, ssim


def test_rmse_examples():
    a = np.arange(16.0).reshape(4, 4)
    assert rmse(a, a) == 0
    assert rmse(a, a + 3) == pytest.approx(3)
    assert rmse([[0, 0], [0, 0]], [[1, 2], [2, 1]]) == pytest.approx(math.sqrt(10 / 4))


def test_psnr_examples():
    assert psnr_from_rmse(255) == 0
    assert psnr_from_rmse(25.5) == pytest.approx(20)
    a = np.zeros((4, 4))
    assert psnr(a, a) == math.inf


def test_table_reference_point():
    assert abs(psnr_from_rmse(5.94) - 32.65) <= 0.02


def test_border_exclusion():
    a = np.zeros((8, 8))
    b = np.zeros((8, 8))
    b[0, :] = 100
    assert rmse(a, b, border_exclude=1) == 0
    assert rmse(a, b) > 0
    with pytest.raises(DimensionError):
        rmse(a, b, border_exclude=4)


def test_shape_mismatch():
    with pytest.raises(DimensionError):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))


def test_ssim_identical(rng):
    a = rng.uniform(0, 255, (32, 32))
    assert ssim(a, a) == 1.0


def test_ssim_negative_texture(rng):
    a = rng.uniform(0, 255, (64, 64))
    assert ssim(a, 255 - a) < 0.5


def test_ssim_constant_closed_form():
    a = np.full((20, 20), 100.0)
    b = a + 10
    want = (2 * 100 * 110 + C1) / (100**2 + 110**2 + C1)
    assert ssim(a, b) == pytest.approx(want, rel=1e-12)


def test_ssim_too_small():
    with pytest.raises(DimensionError):
        ssim(np.zeros((10, 10)), np.ones((10, 10)))


def test_evaluate_and_csv(rng):
    a = rng.uniform(0, 255, (24, 24))
    q = evaluate(a + 1, a)
    assert q.border_exclude == 2 and q.rmse == pytest.approx(1)
    row = q.csv_row("img", "proposed", 1.5)
    assert len(row) == len(CSV_HEADER) == 6 and row[-1] == "1.500"


pairs = st.integers(0, 2**31).map(lambda s: np.random.default_rng(s).uniform(0, 255, (2, 16, 16)))


@settings(max_examples=50, deadline=None)
@given(pairs, st.integers(0, 2))
def test_symmetry_and_consistency(ab, border):
    a, b = ab
    assert rmse(a, b, border) == rmse(b, a, border)
    assert ssim(a, b, border) == pytest.approx(ssim(b, a, border), abs=1e-14)
    err = rmse(a, b, border)
    assert psnr(a, b, border) == pytest.approx(20 * math.log10(255 / err))
    assert ssim(a, b, border) <= 1
