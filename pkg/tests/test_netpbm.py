import numpy as np
import pytest

from haarsr.errors import DataError
from haarsr.netpbm import read_image, write_image, write_pfm


def test_pgm_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (7, 9)).astype(float)
    write_image(tmp_path / "a.pgm", img)
    np.testing.assert_array_equal(read_image(tmp_path / "a.pgm"), img)
    assert (tmp_path / "a.pgm").read_bytes().startswith(b"P5\n9 7\n255\n")


def test_ppm_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (5, 4, 3)).astype(float)
    write_image(tmp_path / "a.ppm", img)
    np.testing.assert_array_equal(read_image(tmp_path / "a.ppm"), img)


def test_clamping(tmp_path):
    write_image(tmp_path / "c.pgm", np.array([[-5.0, 300.0], [12.4, 12.6]]))
    np.testing.assert_array_equal(read_image(tmp_path / "c.pgm"), [[0, 255], [12, 13]])


def test_sixteen_bit(tmp_path, rng):
    img = rng.uniform(0, 255, (6, 6))
    write_image(tmp_path / "b.pgm", img, bit_depth=16)
    np.testing.assert_allclose(read_image(tmp_path / "b.pgm"), img, atol=255 / 65535)


def test_pfm_round_trip(tmp_path, rng):
    img = rng.integers(-4096, 4096, (6, 5)) / 1024 * 37
    write_pfm(tmp_path / "a.pfm", img)
    np.testing.assert_array_equal(read_image(tmp_path / "a.pfm"), img)
    rgb = rng.uniform(-10, 300, (3, 4, 3)).astype(np.float32).astype(float)
    write_pfm(tmp_path / "b.pfm", rgb)
    np.testing.assert_array_equal(read_image(tmp_path / "b.pfm"), rgb)


def test_big_endian_pfm(tmp_path):
    data = np.array([[1.5, 2.0], [3.0, -4.25]], dtype=">f4")
    (tmp_path / "be.pfm").write_bytes(b"Pf\n2 2\n1.0\n" + data[::-1].tobytes())
    np.testing.assert_array_equal(read_image(tmp_path / "be.pfm"), data)


def test_header_comments(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# comment\n2 1\n255\n\x01\x02")
    np.testing.assert_array_equal(read_image(tmp_path / "c.pgm"), [[1, 2]])


@pytest.mark.parametrize("payload", [b"P2\n1 1\n255\n1", b"P5\n4 4\n255\n\x00", b"P5\n1 1\n0\n\x00"])
def test_bad_files(tmp_path, payload):
    (tmp_path / "bad.pgm").write_bytes(payload)
    with pytest.raises(DataError):
        read_image(tmp_path / "bad.pgm")
