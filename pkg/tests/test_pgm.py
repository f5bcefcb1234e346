import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from selfsup.pgm import PgmError, decode_pgm, encode_pgm, read_image, write_image


def test_read_8bit_p5_with_comment():
    data = b"P5\n# made by hand\n3 2\n255\n" + bytes([0, 51, 255, 102, 204, 153])
    img = decode_pgm(data)
    assert img.shape == (2, 3)
    assert np.allclose(img, np.array([[0, 51, 255], [102, 204, 153]]) / 255)


def test_read_plain_p2():
    img = decode_pgm(b"P2\n2 2\n10\n0 5\n10 2\n")
    assert np.allclose(img, [[0, 0.5], [1, 0.2]])


def test_write_is_16bit_and_exact(tmp_path):
    img = np.array([[0.0, 1.0], [0.5, 0.25]])
    data, clipped = encode_pgm(img)
    assert data.startswith(b"P5\n2 2\n65535\n") and clipped == 0
    q = np.frombuffer(data[-8:], ">u2").reshape(2, 2)
    assert q[0, 1] == 65535 and q[1, 0] == 32768
    path = tmp_path / "a.pgm"
    write_image(path, img)
    again = tmp_path / "b.pgm"
    write_image(again, read_image(path))
    assert path.read_bytes() == again.read_bytes()


def test_clipping_is_counted(tmp_path):
    assert write_image(tmp_path / "c.pgm", np.array([[-0.5, 0.5, 1.5]])) == 2
    assert np.allclose(read_image(tmp_path / "c.pgm"), [[0, 0.5, 1]], atol=1e-5)


def test_npy_is_lossless(tmp_path):
    img = np.random.default_rng(0).normal(size=(4, 5))
    assert write_image(tmp_path / "x.npy", img) == 0
    assert np.array_equal(read_image(tmp_path / "x.npy"), img)


@pytest.mark.parametrize("data", [b"P6\n1 1\n255\n\x00\x00\x00", b"P5\n2 2\n255\n\x00", b"P5\n0 2\n255\n",
                                  b"P5\n2", b"P2\n1 1\n5\n9\n", b"P5\nx 1\n255\n\x00"])
def test_malformed(data):
    with pytest.raises(PgmError):
        decode_pgm(data)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 9)), elements=st.floats(0, 1)))
def test_round_trip_quantization(img):
    data, _ = encode_pgm(img)
    back = decode_pgm(data)
    assert np.abs(back - img).max() <= 0.5 / 65535 + 1e-12
    assert encode_pgm(back)[0] == data
