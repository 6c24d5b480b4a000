import numpy as np
import pytest

from spectralmc import io
from spectralmc.core import Mask, Shape


def test_matrix_round_trip_is_bitwise(tmp_path, rng):
    M = rng.standard_normal((5, 7)) * 10.0 ** rng.integers(-8, 8, (5, 7))
    io.write_matrix_csv(tmp_path / "m.csv", M)
    assert io.read_matrix_csv(tmp_path / "m.csv").tobytes() == M.tobytes()


def test_matrix_errors(tmp_path):
    (tmp_path / "empty.csv").write_text("")
    with pytest.raises(io.FormatError):
        io.read_matrix_csv(tmp_path / "empty.csv")
    (tmp_path / "ragged.csv").write_text("1,2\n3\n")
    with pytest.raises(io.FormatError, match=":2:"):
        io.read_matrix_csv(tmp_path / "ragged.csv")
    (tmp_path / "bad.csv").write_text("1,x\n")
    with pytest.raises(io.FormatError, match=":1:"):
        io.read_matrix_csv(tmp_path / "bad.csv")


def test_mask_round_trip_uses_one_based_indices(tmp_path, rng):
    mask = Mask(Shape(3, 4), [0, 2, 1], [3, 0, 1])
    vals = rng.standard_normal(3)
    io.write_mask_csv(tmp_path / "obs.csv", mask, vals)
    lines = (tmp_path / "obs.csv").read_text().splitlines()
    assert lines[0] == "i,j,value"
    assert lines[1].startswith("1,4,")
    mask2, vals2 = io.read_mask_csv(tmp_path / "obs.csv", Shape(3, 4))
    np.testing.assert_array_equal(mask2.rows, mask.rows)
    np.testing.assert_array_equal(mask2.cols, mask.cols)
    assert vals2.tobytes() == vals.tobytes()


def test_mask_errors_name_the_line(tmp_path):
    p = tmp_path / "obs.csv"
    p.write_text("i,j,value\n1,1,0.5\n4,1,2.0\n")
    with pytest.raises(io.FormatError, match=":3:"):
        io.read_mask_csv(p, Shape(3, 3))
    p.write_text("")
    with pytest.raises(io.FormatError):
        io.read_mask_csv(p, Shape(3, 3))
    p.write_text("i,j,value\n")
    with pytest.raises(io.FormatError):
        io.read_mask_csv(p, Shape(3, 3))
    p.write_text("i,j,value\n1,1,2\n1,1,3\n")
    with pytest.raises(io.FormatError, match="duplicate"):
        io.read_mask_csv(p, Shape(3, 3))
    p.write_text("i,j,value\n1,1\n")
    with pytest.raises(io.FormatError, match=":2:"):
        io.read_mask_csv(p, Shape(3, 3))


def gradient_image():
    return (np.arange(64).reshape(8, 8) * 4).astype(np.float64)


def test_pgm_binary_round_trip(tmp_path):
    img = gradient_image()
    io.write_image_pgm(tmp_path / "g.pgm", img)
    back = io.read_image_pgm(tmp_path / "g.pgm")
    assert back.tobytes() == img.tobytes()


def test_pgm_plain_and_binary_agree(tmp_path):
    img = gradient_image()
    io.write_image_pgm(tmp_path / "a.pgm", img, plain=True)
    io.write_image_pgm(tmp_path / "b.pgm", img)
    np.testing.assert_array_equal(io.read_image_pgm(tmp_path / "a.pgm"), io.read_image_pgm(tmp_path / "b.pgm"))


def test_pgm_comments_and_whitespace(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_text("P2\n# a comment\n3 2\n# another\n255\n0 1 2\n3 4 255\n")
    np.testing.assert_array_equal(io.read_image_pgm(p), [[0, 1, 2], [3, 4, 255]])


def test_pgm_write_clamps_and_rounds(tmp_path):
    io.write_image_pgm(tmp_path / "c.pgm", np.array([[255.7, -3.0], [12.4, 12.6]]))
    np.testing.assert_array_equal(io.read_image_pgm(tmp_path / "c.pgm"), [[255, 0], [12, 13]])


def test_pgm_rejects_unsupported(tmp_path):
    p = tmp_path / "x.pgm"
    p.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(io.FormatError):
        io.read_image_pgm(p)
    p.write_bytes(b"P5\n1 1\n65535\n\x00\x00")
    with pytest.raises(io.FormatError, match="maxval"):
        io.read_image_pgm(p)


def test_json_is_stable(tmp_path):
    io.write_json(tmp_path / "a.json", {"b": 1, "a": [1.5, "é"]})
    text = (tmp_path / "a.json").read_text(encoding="utf-8")
    assert text.index('"a"') < text.index('"b"')
    assert io.read_json(tmp_path / "a.json") == {"a": [1.5, "é"], "b": 1}
