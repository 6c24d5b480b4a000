"""File formats: sparse observation CSV, dense matrix CSV, PGM images, JSON manifests.

Indices in files are 1-based; everything in memory is 0-based.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import Dataset, Mask, Shape


class FormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_matrix_csv(path, M: np.ndarray) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        for row in M:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric value in {line!r}") from None
            if len(rows[-1]) != len(rows[0]):
                raise FormatError(f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(rows[-1])}")
    if not rows:
        raise FormatError(f"{path}: empty matrix file")
    return np.array(rows, dtype=np.float64)


def write_mask_csv(path, mask: Mask, values=None) -> None:
    """Write ``i,j,value`` rows (1-based); ``values`` defaults to 1 for a bare mask."""
    if values is None:
        values = np.ones(mask.n)
    values = np.asarray(values, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        fh.write("i,j,value\n")
        for i, j, v in zip(mask.rows, mask.cols, values):
            fh.write(f"{i + 1},{j + 1},{_fmt(v)}\n")


def read_mask_csv(path, shape: Shape) -> tuple[Mask, np.ndarray]:
    """Parse an ``i,j,value`` file into a mask and its values."""
    rows, cols, vals = [], [], []
    seen = set()
    with open(path) as fh:
        header = fh.readline()
        if not header:
            raise FormatError(f"{path}: empty observation file")
        if [h.strip() for h in header.split(",")] != ["i", "j", "value"]:
            raise FormatError(f"{path}:1: expected header 'i,j,value', got {header.strip()!r}")
        for lineno, line in enumerate(fh, 2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
            try:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: malformed row {line!r}") from None
            if not (1 <= i <= shape.m and 1 <= j <= shape.p):
                raise FormatError(f"{path}:{lineno}: index ({i},{j}) outside {shape.m}x{shape.p}")
            if (i, j) in seen:
                raise FormatError(f"{path}:{lineno}: duplicate index ({i},{j})")
            seen.add((i, j))
            rows.append(i - 1)
            cols.append(j - 1)
            vals.append(v)
    if not rows:
        raise FormatError(f"{path}: no observations")
    return Mask(shape, np.array(rows), np.array(cols)), np.array(vals)


def read_observations(path, shape: Shape, truth=None) -> Dataset:
    mask, y = read_mask_csv(path, shape)
    return Dataset(mask, y, truth=truth)


def _pgm_tokens(buf: bytes, count: int, pos: int):
    tokens = []
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        tokens.append(buf[start:pos])
    return tokens, pos


def read_image_pgm(path) -> np.ndarray:
    """Read a plain (P2) or binary (P5) PGM with maxval 255 as a float matrix."""
    buf = Path(path).read_bytes()
    magic = buf[:2]
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"{path}: unsupported PGM magic {magic!r}")
    try:
        (w, h, maxval), pos = _pgm_tokens(buf, 3, 2)
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError(f"{path}: malformed PGM header") from None
    if maxval != 255:
        raise FormatError(f"{path}: unsupported maxval {maxval} (only 255)")
    if width < 1 or height < 1:
        raise FormatError(f"{path}: non-positive image size")
    if magic == b"P5":
        data = buf[pos + 1: pos + 1 + width * height]
        if len(data) != width * height:
            raise FormatError(f"{path}: truncated pixel data")
        pixels = np.frombuffer(data, dtype=np.uint8)
    else:
        body = buf[pos:].split()
        if len(body) < width * height:
            raise FormatError(f"{path}: truncated pixel data")
        pixels = np.array([int(t) for t in body[: width * height]])
        if pixels.min() < 0 or pixels.max() > 255:
            raise FormatError(f"{path}: pixel value out of range")
    return pixels.reshape(height, width).astype(np.float64)


def write_image_pgm(path, img: np.ndarray, plain: bool = False) -> None:
    """Write pixels clamped to [0, 255] and rounded to integers."""
    pix = np.clip(np.rint(np.asarray(img, dtype=np.float64)), 0, 255).astype(np.uint8)
    height, width = pix.shape
    if plain:
        lines = [" ".join(str(v) for v in row) for row in pix]
        Path(path).write_text(f"P2\n{width} {height}\n255\n" + "\n".join(lines) + "\n")
    else:
        Path(path).write_bytes(f"P5\n{width} {height}\n255\n".encode() + pix.tobytes())


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
