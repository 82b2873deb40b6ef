"""Binary PGM (P5), PPM (P6) and PFM (Pf/PF) reading and writing.

16-bit PGM/PPM files are accepted on read and scaled to the 0..255 range.
PFM stores float32 samples and is used for LR observations: noiseless
dyadic observations are multiples of 1/1024 and fit float32 exactly,
whereas 8 or 16 bits would add rounding noise that the detail solves
amplify.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DataError


def _tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """First ``count`` header integers and the offset of the raster."""
    out: list[int] = []
    pos = 2
    while len(out) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise DataError("malformed netpbm header")
        out.append(int(data[start:pos]))
    # exactly one whitespace byte separates the header from the raster
    return out, pos + 1


def _read_pfm(path, data: bytes) -> np.ndarray:
    channels = 3 if data[:2] == b"PF" else 1
    header, pos = [], 2
    for _ in range(3):
        while data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        header.append(data[start:pos])
    try:
        width, height, scale = int(header[0]), int(header[1]), float(header[2])
    except ValueError as exc:
        raise DataError(f"{path}: malformed PFM header") from exc
    offset = pos + 1
    dtype = np.dtype("<f4" if scale < 0 else ">f4")
    count = width * height * channels
    if len(data) - offset < count * 4:
        raise DataError(f"{path}: raster is truncated")
    raster = np.frombuffer(data, dtype=dtype, count=count, offset=offset).astype(np.float64)
    shape = (height, width, channels) if channels == 3 else (height, width)
    # PFM rows run bottom to top
    img = raster.reshape(shape)[::-1].copy()
    if not np.all(np.isfinite(img)):
        raise DataError(f"{path}: contains NaN or Inf")
    return img


def write_pfm(path, img) -> None:
    """Write float32 samples, little-endian, unclamped."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        magic = b"Pf"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"PF"
    else:
        raise DataError(f"cannot write an image of shape {img.shape}")
    header = magic + f"\n{img.shape[1]} {img.shape[0]}\n-1.0\n".encode()
    Path(path).write_bytes(header + img[::-1].astype("<f4").tobytes())


def read_image(path) -> np.ndarray:
    """Load a P5, P6 or PFM file as float64, ``HxW`` or ``HxWx3``."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic in (b"Pf", b"PF"):
        return _read_pfm(path, data)
    if magic not in (b"P5", b"P6"):
        raise DataError(f"{path}: not a binary PGM/PPM/PFM file (magic {magic!r})")
    (width, height, maxval), offset = _tokens(data, 3)
    if not 0 < maxval < 65536:
        raise DataError(f"{path}: invalid maxval {maxval}")
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2" if maxval > 255 else "u1")
    count = width * height * channels
    if len(data) - offset < count * dtype.itemsize:
        raise DataError(f"{path}: raster is truncated")
    raster = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    img = raster.astype(np.float64).reshape((height, width, channels) if channels == 3 else (height, width))
    if maxval != 255:
        img *= 255.0 / maxval
    return img


def to_uint8(img) -> np.ndarray:
    return np.clip(np.rint(np.asarray(img, dtype=np.float64)), 0, 255).astype(np.uint8)


def write_image(path, img, bit_depth: int = 8) -> None:
    """Write ``HxW`` as P5 or ``HxWx3`` as P6, clamped to 0..255.

    With ``bit_depth=16`` the 0..255 range is stored with maxval 65535,
    which keeps about 0.004 intensity units of precision.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise DataError(f"cannot write an image of shape {img.shape}")
    if bit_depth == 8:
        maxval, raster = 255, to_uint8(img).tobytes()
    elif bit_depth == 16:
        scaled = np.clip(img, 0, 255) * (65535 / 255)
        maxval, raster = 65535, np.rint(scaled).astype(">u2").tobytes()
    else:
        raise ValueError(f"bit depth must be 8 or 16, got {bit_depth}")
    header = magic + f"\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode()
    Path(path).write_bytes(header + raster)
