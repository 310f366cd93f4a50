"""Raster file I/O: PGM (P2/P5) and raw float64 with a JSON sidecar.

PGM stores integer samples up to maxval 65535 (two-byte big-endian samples
above 255, per the format); it round-trips integer-valued images exactly.
The f64 format is the lossless route for real-valued rasters: little-endian
row-major float64 payload in ``path`` plus ``path + ".json"`` holding
``{"width": W, "height": H, "dtype": "f64-le"}``. Format dispatch goes by
extension: ``.pgm`` is PGM, everything else is f64-raw.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .operators import Image

PGM_MAXVAL_LIMIT = 65535
F64_DTYPE = "f64-le"


def sidecar_path(path: str) -> str:
    return path + ".json"


def write_f64(path: str, image: Image) -> None:
    payload = image.data.astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(payload)
    meta = {"dtype": F64_DTYPE, "height": image.height, "width": image.width}
    with open(sidecar_path(path), "w", encoding="ascii") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")


def read_f64(path: str) -> Image:
    with open(sidecar_path(path), "r", encoding="ascii") as fh:
        meta = json.load(fh)
    if meta.get("dtype") != F64_DTYPE:
        raise ValueError(f"{path}: unsupported dtype {meta.get('dtype')!r}")
    width, height = int(meta["width"]), int(meta["height"])
    expected = 8 * width * height
    with open(path, "rb") as fh:
        payload = fh.read()
    if len(payload) != expected:
        raise ValueError(f"{path}: payload is {len(payload)} bytes, "
                         f"expected {expected} for {width}x{height} float64")
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return Image(width=width, height=height, data=data)


def write_pgm(path: str, image: Image, binary: bool = True,
              maxval: int | None = None) -> None:
    """Write an integer-valued image as P5 (binary) or P2 (ascii)."""
    data = image.data
    if np.any(data < 0.0) or np.any(data != np.rint(data)):
        raise ValueError("PGM requires non-negative integer-valued samples")
    top = int(np.max(data)) if data.size else 0
    if maxval is None:
        maxval = max(top, 1)
    if top > maxval:
        raise ValueError(f"sample {top} exceeds maxval {maxval}")
    if maxval > PGM_MAXVAL_LIMIT:
        raise ValueError(f"maxval {maxval} exceeds the PGM limit {PGM_MAXVAL_LIMIT}")
    samples = data.astype(np.uint16 if maxval > 255 else np.uint8)
    header = f"{'P5' if binary else 'P2'}\n{image.width} {image.height}\n{maxval}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(samples.astype(">u2").tobytes() if maxval > 255
                     else samples.tobytes())
        else:
            rows = samples.reshape(image.height, image.width)
            body = "\n".join(" ".join(str(int(v)) for v in row) for row in rows)
            fh.write(body.encode("ascii"))
            fh.write(b"\n")


def _tokenize_pgm_header(blob: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated integers, skipping # comments."""
    tokens: list[int] = []
    i = 0
    while len(tokens) < count:
        if i >= len(blob):
            raise ValueError("truncated PGM header")
        ch = blob[i:i + 1]
        if ch.isspace():
            i += 1
        elif ch == b"#":
            end = blob.find(b"\n", i)
            i = len(blob) if end < 0 else end + 1
        else:
            j = i
            while j < len(blob) and not blob[j:j + 1].isspace():
                j += 1
            tokens.append(int(blob[i:j]))
            i = j
    return tokens, i


def read_pgm(path: str) -> Image:
    with open(path, "rb") as fh:
        blob = fh.read()
    magic = blob[:2]
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"{path}: not a PGM file (magic {magic!r})")
    (width, height, maxval), offset = _tokenize_pgm_header(blob[2:], 3)
    offset += 2
    if not 0 < maxval <= PGM_MAXVAL_LIMIT:
        raise ValueError(f"{path}: maxval {maxval} outside (0, {PGM_MAXVAL_LIMIT}]")
    n = width * height
    if magic == b"P5":
        offset += 1  # single whitespace byte after maxval
        dtype = ">u2" if maxval > 255 else np.uint8
        itemsize = 2 if maxval > 255 else 1
        payload = blob[offset:offset + n * itemsize]
        if len(payload) != n * itemsize:
            raise ValueError(f"{path}: truncated P5 payload")
        data = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    else:
        values = blob[offset:].split()
        if len(values) != n:
            raise ValueError(f"{path}: P2 has {len(values)} samples, expected {n}")
        data = np.array([int(v) for v in values], dtype=np.float64)
    if np.any(data > maxval):
        raise ValueError(f"{path}: sample exceeds declared maxval {maxval}")
    return Image(width=width, height=height, data=data)


def read_raster(path: str) -> Image:
    if path.lower().endswith(".pgm"):
        return read_pgm(path)
    return read_f64(path)


def write_raster(path: str, image: Image) -> None:
    if path.lower().endswith(".pgm"):
        write_pgm(path, image)
    else:
        write_f64(path, image)
