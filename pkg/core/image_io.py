#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""Binary netpbm input and output: P6 (RGB) and P5 (grayscale), 8 bits per sample."""

import logging
from pathlib import Path
from typing import Iterable, List, Tuple, Union

import numpy as np

from core.exceptions import ImageFormatError
from core.models import Image

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CHANNELS = {b"P5": 1, b"P6": 3}
SUPPORTED_MAXVAL = 255
WHITESPACE = b" \t\r\n\v\f"


def _read_header(data: bytes) -> Tuple[List[bytes], int]:
    """Magic, width, height and maxval tokens, plus the offset of the first payload byte."""
    tokens: List[bytes] = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise ImageFormatError("Header ends before magic, size and maxval were read")
        byte = data[pos:pos + 1]
        if byte == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise ImageFormatError("Unterminated header comment")
            pos = end + 1
        elif byte in WHITESPACE:
            pos += 1
        else:
            start = pos
            while pos < len(data) and data[pos:pos + 1] not in WHITESPACE and data[pos:pos + 1] != b"#":
                pos += 1
            tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    if pos >= len(data) or data[pos:pos + 1] not in WHITESPACE:
        raise ImageFormatError("Missing whitespace after maxval")
    return tokens, pos + 1


def parse_image(data: bytes, source: str = "<bytes>") -> Image:
    tokens, offset = _read_header(data)
    magic = tokens[0]
    if magic not in CHANNELS:
        raise ImageFormatError(f"{source}: unsupported magic {magic!r}, expected P5 or P6")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as e:
        raise ImageFormatError(f"{source}: non-numeric header field") from e
    if width < 1 or height < 1:
        raise ImageFormatError(f"{source}: image must be nonempty, got {width}x{height}")
    if maxval != SUPPORTED_MAXVAL:
        raise ImageFormatError(f"{source}: unsupported maxval {maxval}, only {SUPPORTED_MAXVAL} is read")

    channels = CHANNELS[magic]
    expected = width * height * channels
    payload = data[offset:offset + expected]
    if len(payload) < expected:
        raise ImageFormatError(f"{source}: truncated payload, {len(payload)} of {expected} bytes")
    samples = np.frombuffer(payload, dtype=np.uint8).reshape(width * height, channels)
    if channels == 1:
        # grayscale loads as equal RGB channels
        samples = np.repeat(samples, 3, axis=1)
    return Image(width=width, height=height, pixels=samples.copy())


def load_image(path: PathLike) -> Image:
    path = Path(path)
    data = path.read_bytes()
    image = parse_image(data, source=str(path))
    logger.info(f"Loaded {image.width}x{image.height} image from {path}")
    return image


def encode_pgm(values: np.ndarray, width: int, height: int) -> bytes:
    header = f"P5\n{width} {height}\n{SUPPORTED_MAXVAL}\n".encode("ascii")
    return header + np.asarray(values, dtype=np.uint8).tobytes()


def encode_ppm(image: Image) -> bytes:
    header = f"P6\n{image.width} {image.height}\n{SUPPORTED_MAXVAL}\n".encode("ascii")
    return header + np.asarray(image.pixels, dtype=np.uint8).tobytes()


def mask_values(subset: Iterable[int], width: int, height: int) -> np.ndarray:
    values = np.zeros(width * height, dtype=np.uint8)
    indices = np.fromiter((int(v) for v in subset), dtype=int)
    if indices.size and (indices.min() < 0 or indices.max() >= width * height):
        raise ImageFormatError(f"Mask element out of range for a {width}x{height} image")
    values[indices] = 255
    return values


def emit_mask(subset: Iterable[int], width: int, height: int, path: PathLike) -> None:
    """P5 mask: 255 for selected pixels, 0 otherwise."""
    path = Path(path)
    path.write_bytes(encode_pgm(mask_values(subset, width, height), width, height))
    logger.info(f"Wrote {width}x{height} mask to {path}")


def write_image(image: Image, path: PathLike) -> None:
    Path(path).write_bytes(encode_ppm(image))
