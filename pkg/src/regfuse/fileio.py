"""Image and field file codecs.

Images are 8-bit binary PGM (P5), maxval 255, intensities mapped linearly
between byte values and [0, 1]. Comment lines starting with '#' are
tolerated in the header. Displacement fields use a small binary format:
magic "BSRF", u32 little-endian width and height, then width*height
float32 little-endian values for the dx plane followed by the dy plane.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .image import DisplacementField, Image

FIELD_MAGIC = b"BSRF"


def _parse_pgm_header(buf: bytes):
    if buf[:2] != b"P5":
        magic = buf[:2].decode("ascii", "replace")
        raise ValueError(f"unsupported image format (magic {magic!r}, expected P5)")
    pos = 2
    fields = []
    while len(fields) < 3:
        # skip whitespace and comment lines
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        token = buf[start:pos]
        if not token:
            raise ValueError("malformed PGM header: missing fields")
        try:
            fields.append(int(token))
        except ValueError:
            raise ValueError(f"malformed PGM header: bad integer {token!r}") from None
    if pos >= len(buf):
        raise ValueError("malformed PGM header: missing payload separator")
    pos += 1  # single whitespace byte separates header from payload
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ValueError("malformed PGM header: non-positive dimensions")
    if maxval != 255:
        raise ValueError(f"unsupported max value {maxval} (only 8-bit, maxval 255)")
    return width, height, pos


def load_image(path) -> Image:
    buf = Path(path).read_bytes()
    width, height, pos = _parse_pgm_header(buf)
    need = width * height
    payload = buf[pos : pos + need]
    if len(payload) < need:
        raise ValueError(f"truncated PGM payload: expected {need} bytes, got {len(payload)}")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return Image(arr.astype(np.float64) / 255.0)


def image_to_bytes(img: Image) -> bytes:
    q = np.clip(np.rint(img.data * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + q.tobytes()


def save_image(img: Image, path) -> None:
    _atomic_write(Path(path), image_to_bytes(img))


def load_field(path) -> DisplacementField:
    buf = Path(path).read_bytes()
    if buf[:4] != FIELD_MAGIC:
        raise ValueError(f"corrupt field file: bad magic {buf[:4]!r}")
    if len(buf) < 12:
        raise ValueError("corrupt field file: truncated header")
    width, height = struct.unpack("<II", buf[4:12])
    if width < 1 or height < 1:
        raise ValueError("corrupt field file: non-positive dimensions")
    need = width * height * 2 * 4
    payload = buf[12 : 12 + need]
    if len(payload) < need:
        raise ValueError(f"truncated field payload: expected {need} bytes, got {len(payload)}")
    plane = width * height * 4
    dx = np.frombuffer(payload[:plane], dtype="<f4").reshape(height, width)
    dy = np.frombuffer(payload[plane:], dtype="<f4").reshape(height, width)
    return DisplacementField(dx.astype(np.float64), dy.astype(np.float64))


def field_to_bytes(field: DisplacementField) -> bytes:
    header = FIELD_MAGIC + struct.pack("<II", field.width, field.height)
    return (
        header
        + field.dx.astype("<f4").tobytes()
        + field.dy.astype("<f4").tobytes()
    )


def save_field(field: DisplacementField, path) -> None:
    _atomic_write(Path(path), field_to_bytes(field))


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
