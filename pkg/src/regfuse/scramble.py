"""Transcript-recorded patchwise flip/rotation transforms.

An image is split into an n x n grid of equal patches; each patch gets a
random dihedral operation (flips then quarter-turn rotations). The
recorded transcript makes the transform exactly invertible, for images
and for displacement fields. Fields additionally transform their vector
values by each patch operation's linear action so that warping commutes
with the transform.

Grid parameter: n = -1 leaves the input untouched, n = 0 applies one
global flip (no rotation), n >= 1 uses an n x n patch grid. Non-square
patches only receive rectangle-preserving operations (flips and 180-degree
rotations).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .image import DisplacementField, Image


@dataclass(frozen=True)
class PatchOp:
    """One dihedral operation: flips applied first, then `rot` clockwise
    quarter-turns."""

    rot: int = 0
    flip_h: bool = False
    flip_v: bool = False

    def __post_init__(self):
        if self.rot not in (0, 1, 2, 3):
            raise ValueError("rot must be one of 0, 1, 2, 3")

    @property
    def is_identity(self) -> bool:
        return self.rot == 0 and not self.flip_h and not self.flip_v

    def matrix(self) -> np.ndarray:
        """Linear action on displacement vectors (dx, dy)."""
        f = np.array([[-1.0 if self.flip_h else 1.0, 0.0],
                      [0.0, -1.0 if self.flip_v else 1.0]])
        r = np.array([[0.0, -1.0], [1.0, 0.0]])  # one clockwise quarter-turn
        m = f
        for _ in range(self.rot):
            m = r @ m
        return m


@dataclass(frozen=True)
class TransformTranscript:
    """Full record of one scramble: grid parameter, source size, and the
    per-patch operations (a single op when n <= 0)."""

    n: int
    width: int
    height: int
    ops: tuple

    def __post_init__(self):
        if self.n < -1:
            raise ValueError("n must be >= -1")
        expected = 1 if self.n <= 0 else self.n * self.n
        if len(self.ops) != expected:
            raise ValueError(f"expected {expected} ops, got {len(self.ops)}")
        if self.n >= 1 and (self.width % self.n or self.height % self.n):
            raise ValueError("image dimensions must be divisible by n")

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "width": self.width,
                "height": self.height,
                "ops": [
                    {"rot": op.rot, "fh": op.flip_h, "fv": op.flip_v} for op in self.ops
                ],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "TransformTranscript":
        d = json.loads(text)
        ops = tuple(PatchOp(o["rot"], o["fh"], o["fv"]) for o in d["ops"])
        return cls(d["n"], d["width"], d["height"], ops)


def identity_transcript(width: int, height: int) -> TransformTranscript:
    return TransformTranscript(-1, width, height, (PatchOp(),))


def sample_transcript(width: int, height: int, n: int, rng_seed: int) -> TransformTranscript:
    """Draw a random transcript, deterministic for a given seed.

    Square patches sample uniformly over all 8 dihedral elements; for
    non-square patches only the 4 rectangle-preserving elements are used.
    n = 0 samples one global flip pair, n = -1 is the identity.
    """
    rng = np.random.default_rng(rng_seed)
    if n <= -1:
        return identity_transcript(width, height)
    if n == 0:
        fh, fv = rng.integers(0, 2, size=2)
        return TransformTranscript(0, width, height, (PatchOp(0, bool(fh), bool(fv)),))
    if width % n or height % n:
        raise ValueError("image dimensions must be divisible by n")
    square = (width // n) == (height // n)
    ops = []
    for _ in range(n * n):
        fh = bool(rng.integers(0, 2))
        if square:
            rot = int(rng.integers(0, 4))
        else:
            rot = int(rng.integers(0, 2)) * 2
        ops.append(PatchOp(rot, fh, False))
    return TransformTranscript(n, width, height, tuple(ops))


def _apply_op(patch: np.ndarray, op: PatchOp) -> np.ndarray:
    out = patch
    if op.flip_h:
        out = out[:, ::-1]
    if op.flip_v:
        out = out[::-1, :]
    if op.rot:
        out = np.rot90(out, -op.rot)
    return out


def _undo_op(patch: np.ndarray, op: PatchOp) -> np.ndarray:
    out = patch
    if op.rot:
        out = np.rot90(out, op.rot)
    if op.flip_v:
        out = out[::-1, :]
    if op.flip_h:
        out = out[:, ::-1]
    return out


def _check_dims(t: TransformTranscript, h: int, w: int):
    if (h, w) != (t.height, t.width):
        raise ValueError(
            f"transcript recorded for {t.width}x{t.height}, got {w}x{h}"
        )


def _patches(t: TransformTranscript):
    n = max(t.n, 1)
    ph = t.height // n
    pw = t.width // n
    for i in range(n):
        for j in range(n):
            yield i * n + j, slice(i * ph, (i + 1) * ph), slice(j * pw, (j + 1) * pw)


def _transform_plane(plane: np.ndarray, t: TransformTranscript, inverse: bool) -> np.ndarray:
    if t.n == -1:
        return plane.copy()
    fn = _undo_op if inverse else _apply_op
    if t.n == 0:
        return np.ascontiguousarray(fn(plane, t.ops[0]))
    out = np.empty_like(plane)
    for idx, sy, sx in _patches(t):
        block = fn(plane[sy, sx], t.ops[idx])
        if block.shape != out[sy, sx].shape:
            raise ValueError("rotation by 90/270 degrees requires square patches")
        out[sy, sx] = block
    return out


def _transform_field_planes(dx, dy, t: TransformTranscript, inverse: bool):
    if t.n == -1:
        return dx.copy(), dy.copy()
    fn = _undo_op if inverse else _apply_op
    odx = np.empty_like(dx)
    ody = np.empty_like(dy)
    if t.n == 0:
        regions = [((slice(None), slice(None)), t.ops[0])]
    else:
        regions = [((sy, sx), t.ops[idx]) for idx, sy, sx in _patches(t)]
    for (sy, sx), op in regions:
        m = np.linalg.inv(op.matrix()) if inverse else op.matrix()
        bx = fn(dx[sy, sx], op)
        by = fn(dy[sy, sx], op)
        if bx.shape != odx[sy, sx].shape:
            raise ValueError("rotation by 90/270 degrees requires square patches")
        # integer-valued orthogonal action: exact sign/swap arithmetic
        odx[sy, sx] = np.rint(m[0, 0]) * bx + np.rint(m[0, 1]) * by
        ody[sy, sx] = np.rint(m[1, 0]) * bx + np.rint(m[1, 1]) * by
    return odx, ody


def scramble_array(plane: np.ndarray, t: TransformTranscript) -> np.ndarray:
    _check_dims(t, plane.shape[0], plane.shape[1])
    return _transform_plane(plane, t, inverse=False)


def unscramble_array(plane: np.ndarray, t: TransformTranscript) -> np.ndarray:
    _check_dims(t, plane.shape[0], plane.shape[1])
    return _transform_plane(plane, t, inverse=True)


def scramble_image(img: Image, t: TransformTranscript) -> Image:
    """Split into patches, transform each per the transcript, re-stitch."""
    return Image(scramble_array(img.data, t))


def unscramble_image(img: Image, t: TransformTranscript) -> Image:
    """Exact inverse of scramble_image (bitwise round trip)."""
    return Image(unscramble_array(img.data, t))


def scramble_field_arrays(dx, dy, t: TransformTranscript):
    _check_dims(t, dx.shape[0], dx.shape[1])
    return _transform_field_planes(dx, dy, t, inverse=False)


def unscramble_field_arrays(dx, dy, t: TransformTranscript):
    _check_dims(t, dx.shape[0], dx.shape[1])
    return _transform_field_planes(dx, dy, t, inverse=True)


def scramble_field(field: DisplacementField, t: TransformTranscript) -> DisplacementField:
    """Forward transform of a displacement field: positions are permuted
    patchwise and vectors rotated/flipped by each patch op."""
    return DisplacementField(*scramble_field_arrays(field.dx, field.dy, t))


def unscramble_field(field: DisplacementField, t: TransformTranscript) -> DisplacementField:
    """Exact inverse of scramble_field, mapping patch-local fields back
    into globally comparable form."""
    return DisplacementField(*unscramble_field_arrays(field.dx, field.dy, t))


def unscramble_maps(t: TransformTranscript):
    """Precomputed gather indices and vector action for unscrambling.

    Returns (gy, gx, a, b, c, d) such that
    ``out[p] = (a*dxin + b*dyin, c*dxin + d*dyin)`` evaluated at
    ``(gy[p], gx[p])`` reproduces unscramble_field, and plain gathering
    reproduces unscramble_array. Used by the optimizer's hot path.
    """
    h, w = t.height, t.width
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    gy = unscramble_array(yy, t).astype(np.int64)
    gx = unscramble_array(xx, t).astype(np.int64)
    ones = np.ones((h, w))
    zeros = np.zeros((h, w))
    a, c = unscramble_field_arrays(ones, zeros, t)
    b, d = unscramble_field_arrays(zeros, ones, t)
    return gy, gx, a, b, c, d
