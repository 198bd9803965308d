"""Dense optical-flow fields rasterized from mesh deformation, plus .flo I/O.

A flow field stores, for every pixel of the reference image, the displacement
of that pixel from frame 0 to the sampled time. Pixels whose center falls
inside a rest triangle get the barycentric interpolation of the vertex
displacements (the per-triangle affine map); everything else is zero.

Pixel centers sit at half-integer coordinates (col + 0.5, row + 0.5); the
warping code shares this convention.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, DimensionOverflow, IoFailure, TruncatedStream

FLO_MAGIC = 202021.25
_INSIDE_EPS = -1e-9
_MAX_DIM = 1 << 16


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement; u, v are (height, width) float32 arrays."""

    width: int
    height: int
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        for name, arr in (("u", self.u), ("v", self.v)):
            if arr.shape != (self.height, self.width):
                raise ValueError(f"{name} shape {arr.shape} != ({self.height}, {self.width})")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")

    @classmethod
    def zeros(cls, width: int, height: int) -> "FlowField":
        return cls(width, height,
                   np.zeros((height, width), dtype=np.float32),
                   np.zeros((height, width), dtype=np.float32))

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u.astype(np.float64), self.v.astype(np.float64))


def _pixel_centers(width: int, height: int):
    xs = np.arange(width, dtype=np.float64) + 0.5
    ys = np.arange(height, dtype=np.float64) + 0.5
    return np.meshgrid(xs, ys)


def _barycentric(pa, pb, pc, px, py):
    # denominator is twice the (positive) rest area
    denom = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0])
    la = ((pb[0] - px) * (pc[1] - py) - (pb[1] - py) * (pc[0] - px)) / denom
    lb = ((pc[0] - px) * (pa[1] - py) - (pc[1] - py) * (pa[0] - px)) / denom
    lc = ((pa[0] - px) * (pb[1] - py) - (pa[1] - py) * (pb[0] - px)) / denom
    return la, lb, lc


def rasterize_displacement(mesh, positions: np.ndarray, width: int, height: int):
    """(u, v, covered) in float64; lowest triangle index wins on shared edges.

    Accelerated path: each triangle paints only the pixel block of its
    bounding box. ``rasterize_displacement_brute`` paints full frames and
    must produce bit-identical output.
    """
    disp = np.asarray(positions, dtype=np.float64) - mesh.rest_positions
    u = np.zeros((height, width))
    v = np.zeros((height, width))
    covered = np.zeros((height, width), dtype=bool)
    px_full, py_full = _pixel_centers(width, height)
    rest = mesh.rest_positions
    for a, b, c in mesh.triangles:
        pa, pb, pc = rest[a], rest[b], rest[c]
        xs = (pa[0], pb[0], pc[0])
        ys = (pa[1], pb[1], pc[1])
        # one-pixel margin so the inside epsilon can never reach past the box
        c0 = max(0, int(np.ceil(min(xs) - 0.5)) - 1)
        c1 = min(width - 1, int(np.floor(max(xs) - 0.5)) + 1)
        r0 = max(0, int(np.ceil(min(ys) - 0.5)) - 1)
        r1 = min(height - 1, int(np.floor(max(ys) - 0.5)) + 1)
        if c0 > c1 or r0 > r1:
            continue
        block = np.s_[r0:r1 + 1, c0:c1 + 1]
        la, lb, lc = _barycentric(pa, pb, pc, px_full[block], py_full[block])
        inside = ((la >= _INSIDE_EPS) & (lb >= _INSIDE_EPS) & (lc >= _INSIDE_EPS)
                  & ~covered[block])
        if not inside.any():
            continue
        u[block][inside] = (la * disp[a, 0] + lb * disp[b, 0] + lc * disp[c, 0])[inside]
        v[block][inside] = (la * disp[a, 1] + lb * disp[b, 1] + lc * disp[c, 1])[inside]
        covered[block] |= inside
    return u, v, covered


def rasterize_displacement_brute(mesh, positions: np.ndarray, width: int, height: int):
    """All-triangles scan over the full canvas; oracle for the bbox path."""
    disp = np.asarray(positions, dtype=np.float64) - mesh.rest_positions
    u = np.zeros((height, width))
    v = np.zeros((height, width))
    covered = np.zeros((height, width), dtype=bool)
    px, py = _pixel_centers(width, height)
    rest = mesh.rest_positions
    for a, b, c in mesh.triangles:
        pa, pb, pc = rest[a], rest[b], rest[c]
        la, lb, lc = _barycentric(pa, pb, pc, px, py)
        inside = (la >= _INSIDE_EPS) & (lb >= _INSIDE_EPS) & (lc >= _INSIDE_EPS) & ~covered
        if not inside.any():
            continue
        u[inside] = (la * disp[a, 0] + lb * disp[b, 0] + lc * disp[c, 0])[inside]
        v[inside] = (la * disp[a, 1] + lb * disp[b, 1] + lc * disp[c, 1])[inside]
        covered |= inside
    return u, v, covered


def rasterize_flow(mesh, positions: np.ndarray, width: int, height: int) -> FlowField:
    """Flow field of one body's deformation against its rest mesh."""
    if len(positions) != len(mesh.rest_positions):
        raise ValueError("positions length does not match mesh vertex count")
    u, v, _ = rasterize_displacement(mesh, positions, width, height)
    return FlowField(width, height, u.astype(np.float32), v.astype(np.float32))


def write_flo(field: FlowField, destination) -> None:
    """Middlebury layout: float32 magic, int32 width/height, row-major (u, v)."""
    data = np.empty((field.height, field.width, 2), dtype="<f4")
    data[:, :, 0] = field.u
    data[:, :, 1] = field.v
    try:
        destination.write(struct.pack("<fii", FLO_MAGIC, field.width, field.height))
        destination.write(data.tobytes())
    except OSError as exc:
        raise IoFailure(f"failed to write flow stream: {exc}") from exc


def read_flo(source) -> FlowField:
    """Inverse of write_flo; validates magic, dimensions, and payload size."""
    header = source.read(12)
    if len(header) < 12:
        raise TruncatedStream(f"header needs 12 bytes, got {len(header)}")
    magic, width, height = struct.unpack("<fii", header)
    if magic != FLO_MAGIC:
        raise BadMagic(f"magic float {magic!r} != {FLO_MAGIC}")
    if width <= 0 or height <= 0 or width > _MAX_DIM or height > _MAX_DIM:
        raise DimensionOverflow(f"implausible dimensions {width}x{height}")
    expected = width * height * 8
    payload = source.read(expected)
    if len(payload) < expected:
        raise TruncatedStream(f"payload needs {expected} bytes, got {len(payload)}")
    data = np.frombuffer(payload, dtype="<f4").reshape(height, width, 2)
    return FlowField(width, height, data[:, :, 0].copy(), data[:, :, 1].copy())
