"""Binary masks to simulation-ready triangle meshes.

Pipeline: trace mask contours with a square-marching scheme, resample each
contour uniformly by arc length, and triangulate the resulting polygon with
a conforming Delaunay triangulation (see ``delaunay``).

Coordinate convention: pixel (row r, col c) occupies the unit square
[c, c+1] x [r, r+1], so x is the column axis and y the row axis (y grows
downward). Contours are oriented with foreground on the left of the
traversal direction, which makes their shoelace area positive in this
frame; triangles inherit the same positive orientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from . import delaunay
from .errors import DegenerateBoundary, EmptyMask, SpacingTooCoarse

# Triangles below this rest area are rejected at mesh build time.
AREA_EPSILON = 1e-6

DEFAULT_SPACING = 12.0
DEFAULT_MAX_AREA = 300.0
DEFAULT_MIN_ANGLE = 20.0
MAX_MIN_ANGLE = 28.0


@dataclass(frozen=True)
class Mask:
    """Binary occupancy grid; ``bits`` is a row-major (height, width) bool array."""

    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"mask dimensions must be positive, got {self.width}x{self.height}")
        if self.bits.shape != (self.height, self.width):
            raise ValueError(f"bits shape {self.bits.shape} != ({self.height}, {self.width})")

    @classmethod
    def from_array(cls, bits) -> "Mask":
        arr = np.asarray(bits, dtype=bool)
        return cls(width=arr.shape[1], height=arr.shape[0], bits=arr)

    def contains_point(self, x: float, y: float) -> bool:
        c = int(np.floor(x))
        r = int(np.floor(y))
        if 0 <= r < self.height and 0 <= c < self.width:
            return bool(self.bits[r, c])
        return False


def load_mask(path) -> Mask:
    """Read an 8-bit grayscale PNG; a pixel is foreground iff its value >= 128."""
    img = Image.open(path).convert("L")
    arr = np.asarray(img)
    return Mask.from_array(arr >= 128)


@dataclass(frozen=True)
class Contour:
    """Closed simple polygon in pixel coordinates, positively oriented."""

    points: np.ndarray
    closed: bool = True

    @property
    def perimeter(self) -> float:
        rolled = np.roll(self.points, -1, axis=0)
        return float(np.sum(np.hypot(*(rolled - self.points).T)))

    @property
    def area(self) -> float:
        x, y = self.points[:, 0], self.points[:, 1]
        xr, yr = np.roll(x, -1), np.roll(y, -1)
        return float(0.5 * np.sum(x * yr - xr * y))


# Square-marching case table. Cell corners are the centers of four adjacent
# pixels; crossings sit at edge midpoints, diagonal cuts chamfer the corners
# so contours never pass through a grid corner point (keeps polygons simple
# even for diagonally touching pixels, which trace as separate loops).
# Key: tl*8 + tr*4 + br*2 + bl*1; values: directed (start, end) pairs among
# the four edge-midpoint slots T, R, B, L with foreground on the left.
_T, _R, _B, _L = 0, 1, 2, 3
_CASES = {
    1: [(_L, _B)],
    2: [(_B, _R)],
    3: [(_L, _R)],
    4: [(_R, _T)],
    5: [(_R, _T), (_L, _B)],
    6: [(_B, _T)],
    7: [(_L, _T)],
    8: [(_T, _L)],
    9: [(_T, _B)],
    10: [(_T, _L), (_B, _R)],
    11: [(_T, _R)],
    12: [(_R, _L)],
    13: [(_R, _B)],
    14: [(_B, _L)],
}


def _prune_collinear(points: np.ndarray) -> np.ndarray:
    n = len(points)
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        p_prev = points[(i - 1) % n]
        p = points[i]
        p_next = points[(i + 1) % n]
        cross = ((p[0] - p_prev[0]) * (p_next[1] - p[1])
                 - (p[1] - p_prev[1]) * (p_next[0] - p[0]))
        if cross == 0.0:
            keep[i] = False
    return points[keep]


def extract_contours(mask: Mask) -> list[Contour]:
    """One positively oriented contour per 4-connected foreground component.

    Holes are ignored: loops that enclose background trace with the opposite
    orientation and are dropped.
    """
    bits = mask.bits
    if not bits.any():
        raise EmptyMask("mask has no foreground pixel")
    padded = np.zeros((mask.height + 2, mask.width + 2), dtype=bool)
    padded[1:-1, 1:-1] = bits

    # coordinates doubled to keep all crossing points on the integer lattice
    segments: dict = {}
    cases = (padded[:-1, :-1].astype(np.int8) * 8 + padded[:-1, 1:] * 4
             + padded[1:, 1:] * 2 + padded[1:, :-1] * 1)
    for i, j in np.argwhere((cases > 0) & (cases < 15)):
        # cell (i, j): T=(2j, 2i-1) R=(2j+1, 2i) B=(2j, 2i+1) L=(2j-1, 2i)
        slots = ((2 * j, 2 * i - 1), (2 * j + 1, 2 * i),
                 (2 * j, 2 * i + 1), (2 * j - 1, 2 * i))
        for s, e in _CASES[int(cases[i, j])]:
            segments[slots[s]] = slots[e]

    contours = []
    visited = set()
    for start in segments:
        if start in visited:
            continue
        loop = [start]
        visited.add(start)
        cur = segments[start]
        while cur != start:
            loop.append(cur)
            visited.add(cur)
            cur = segments[cur]
        pts = np.array(loop, dtype=np.float64) * 0.5
        pts = _prune_collinear(pts)
        if len(pts) < 3:
            continue
        contour = Contour(points=pts)
        if contour.area > 0:
            contours.append(contour)
    if not contours:
        raise EmptyMask("mask has no traceable foreground region")
    return contours


def sample_boundary(contour: Contour, spacing: float) -> np.ndarray:
    """Uniform arc-length resampling of a closed contour.

    The sample count is round(perimeter / spacing) and the samples are then
    re-spaced exactly at perimeter / count, starting at the contour's first
    point; all samples lie on the original polyline.
    """
    if spacing <= 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    perimeter = contour.perimeter
    if spacing >= perimeter / 3:
        raise SpacingTooCoarse(
            f"spacing {spacing} too coarse for perimeter {perimeter:.2f} (need >= 3 samples)")
    count = int(round(perimeter / spacing))
    if count < 3:
        raise SpacingTooCoarse(f"only {count} samples would result")
    pts = contour.points
    closed = np.vstack([pts, pts[:1]])
    seg = np.hypot(*np.diff(closed, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.arange(count) * (perimeter / count)
    x = np.interp(targets, cum, closed[:, 0])
    y = np.interp(targets, cum, closed[:, 1])
    return np.column_stack([x, y])


@dataclass(frozen=True)
class TriMesh:
    """Rest-space triangulated geometry of one body.

    rest_positions: (N, 2) float64 pixel coordinates
    triangles:      (T, 3) int64, positively oriented
    boundary_edges: (K, 2) int64 vertex pairs lying on the input contour
    rest_areas:     (T,) float64 signed areas (all positive)
    inv_rest_shape: (T, 2, 2) inverse of [X1-X0, X2-X0] per triangle
    """

    rest_positions: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    rest_areas: np.ndarray = field(repr=False)
    inv_rest_shape: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, points: np.ndarray, triangles: np.ndarray,
              boundary_edges: np.ndarray) -> "TriMesh":
        points = np.ascontiguousarray(points, dtype=np.float64)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        boundary_edges = np.ascontiguousarray(boundary_edges, dtype=np.int64)
        p0 = points[triangles[:, 0]]
        d1 = points[triangles[:, 1]] - p0
        d2 = points[triangles[:, 2]] - p0
        areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        if np.any(areas < AREA_EPSILON):
            bad = int(np.argmin(areas))
            raise DegenerateBoundary(
                f"triangle {bad} has signed area {areas[bad]:.3e} < {AREA_EPSILON}")
        shape = np.empty((len(triangles), 2, 2))
        shape[:, :, 0] = d1
        shape[:, :, 1] = d2
        inv = np.linalg.inv(shape)
        residue = np.abs(inv @ shape - np.eye(2)).max()
        if residue > 1e-9:
            raise DegenerateBoundary(f"rest shape inversion residue {residue:.3e} > 1e-9")
        return cls(rest_positions=points, triangles=triangles,
                   boundary_edges=boundary_edges, rest_areas=areas, inv_rest_shape=inv)

    @property
    def total_area(self) -> float:
        return float(self.rest_areas.sum())

    def nearest_vertex(self, x: float, y: float) -> int:
        d = self.rest_positions - np.array([x, y])
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))


def triangulate(boundary: np.ndarray, max_area: float = DEFAULT_MAX_AREA,
                min_angle: float = DEFAULT_MIN_ANGLE, steiner_cap: int = 20000) -> TriMesh:
    """Conforming Delaunay triangulation of a simple closed polygon.

    Every consecutive boundary pair survives as a chain of mesh edges; Steiner
    points are inserted until all triangles have area <= max_area and minimum
    angle >= min_angle. min_angle is capped at 28 degrees, above which the
    refinement is not guaranteed to terminate. Deterministic: identical input
    yields an identical mesh.
    """
    if not max_area > 0:
        raise ValueError(f"max_area must be positive, got {max_area}")
    if min_angle < 0 or min_angle > MAX_MIN_ANGLE:
        raise ValueError(f"min_angle must lie in [0, {MAX_MIN_ANGLE}], got {min_angle}")
    boundary = np.asarray(boundary, dtype=np.float64)
    points, tris, bedges = delaunay.conforming_triangulation(
        boundary, max_area, min_angle, steiner_cap)
    return TriMesh.build(points, tris, bedges)


def mesh_from_mask(mask: Mask, spacing: float = DEFAULT_SPACING,
                   max_area: float = DEFAULT_MAX_AREA,
                   min_angle: float = DEFAULT_MIN_ANGLE) -> TriMesh:
    """Full mask-to-mesh path; disjoint components merge into one mesh."""
    parts = []
    for contour in extract_contours(mask):
        samples = sample_boundary(contour, spacing)
        parts.append(triangulate(samples, max_area, min_angle))
    if len(parts) == 1:
        return parts[0]
    points = []
    tris = []
    bedges = []
    offset = 0
    for mesh in parts:
        points.append(mesh.rest_positions)
        tris.append(mesh.triangles + offset)
        bedges.append(mesh.boundary_edges + offset)
        offset += len(mesh.rest_positions)
    return TriMesh.build(np.vstack(points), np.vstack(tris), np.vstack(bedges))
