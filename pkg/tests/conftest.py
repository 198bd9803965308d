import numpy as np
import pytest

from sketchflow.geometry import TriMesh

REPO = __import__("pathlib").Path(__file__).resolve().parent.parent
DEMO = REPO / "demo"
MASKS = REPO / "tests" / "data" / "masks"


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def build_mesh(points, triangles):
    """TriMesh from raw arrays, fixing orientation, with no boundary edges."""
    points = np.asarray(points, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int64).copy()
    for k, (a, b, c) in enumerate(triangles):
        d1 = points[b] - points[a]
        d2 = points[c] - points[a]
        if d1[0] * d2[1] - d1[1] * d2[0] < 0:
            triangles[k] = (a, c, b)
    return TriMesh.build(points, triangles, np.zeros((0, 2), dtype=np.int64))


@pytest.fixture
def single_triangle():
    return build_mesh([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [[0, 1, 2]])


@pytest.fixture
def square_mesh():
    return build_mesh([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
                      [[0, 1, 2], [0, 2, 3]])


def grid_mesh(nx, ny, jitter=0.0, rng=None, scale=1.0):
    """Triangulated grid with optional vertex jitter; <= nx*ny vertices."""
    xs, ys = np.meshgrid(np.arange(nx, dtype=np.float64),
                         np.arange(ny, dtype=np.float64))
    pts = np.column_stack([xs.ravel(), ys.ravel()]) * scale
    if jitter and rng is not None:
        pts = pts + rng.uniform(-jitter, jitter, size=pts.shape) * scale
    tris = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a = j * nx + i
            b = a + 1
            c = a + nx
            d = c + 1
            tris.append([a, b, d])
            tris.append([a, d, c])
    return build_mesh(pts, tris)


@pytest.fixture
def demo_scene_path():
    return DEMO / "scene.json"


@pytest.fixture
def mask_paths():
    return sorted(MASKS.glob("*.png"))
