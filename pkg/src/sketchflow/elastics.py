"""Corotated elasticity on 2D triangle meshes.

Energy density per triangle is the fixed corotated model

    psi(F) = mu * ||F - R||_F^2 + lambda/2 * (det F - 1)^2

with R the rotation factor of the polar decomposition F = R S. All matrix
quantities (deformation gradients, rotations, stresses) are plain 2x2
float64 ndarrays; batched variants carry shape (T, 2, 2).

Units are pixels / seconds / unit mass, with unit thickness so triangle
"volumes" are rest areas in square pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidPoisson

# Determinants smaller than this are clamped inside F^{-T}; also the
# threshold below which the closed-form polar factor falls back to SVD.
DET_EPSILON = 1e-6


@dataclass(frozen=True)
class Material:
    """Homogeneous material: Lame coefficients and mass density.

    mu and lam are per unit thickness (force / length); density is mass
    per square pixel.
    """

    mu: float
    lam: float
    density: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.lam < 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        if not self.density > 0:
            raise ValueError(f"density must be positive, got {self.density}")


def material_from_young_poisson(young: float, poisson: float, density: float = 1.0) -> Material:
    """Convert (E, nu) to Lame parameters, plane-strain convention.

    mu = E / (2 (1 + nu)),  lambda = E nu / ((1 + nu)(1 - 2 nu)).

    Raises InvalidPoisson for nu outside [0, 0.5); the incompressible
    limit nu = 0.5 makes lambda diverge.
    """
    if not young > 0:
        raise ValueError(f"Young's modulus must be positive, got {young}")
    if poisson < 0 or poisson >= 0.5:
        raise InvalidPoisson(f"Poisson ratio must lie in [0, 0.5), got {poisson}")
    mu = young / (2.0 * (1.0 + poisson))
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    return Material(mu=mu, lam=lam, density=density)


@dataclass
class BodyState:
    """World-space positions and velocities of one meshed body.

    ``mesh`` supplies rest positions, triangles, rest areas and the
    precomputed inverse rest-shape matrices; positions/velocities/masses
    are per-vertex arrays of matching length.
    """

    mesh: object
    positions: np.ndarray
    velocities: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        n = len(self.mesh.rest_positions)
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64)
        self.velocities = np.ascontiguousarray(self.velocities, dtype=np.float64)
        self.masses = np.ascontiguousarray(self.masses, dtype=np.float64)
        if self.positions.shape != (n, 2):
            raise ValueError(f"positions shape {self.positions.shape} != ({n}, 2)")
        if self.velocities.shape != (n, 2):
            raise ValueError(f"velocities shape {self.velocities.shape} != ({n}, 2)")
        if self.masses.shape != (n,):
            raise ValueError(f"masses shape {self.masses.shape} != ({n},)")
        if not np.all(self.masses > 0):
            raise ValueError("all vertex masses must be positive")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.velocities))):
            raise ValueError("positions and velocities must be finite")

    def copy(self) -> "BodyState":
        return BodyState(self.mesh, self.positions.copy(), self.velocities.copy(),
                         self.masses.copy())


def body_state_at_rest(mesh, material: Material) -> BodyState:
    """Undeformed state: rest positions, zero velocity, lumped masses."""
    n = len(mesh.rest_positions)
    return BodyState(
        mesh=mesh,
        positions=np.array(mesh.rest_positions, dtype=np.float64),
        velocities=np.zeros((n, 2)),
        masses=lumped_masses(mesh, material.density),
    )


def lumped_masses(mesh, density: float) -> np.ndarray:
    """Per-vertex mass: each triangle contributes density * area / 3 to its corners."""
    if not density > 0:
        raise ValueError(f"density must be positive, got {density}")
    masses = np.zeros(len(mesh.rest_positions))
    share = density * np.asarray(mesh.rest_areas) / 3.0
    tris = np.asarray(mesh.triangles)
    for k in range(3):
        np.add.at(masses, tris[:, k], share)
    return masses


# --- deformation gradients ---------------------------------------------------

def deformation_gradients(positions: np.ndarray, mesh) -> np.ndarray:
    """F for every triangle, shape (T, 2, 2).

    F = [x1 - x0, x2 - x0] @ inv([X1 - X0, X2 - X0]); the inverse rest
    shapes are precomputed on the mesh.
    """
    tris = np.asarray(mesh.triangles)
    p0 = positions[tris[:, 0]]
    ds = np.stack([positions[tris[:, 1]] - p0, positions[tris[:, 2]] - p0], axis=2)
    return ds @ mesh.inv_rest_shape


def deformation_gradient(state: BodyState, tri: int) -> np.ndarray:
    """F of one triangle of the given body state."""
    tris = state.mesh.triangles
    if not 0 <= tri < len(tris):
        raise IndexError(f"triangle index {tri} out of range")
    a, b, c = tris[tri]
    ds = np.column_stack([state.positions[b] - state.positions[a],
                          state.positions[c] - state.positions[a]])
    return ds @ state.mesh.inv_rest_shape[tri]


# --- polar decomposition -----------------------------------------------------

def _polar_svd(F: np.ndarray) -> np.ndarray:
    # Signed SVD: guarantees det R = +1 even for inverted F by flipping
    # the direction of the smaller singular value.
    u, _, vt = np.linalg.svd(F)
    if np.linalg.det(u @ vt) < 0:
        u = u.copy()
        u[:, 1] = -u[:, 1]
    return u @ vt


def polar_rotation(F: np.ndarray) -> np.ndarray:
    """Rotation factor R of F = R S.

    Uses the 2D closed form for det F > DET_EPSILON and a signed SVD
    otherwise, so transiently inverted elements still yield a proper
    rotation (det R = +1).
    """
    F = np.asarray(F, dtype=np.float64)
    a, b = F[0]
    c, d = F[1]
    if a * d - b * c > DET_EPSILON:
        h = np.hypot(a + d, b - c)
        return np.array([[a + d, b - c], [c - b, a + d]]) / h
    return _polar_svd(F)


def polar_rotations(F: np.ndarray) -> np.ndarray:
    """Batched polar_rotation over shape (T, 2, 2)."""
    F = np.asarray(F, dtype=np.float64)
    a, b = F[:, 0, 0], F[:, 0, 1]
    c, d = F[:, 1, 0], F[:, 1, 1]
    det = a * d - b * c
    x = a + d
    y = b - c
    h = np.hypot(x, y)
    safe = det > DET_EPSILON
    h = np.where(safe, h, 1.0)
    R = np.empty_like(F)
    R[:, 0, 0] = x / h
    R[:, 0, 1] = y / h
    R[:, 1, 0] = -y / h
    R[:, 1, 1] = x / h
    for i in np.flatnonzero(~safe):
        R[i] = _polar_svd(F[i])
    return R


# --- constitutive model ------------------------------------------------------

def energy_density(F: np.ndarray, m: Material) -> float:
    """psi(F) = mu ||F - R||_F^2 + lambda/2 (det F - 1)^2."""
    F = np.asarray(F, dtype=np.float64)
    R = polar_rotation(F)
    det = F[0, 0] * F[1, 1] - F[0, 1] * F[1, 0]
    diff = F - R
    return float(m.mu * np.sum(diff * diff) + 0.5 * m.lam * (det - 1.0) ** 2)


def _clamped_div(det):
    # Divisor for F^{-T}: keep the sign, bound the magnitude away from 0.
    return np.where(np.abs(det) >= DET_EPSILON, det,
                    np.where(det < 0, -DET_EPSILON, DET_EPSILON))


def first_piola(F: np.ndarray, m: Material) -> np.ndarray:
    """dpsi/dF = 2 mu (F - R) + lambda (det F - 1) det F F^{-T}."""
    F = np.asarray(F, dtype=np.float64)
    R = polar_rotation(F)
    a, b = F[0]
    c, d = F[1]
    det = a * d - b * c
    inv_t = np.array([[d, -c], [-b, a]]) / _clamped_div(det)
    return 2.0 * m.mu * (F - R) + m.lam * (det - 1.0) * det * inv_t


def _first_piola_batch(F: np.ndarray, m: Material) -> np.ndarray:
    R = polar_rotations(F)
    a, b = F[:, 0, 0], F[:, 0, 1]
    c, d = F[:, 1, 0], F[:, 1, 1]
    det = a * d - b * c
    div = _clamped_div(det)
    inv_t = np.empty_like(F)
    inv_t[:, 0, 0] = d / div
    inv_t[:, 0, 1] = -c / div
    inv_t[:, 1, 0] = -b / div
    inv_t[:, 1, 1] = a / div
    scale = (m.lam * (det - 1.0) * det)[:, None, None]
    return 2.0 * m.mu * (F - R) + scale * inv_t


def total_energy(state: BodyState, m: Material) -> float:
    """Sum of psi(F_i) * V_i over all triangles; non-negative."""
    F = deformation_gradients(state.positions, state.mesh)
    R = polar_rotations(F)
    det = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
    diff = F - R
    psi = m.mu * np.einsum("tij,tij->t", diff, diff) + 0.5 * m.lam * (det - 1.0) ** 2
    return float(np.dot(psi, mesh_areas(state.mesh)))


def mesh_areas(mesh) -> np.ndarray:
    return np.asarray(mesh.rest_areas, dtype=np.float64)


def internal_forces(state: BodyState, m: Material) -> np.ndarray:
    """-dE/dx assembled per vertex, shape (N, 2).

    Per triangle: H = -V * P @ B^T with B the inverse rest shape; columns
    of H act on vertices 1 and 2, vertex 0 receives minus their sum, so
    each element contributes zero net force. Accumulation order is fixed
    (triangle index) for determinism.
    """
    mesh = state.mesh
    tris = np.asarray(mesh.triangles)
    F = deformation_gradients(state.positions, mesh)
    P = _first_piola_batch(F, m)
    BT = np.transpose(mesh.inv_rest_shape, (0, 2, 1))
    H = -mesh_areas(mesh)[:, None, None] * (P @ BT)
    forces = np.zeros_like(state.positions)
    np.add.at(forces, tris[:, 1], H[:, :, 0])
    np.add.at(forces, tris[:, 2], H[:, :, 1])
    np.add.at(forces, tris[:, 0], -H[:, :, 0] - H[:, :, 1])
    return forces
