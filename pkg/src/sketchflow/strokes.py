"""Force-carrying strokes and the particles they emit.

A stroke is a user-drawn polyline that spawns particles travelling along it.
Each live particle pushes nearby mesh vertices with one of three kernels
(wind, repel, attract), all with compact support of radius r:

    wind(q)    = s (1 - |p - q| / r) d          for |p - q| < r
    repel(q)   = s (q - p) / r                  for |q - p| < r
    attract(q) = s (1 - |q - p| / r) (p - q) / |p - q|   for 0 < |q - p| < r

p is the particle position, d its unit travel direction, q the vertex. The
attract kernel is defined as zero at q = p (0/0 otherwise) and repel is cut
off at r even though the raw formula grows with distance; r is the influence
range for every kind. Emission is deterministic: particles spawn whenever the
cumulative emission clock (t - t_start) * emit_rate crosses an integer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_EMIT_RATE = 30.0
DEFAULT_PARTICLE_SPEED = 200.0
DEFAULT_RADIUS = 60.0

_KINDS = ("wind", "repel", "attract")


@dataclass(frozen=True)
class ForceStroke:
    kind: str
    path: np.ndarray
    strength: float
    radius: float = DEFAULT_RADIUS
    particle_speed: float = DEFAULT_PARTICLE_SPEED
    emit_rate: float = DEFAULT_EMIT_RATE
    active: tuple = (0.0, float("inf"))

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown stroke kind {self.kind!r}")
        path = np.atleast_2d(np.asarray(self.path, dtype=np.float64))
        object.__setattr__(self, "path", path)
        minimum = 2 if self.kind == "wind" else 1
        if len(path) < minimum:
            raise ValueError(f"{self.kind} stroke needs >= {minimum} path points")
        if self.strength < 0:
            raise ValueError("strength must be >= 0")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.kind == "wind" and not self.particle_speed > 0:
            raise ValueError("wind strokes need positive particle speed")
        if not self.active[0] < self.active[1]:
            raise ValueError("active window must satisfy t_start < t_end")
        seg = np.diff(path, axis=0)
        lengths = np.hypot(seg[:, 0], seg[:, 1]) if len(seg) else np.zeros(0)
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        object.__setattr__(self, "_cum", cum)
        object.__setattr__(self, "_seg", seg)

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    def point_at(self, arc: float):
        """Position and unit tangent at the given arc length along the path.

        Arc lengths exactly on a joint take the tangent of the following
        segment, so a particle crossing a corner points along its new leg.
        """
        cum = self._cum
        if self.length == 0.0:
            return self.path[0].copy(), np.array([1.0, 0.0])
        i = int(np.searchsorted(cum, arc, side="right")) - 1
        i = min(max(i, 0), len(self._seg) - 1)
        seg_len = cum[i + 1] - cum[i]
        frac = 0.0 if seg_len == 0.0 else (arc - cum[i]) / seg_len
        pos = self.path[i] + frac * self._seg[i]
        tangent = self._seg[i] / seg_len if seg_len > 0 else np.array([1.0, 0.0])
        return pos, tangent


@dataclass
class FlowParticle:
    position: np.ndarray
    direction: np.ndarray
    arc: float
    stroke: ForceStroke


def _emitted_by(stroke: ForceStroke, t: float) -> int:
    t0, t1 = stroke.active
    window = min(t, t1) - t0
    if window <= 0:
        return 0
    return int(np.floor(window * stroke.emit_rate))


def emit_and_advance(stroke: ForceStroke, particles: list, t: float, dt: float) -> list:
    """Advance live particles by one step and spawn the ones due in (t, t+dt].

    Particles advance their arc by particle_speed * dt, snap back onto the
    path, and die once the arc passes the path end. New particles appear at
    the path start. A single-point stroke keeps exactly one particle alive
    during its active window.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    out = []
    if stroke.length == 0.0:
        if stroke.active[0] <= t + dt < stroke.active[1]:
            pos, tan = stroke.point_at(0.0)
            out.append(FlowParticle(pos, tan, 0.0, stroke))
        return out
    for particle in particles:
        arc = particle.arc + stroke.particle_speed * dt
        if arc > stroke.length:
            continue
        pos, tan = stroke.point_at(arc)
        out.append(FlowParticle(pos, tan, arc, stroke))
    fresh = _emitted_by(stroke, t + dt) - _emitted_by(stroke, t)
    for _ in range(fresh):
        pos, tan = stroke.point_at(0.0)
        out.append(FlowParticle(pos, tan, 0.0, stroke))
    return out


# --- kernels ------------------------------------------------------------

def wind_force(p, d, q, s: float, r: float) -> np.ndarray:
    """Force along the particle direction, fading linearly to zero at r."""
    if not r > 0:
        raise ValueError("radius must be positive")
    w = np.hypot(q[0] - p[0], q[1] - p[1]) / r
    if w >= 1.0:
        return np.zeros(2)
    return s * (1.0 - w) * np.asarray(d, dtype=np.float64)


def repel_force(p, q, s: float, r: float) -> np.ndarray:
    """Force pushing the vertex away from the particle, zero at and beyond r."""
    if not r > 0:
        raise ValueError("radius must be positive")
    delta = np.asarray(q, dtype=np.float64) - np.asarray(p, dtype=np.float64)
    if np.hypot(delta[0], delta[1]) >= r:
        return np.zeros(2)
    return s * delta / r


def attract_force(p, q, s: float, r: float) -> np.ndarray:
    """Force pulling the vertex toward the particle; zero at q = p and beyond r."""
    if not r > 0:
        raise ValueError("radius must be positive")
    delta = np.asarray(p, dtype=np.float64) - np.asarray(q, dtype=np.float64)
    dist = np.hypot(delta[0], delta[1])
    if dist >= r or dist == 0.0:
        return np.zeros(2)
    return s * (1.0 - dist / r) * delta / dist


# --- accumulation over mesh vertices -------------------------------------

def _kernel_batch(particle: FlowParticle, positions: np.ndarray) -> np.ndarray:
    """Kernel force of one particle on many vertices, zero outside radius."""
    stroke = particle.stroke
    s, r = stroke.strength, stroke.radius
    delta = positions - particle.position
    dist = np.hypot(delta[:, 0], delta[:, 1])
    inside = dist < r
    forces = np.zeros_like(positions)
    if not inside.any():
        return forces
    if stroke.kind == "wind":
        forces[inside] = (s * (1.0 - dist[inside, None] / r)) * particle.direction
    elif stroke.kind == "repel":
        forces[inside] = s * delta[inside] / r
    else:
        d = dist[inside]
        nz = d > 0.0
        scaled = np.zeros((int(inside.sum()), 2))
        scaled[nz] = -s * (1.0 - d[nz, None] / r) * delta[inside][nz] / d[nz, None]
        forces[inside] = scaled
    return forces


class _HashGrid:
    """Uniform grid over vertex positions; cell size >= any query radius."""

    # clamp cell indices so near-divergent positions cannot overflow the cast
    _KEY_CAP = float(1 << 40)

    def __init__(self, positions: np.ndarray, cell: float):
        self.positions = positions
        self.cell = cell
        self.buckets = {}
        scaled = np.clip(np.floor(positions / cell), -self._KEY_CAP, self._KEY_CAP)
        keys = scaled.astype(np.int64)
        for idx, key in enumerate(map(tuple, keys)):
            self.buckets.setdefault(key, []).append(idx)

    def near(self, p) -> np.ndarray:
        cx = int(np.clip(np.floor(p[0] / self.cell), -self._KEY_CAP, self._KEY_CAP))
        cy = int(np.clip(np.floor(p[1] / self.cell), -self._KEY_CAP, self._KEY_CAP))
        found = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                found.extend(self.buckets.get((cx + dx, cy + dy), ()))
        found.sort()
        return np.array(found, dtype=np.int64)


def accumulate_external_forces(particles: list, bodies: list) -> list:
    """Sum kernel forces of all particles onto every body's vertices.

    Superposition in deterministic order: particles in list order, vertices
    in index order. Neighbour lookup uses a uniform hash grid with cell size
    equal to the largest stroke radius; a quadratic scan yields identical
    results and serves as the test oracle.
    """
    out = []
    max_r = max((p.stroke.radius for p in particles), default=1.0)
    for state in bodies:
        forces = np.zeros_like(state.positions)
        if particles:
            grid = _HashGrid(state.positions, max_r)
            for particle in particles:
                idx = grid.near(particle.position)
                if len(idx):
                    forces[idx] += _kernel_batch(particle, state.positions[idx])
        out.append(forces)
    return out


def accumulate_external_forces_quadratic(particles: list, bodies: list) -> list:
    """Reference all-pairs accumulation used to validate the grid path."""
    out = []
    for state in bodies:
        forces = np.zeros_like(state.positions)
        for particle in particles:
            forces += _kernel_batch(particle, state.positions)
        out.append(forces)
    return out
