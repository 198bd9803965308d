"""Time integration and rig-point constraints.

Semi-implicit (symplectic) Euler: velocities update first from forces at the
current positions, then positions advance with the new velocities. Rig points
are enforced by direct projection after each step, so constrained vertices
match their prescribed trajectories exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .elastics import BodyState, Material, body_state_at_rest, internal_forces
from .errors import NonFiniteState, WrongRigKind
from .strokes import accumulate_external_forces, emit_and_advance

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimParams:
    """Integration settings. dt in seconds per substep, damping in 1/s."""

    dt: float = 0.001
    fps: float = 24.0
    frame_count: int = 48
    damping: float = 0.5
    gravity: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if self.frame_count < 1:
            raise ValueError(f"frame_count must be >= 1, got {self.frame_count}")
        if self.damping < 0:
            raise ValueError(f"damping must be >= 0, got {self.damping}")
        if self.substeps_per_frame < 1:
            raise ValueError(
                f"fps*dt = {self.fps * self.dt} leaves no substep per frame")

    @property
    def substeps_per_frame(self) -> int:
        return int(round(1.0 / (self.fps * self.dt)))


@dataclass(frozen=True)
class RigPoint:
    """Constraint pinning one vertex to a prescribed trajectory.

    kind "fixed": stays at the rest anchor. kind "wavy": sinusoidal sway
    x(t) = anchor + amplitude * sin(frequency * t) * direction. kind
    "trajectory": piecewise-linear keyframes (time, position), clamped at
    the endpoints.
    """

    vertex: int
    kind: str
    anchor: np.ndarray
    amplitude: float = 0.0
    frequency: float = 1.0
    direction: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))
    trajectory: tuple = ()

    def __post_init__(self):
        if self.kind not in ("fixed", "wavy", "trajectory"):
            raise ValueError(f"unknown rig kind {self.kind!r}")
        object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=np.float64))
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=np.float64))
        if self.kind == "wavy":
            if self.amplitude < 0:
                raise ValueError("sway amplitude must be >= 0")
            if not self.frequency > 0:
                raise ValueError("sway frequency must be positive")
            norm = float(np.hypot(*self.direction))
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"sway direction must be unit length, norm {norm}")
        if self.kind == "trajectory":
            times = [t for t, _ in self.trajectory]
            if len(times) < 1:
                raise ValueError("trajectory rig needs at least one keyframe")
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValueError("trajectory keyframe times must strictly increase")


def wavy_rig_position(rig: RigPoint, t: float) -> np.ndarray:
    """anchor + amplitude * sin(frequency t) * direction."""
    if rig.kind != "wavy":
        raise WrongRigKind(f"rig kind is {rig.kind!r}, expected 'wavy'")
    return rig.anchor + rig.amplitude * np.sin(rig.frequency * t) * rig.direction


def rig_position(rig: RigPoint, t: float) -> np.ndarray:
    """Prescribed position of the rig at time t."""
    if rig.kind == "fixed":
        return rig.anchor.copy()
    if rig.kind == "wavy":
        return wavy_rig_position(rig, t)
    times = np.array([k for k, _ in rig.trajectory])
    pts = np.array([p for _, p in rig.trajectory], dtype=np.float64)
    if t <= times[0]:
        return pts[0].copy()
    if t >= times[-1]:
        return pts[-1].copy()
    x = np.interp(t, times, pts[:, 0])
    y = np.interp(t, times, pts[:, 1])
    return np.array([x, y])


def apply_rigs(state: BodyState, rigs, t_old: float, t_new: float) -> BodyState:
    """Project rigged vertices onto their prescribed positions.

    Velocity is the finite difference of the prescription over the step, so
    the constraint carries momentum into neighbouring vertices through the
    elastic forces of subsequent steps.
    """
    if not rigs:
        return state
    if not t_new > t_old:
        raise ValueError("t_new must exceed t_old")
    out = state.copy()
    inv_dt = 1.0 / (t_new - t_old)
    for rig in rigs:
        x_new = rig_position(rig, t_new)
        x_old = rig_position(rig, t_old)
        out.positions[rig.vertex] = x_new
        out.velocities[rig.vertex] = (x_new - x_old) * inv_dt
    return out


def step(state: BodyState, f_ext: np.ndarray, m: Material, dt: float,
         damping: float = 0.0) -> BodyState:
    """One semi-implicit Euler substep.

    v' = v + dt M^-1 (f_int(x) + f_ext); x' = x + dt v'; then v' is scaled
    by max(0, 1 - damping dt). Raises NonFiniteState if the update leaves
    the finite range.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    f_ext = np.asarray(f_ext, dtype=np.float64)
    if f_ext.shape != state.positions.shape:
        raise ValueError(f"f_ext shape {f_ext.shape} != {state.positions.shape}")
    # overflow here is diagnosed below, not left to numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        forces = internal_forces(state, m) + f_ext
        v = state.velocities + dt * forces / state.masses[:, None]
        x = state.positions + dt * v
        v = v * max(0.0, 1.0 - damping * dt)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise NonFiniteState("integration produced non-finite positions or velocities")
    return BodyState(state.mesh, x, v, state.masses)


@dataclass
class SimBody:
    """One deformable body: mesh, material, and the rigs attached to it."""

    mesh: object
    material: Material
    rigs: list = field(default_factory=list)


@dataclass
class Snapshot:
    """Per-frame sample of the world: simulation clock and per-body positions."""

    time: float
    positions: list


def simulate(bodies: list, strokes: list, params: SimParams, on_frame=None) -> list:
    """Advance all bodies through frame_count frames of substeps.

    Returns frame_count + 1 snapshots; snapshot 0 holds the rest positions.
    Frame boundaries follow cumulative rounding of 1/(fps dt) so the clock
    tracks k/fps to within half a substep. Fully deterministic.

    ``on_frame(frame_index, snapshot)`` is called after each frame; returning
    False cancels the run, and the snapshots so far are returned.
    """
    states = [body_state_at_rest(b.mesh, b.material) for b in bodies]
    for b, s in zip(bodies, states):
        for rig in b.rigs:
            if not 0 <= rig.vertex < len(s.positions):
                raise ValueError(f"rig vertex {rig.vertex} out of range")
    snapshots = [Snapshot(0.0, [s.positions.copy() for s in states])]
    particles = {id(stroke): [] for stroke in strokes}
    per_frame = 1.0 / (params.fps * params.dt)
    gravity = np.asarray(params.gravity, dtype=np.float64)
    n = 0
    for frame in range(1, params.frame_count + 1):
        target = max(n + 1, int(round(frame * per_frame)))
        while n < target:
            t_old = n * params.dt
            t_new = (n + 1) * params.dt
            live = []
            for stroke in strokes:
                particles[id(stroke)] = emit_and_advance(
                    stroke, particles[id(stroke)], t_old, params.dt)
                live.extend(particles[id(stroke)])
            ext = accumulate_external_forces(live, states)
            for i, (body, state) in enumerate(zip(bodies, states)):
                f = ext[i] + state.masses[:, None] * gravity
                try:
                    new_state = step(state, f, body.material, params.dt, params.damping)
                except NonFiniteState as exc:
                    raise NonFiniteState(
                        f"body {i} diverged at frame {frame}, substep {n + 1}",
                        frame=frame, substep=n + 1) from exc
                states[i] = apply_rigs(new_state, body.rigs, t_old, t_new)
            n += 1
        snap = Snapshot(n * params.dt, [s.positions.copy() for s in states])
        snapshots.append(snap)
        if on_frame is not None and on_frame(frame, snap) is False:
            log.info("simulation cancelled at frame %d", frame)
            break
    return snapshots
