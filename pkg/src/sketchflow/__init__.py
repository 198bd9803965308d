"""sketchflow: physics-driven 2D animation from still images and masks.

Masks become triangle meshes, meshes become deformable bodies driven by
user-authored force strokes and rig points, the simulated deformation
rasterizes into dense optical-flow fields, and the extracted sketch of the
reference image forward-warps along those fields into an animation-ready
frame sequence.
"""

from .elastics import (BodyState, Material, body_state_at_rest, deformation_gradient,
                       energy_density, first_piola, internal_forces, lumped_masses,
                       material_from_young_poisson, polar_rotation, total_energy)
from .dynamics import (RigPoint, SimBody, SimParams, Snapshot, apply_rigs, simulate,
                       step, wavy_rig_position)
from .flowfield import FlowField, rasterize_flow, read_flo, write_flo
from .geometry import (Contour, Mask, TriMesh, extract_contours, load_mask,
                       mesh_from_mask, sample_boundary, triangulate)
from .imaging import (ImageBuffer, WeightMap, extract_sketch, flow_magnitude_weights,
                      forward_warp, gaussian_blur, load_png, save_png)
from .scene import (Scene, compile_scene, load_scene, parse_scene, run_pipeline,
                    write_outputs)
from .strokes import (FlowParticle, ForceStroke, accumulate_external_forces,
                      attract_force, emit_and_advance, repel_force, wind_force)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
