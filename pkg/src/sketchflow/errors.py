"""Exception hierarchy shared across the toolkit.

Every error raised by library code derives from SketchflowError so callers
can catch one base class at pipeline boundaries.
"""


class SketchflowError(Exception):
    """Base class for all toolkit errors."""


# --- geometry ---------------------------------------------------------------

class EmptyMask(SketchflowError):
    """Mask contains no foreground pixel."""


class SpacingTooCoarse(SketchflowError):
    """Boundary sampling would produce fewer than 3 points."""


class DegenerateBoundary(SketchflowError):
    """Boundary polygon is self-intersecting, collinear, or too small."""


class RefinementDiverged(SketchflowError):
    """Mesh refinement exceeded the Steiner-point insertion cap."""


# --- elastics / dynamics ----------------------------------------------------

class InvalidPoisson(SketchflowError):
    """Poisson ratio outside [0, 0.5)."""


class NonFiniteState(SketchflowError):
    """Simulation produced a non-finite position or velocity.

    Signals numerical instability; reduce the time step or stiffness.
    """

    def __init__(self, message, frame=None, substep=None):
        super().__init__(message)
        self.frame = frame
        self.substep = substep


class WrongRigKind(SketchflowError):
    """Operation applied to a rig point of an incompatible kind."""


# --- flow field I/O ---------------------------------------------------------

class IoFailure(SketchflowError):
    """Underlying stream failed while writing."""


class BadMagic(SketchflowError):
    """Stream does not start with the flow-file magic tag."""


class TruncatedStream(SketchflowError):
    """Stream ended before the declared payload was read."""


class DimensionOverflow(SketchflowError):
    """Declared flow dimensions are non-positive or implausibly large."""


# --- imaging ----------------------------------------------------------------

class DimensionMismatch(SketchflowError):
    """Companion buffers (image / flow / weights) disagree on size."""


class BadImage(SketchflowError):
    """Byte payload could not be decoded as a supported PNG."""


# --- scene / service --------------------------------------------------------

class ParseError(SketchflowError):
    """Scene document is not syntactically valid JSON."""


class ValidationError(SketchflowError):
    """Scene document violates the schema.

    ``path`` is a JSON path such as ``strokes[0].radius``.
    """

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.reason = message


class PipelineError(SketchflowError):
    """A pipeline stage failed; carries the stage name and frame index."""

    def __init__(self, stage, message, frame=None):
        where = f"stage '{stage}'" + (f", frame {frame}" if frame is not None else "")
        super().__init__(f"{where}: {message}")
        self.stage = stage
        self.frame = frame


class StaleRevision(SketchflowError):
    """Mutation cited a revision older than the session's current one."""


class StaleSimulation(SketchflowError):
    """Export requested but the cached simulation is out of date."""
