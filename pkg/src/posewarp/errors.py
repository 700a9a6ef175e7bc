"""Exception hierarchy shared across the toolkit."""


class PosewarpError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(PosewarpError, ValueError):
    """An argument violates a documented precondition (shape, range, domain)."""


class ModelFormatError(PosewarpError):
    """A model container file is malformed; the message names the offending field."""


class DegeneratePoseError(PosewarpError):
    """Rotation is inside the gimbal-lock neighbourhood; Euler angles undefined."""


class FitDegenerateError(PosewarpError):
    """Landmark geometry is rank-deficient; pose/coefficients cannot be solved."""


class NoBackgroundError(PosewarpError):
    """The face hull covers the whole image; no background anchors can be placed."""


class TriangulationError(PosewarpError):
    """Scene points cannot be triangulated (duplicates or degenerate layout)."""


class RenderError(PosewarpError):
    """Rasterization received an empty or unusable scene mesh."""


class AlignmentDegenerateError(PosewarpError):
    """Alignment landmarks are collinear; similarity transform undefined."""


class SizeError(PosewarpError, ValueError):
    """An image does not meet the size required by an operation."""


class ManifestError(PosewarpError):
    """A manifest or prediction file is malformed or inconsistent."""


class VideoSkipped(PosewarpError):
    """A video cannot be augmented (failed fit or unreadable data); carries the reason."""
