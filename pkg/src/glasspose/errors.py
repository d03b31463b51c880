"""Exception types shared across the package."""


class NonUnitAxisError(ValueError):
    """An input axis deviates from unit length beyond tolerance."""


class NonOrthogonalAxesError(ValueError):
    """Two input axes are not orthogonal within tolerance."""


class OutOfBoundsError(ValueError):
    """A pixel coordinate lies outside the image."""


class NonPositiveDepthError(ValueError):
    """A depth value is zero or negative where a positive one is required."""


class ShapeMismatchError(ValueError):
    """Grids that must share dimensions do not."""


class EmptyMaskError(ValueError):
    """A mask required to contain at least one set pixel is empty."""


class EmptyCloudError(ValueError):
    """A point cloud required to be non-empty has no rows."""


class EmptyRegionError(ValueError):
    """A pixel region required to be non-empty is empty."""


class DegenerateAxesError(ValueError):
    """Predicted axes are too close to parallel to define a rotation plane."""


class NonPositiveScaleError(ValueError):
    """A box extent is zero or negative."""


class DegenerateConfigurationError(ValueError):
    """A point configuration is too degenerate to fit a transform."""


class LengthMismatchError(ValueError):
    """Paired prediction/ground-truth lists differ in length."""


class WidthMismatchError(ValueError):
    """A feature vector does not match the width a model expects."""


class SchemaMismatchError(ValueError):
    """A serialized record does not follow the expected schema."""


class PlacementFailureError(RuntimeError):
    """Scene generation could not place the requested instances."""


class DivergedLossError(RuntimeError):
    """The training loss became non-finite."""


class IoFailureError(OSError):
    """A dataset file could not be read or written."""
