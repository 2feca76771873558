"""Error taxonomy.

Every failure mode the command-line harness can hit maps to a stable process
exit code, so the exception classes carry those codes.
"""


class BilayerError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DescriptorError(BilayerError):
    """A surface descriptor or experiment configuration is malformed."""

    exit_code = 2


class ReachError(BilayerError):
    """Offsets leave the tubular neighbourhood, or the shell ordering
    collapses: the requested band thickness is too large for the surface."""

    exit_code = 2


class RootSolveError(BilayerError):
    """A one-dimensional solve failed: target out of range, inadmissible
    offset, or no convergence within the iteration budget."""

    exit_code = 3


class QuadratureError(BilayerError):
    """Adaptive quadrature or a voxelisation failed to resolve the integrand."""

    exit_code = 4


class VoxelizationError(QuadratureError):
    """The voxel lattice is too coarse to resolve a density band."""

    exit_code = 4


class LowerBoundViolation(BilayerError):
    """The rescaled bilayer energy fell below the curvature lower bound."""

    exit_code = 5


class SandwichViolation(BilayerError):
    """The transport-cost sandwich (dual bound <= EMD <= ray cost) failed."""

    exit_code = 6
