"""Exception hierarchy shared by all solver modules."""


class PorodgError(Exception):
    """Base class for all package-specific errors."""


class MeshFormatError(PorodgError):
    """Malformed mesh or raster file; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MeshTopologyError(PorodgError):
    """Mesh violates a connectivity or orientation invariant."""


class SpaceConstructionError(PorodgError):
    """Local basis could not be orthonormalized (degenerate element)."""


class AssemblyError(PorodgError):
    """Inconsistent inputs to operator or right-hand-side assembly."""


class SolverError(PorodgError):
    """Linear solve failed or did not reach the required residual."""


class ConfigError(PorodgError):
    """Invalid run configuration; message names the offending entry."""
