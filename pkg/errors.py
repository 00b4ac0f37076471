"""Exception hierarchy shared by the geometry, mesh, FE and experiment layers."""


class IsoparError(Exception):
    """Base class for every error raised by this package."""


class DomainError(IsoparError, ValueError):
    """Argument outside the domain of a geometric operation."""


class DomainFileError(DomainError):
    """Malformed custom domain file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)


class PreconditionError(IsoparError, ValueError):
    """Caller violated an operation precondition."""


class MeshQualityError(IsoparError):
    """Generated mesh misses the configured quality bounds."""

    def __init__(self, message, triangle=None):
        self.triangle = triangle
        super().__init__(f'{message} (worst triangle {triangle})')


class MeshFormatError(IsoparError):
    """Malformed mesh text file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)


class ElevationError(IsoparError):
    """Isoparametric element with a non-positive Jacobian."""

    def __init__(self, message, element=None):
        self.element = element
        super().__init__(f'element {element}: {message}')


class InversionError(IsoparError):
    """Newton inversion of an element map did not converge."""

    def __init__(self, message, element=None, point=None):
        self.element = element
        self.point = point
        super().__init__(f'element {element}, point {point}: {message}')


class GeometryError(IsoparError):
    """Degenerate map (non-positive Jacobian of Phi_h)."""


class AssemblyError(IsoparError):
    """Singular element Jacobian met during assembly."""

    def __init__(self, message, element=None):
        self.element = element
        super().__init__(f'element {element}: {message}')


class ConstraintError(IsoparError, ValueError):
    """Dirichlet value supplied for a dof that is not a boundary dof."""


class SolverError(IsoparError):
    """Iterative solver reached its iteration cap."""

    def __init__(self, message, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f'{message} (residual {residual}, iterations {iterations})')


class ConstructionError(IsoparError):
    """Outward vector field cannot be built for this domain."""


class ConfigError(IsoparError, ValueError):
    """Invalid experiment configuration."""

    def __init__(self, errors):
        self.errors = errors
        details = '; '.join(f'{field}: {", ".join(msgs)}' for field, msgs in errors.items())
        super().__init__(f'Invalid experiment configuration: {details}')
