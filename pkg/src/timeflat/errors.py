"""Exception hierarchy shared by all timeflat modules."""


class TimeflatError(Exception):
    """Base class for every error raised by this package."""


class DomainError(TimeflatError, ValueError):
    """An event lies outside the admissible region of a spacetime chart."""


class ConfigurationError(TimeflatError, ValueError):
    """Invalid discretization or parameter choice."""


class GeometryError(TimeflatError):
    """The discrete surface violates a geometric precondition."""

    def __init__(self, message, node=None):
        super().__init__(message if node is None else f"{message} (node {node})")
        self.node = node


class SpacelikeMeanCurvatureError(GeometryError):
    """The mean curvature vector is not spacelike somewhere on the surface."""


class SolvabilityError(TimeflatError):
    """Right-hand side of a Poisson problem is not mean-zero."""


class ConvergenceError(TimeflatError):
    """A linear solve failed to reach its residual target."""

    def __init__(self, message, residual):
        super().__init__(f"{message}: residual {residual:.3e}")
        self.residual = residual


class FlowHaltError(TimeflatError):
    """A flow degenerated; ``last_lambda`` is the last good parameter value."""

    def __init__(self, message, last_lambda):
        super().__init__(f"{message} (last good lambda = {last_lambda:g})")
        self.last_lambda = last_lambda


class FrameUndefinedError(TimeflatError):
    """Frenet frame cannot be built because the curvature vanishes."""


class ScenarioError(TimeflatError):
    """Scenario file failed to parse or validate."""

    def __init__(self, message, line=None, column=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if field is not None:
            where.append(f"field '{field}'")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)
        self.line = line
        self.column = column
        self.field = field
