"""Exception hierarchy. Every error raised by the package derives from LipmaxError."""


class LipmaxError(Exception):
    pass


class DomainParameterError(LipmaxError, ValueError):
    pass


class ChartInadmissibleError(LipmaxError, ValueError):
    pass


class CoverageError(LipmaxError, ValueError):
    def __init__(self, message, element_ids=()):
        super().__init__(message)
        self.element_ids = list(element_ids)


class MeshFormatError(LipmaxError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MeshInvariantError(LipmaxError, ValueError):
    def __init__(self, message, entity=None):
        super().__init__(message)
        self.entity = entity


class OrientationError(MeshInvariantError):
    pass


class CapabilityError(LipmaxError, TypeError):
    pass


class ParameterError(LipmaxError, ValueError):
    pass


class InfeasibleTraceError(LipmaxError, ValueError):
    pass


class ConditioningError(LipmaxError, ArithmeticError):
    pass


class NumericError(LipmaxError, ArithmeticError):
    pass


class MaterialError(LipmaxError, ValueError):
    pass


class SolverError(LipmaxError, RuntimeError):
    pass


class ScopeError(LipmaxError, ValueError):
    pass


class ConfigurationError(LipmaxError, ValueError):
    pass


class SingularityError(LipmaxError, ValueError):
    pass
