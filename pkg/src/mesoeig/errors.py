"""Exception hierarchy for mesoeig."""


class MesoEigError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(MesoEigError, ValueError):
    pass


class OverlappingInclusions(GeometryError):
    def __init__(self, pairs):
        self.pairs = [tuple(int(i) for i in p) for p in pairs]
        shown = ", ".join(f"({i}, {j})" for i, j in self.pairs[:10])
        more = "" if len(self.pairs) <= 10 else f" and {len(self.pairs) - 10} more"
        super().__init__(f"overlapping inclusions at index pairs {shown}{more}")


class InclusionOutsideDomain(GeometryError):
    pass


class RadiusListLengthMismatch(GeometryError):
    pass


class NonPositiveRadius(GeometryError):
    pass


class DegenerateGeometry(GeometryError):
    pass


class GeometryNotLattice(GeometryError):
    pass


class EvaluationError(MesoEigError, ValueError):
    pass


class EvaluationAtCenter(EvaluationError):
    pass


class PointOutsideDomain(EvaluationError):
    pass


class CoincidentPoints(EvaluationError):
    pass


class PointInsideInclusion(EvaluationError):
    pass


class QuadratureNotConverged(MesoEigError, RuntimeError):
    def __init__(self, message, value=None, error=None):
        super().__init__(message)
        self.value = value
        self.error = error


class SingularSystem(MesoEigError, RuntimeError):
    pass


class RootNotBracketed(MesoEigError, RuntimeError):
    pass


class ConfigError(MesoEigError, ValueError):
    pass
