"""Exception hierarchy shared by every module of the package."""


class BrokenSobolevError(Exception):
    """Base class for all errors raised by this package."""

    #: short machine-readable name, reported by the CLI
    @property
    def kind(self):
        return type(self).__name__


# mesh_core / mesh_gen
class NonConforming(BrokenSobolevError, ValueError):
    pass


class DuplicateVertex(BrokenSobolevError, ValueError):
    pass


class DegenerateCell(BrokenSobolevError, ValueError):
    pass


class ParseError(BrokenSobolevError, ValueError):
    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class TargetNotVertex(BrokenSobolevError, ValueError):
    pass


class InvalidFactor(BrokenSobolevError, ValueError):
    pass


# dg_space
class PointOutsideCell(BrokenSobolevError, ValueError):
    pass


class BoundaryEdgeHasNoJump(BrokenSobolevError, ValueError):
    pass


# broken_norms
class EmptyRegion(BrokenSobolevError, ValueError):
    pass


# field_constructions
class FieldNotNormalContinuous(BrokenSobolevError, ValueError):
    pass


class CollarOverlap(BrokenSobolevError, ValueError):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class StripTooWide(BrokenSobolevError, ValueError):
    pass


class UnsupportedPolygon(BrokenSobolevError, ValueError):
    pass


# constants_lab
class NoConvergence(BrokenSobolevError, RuntimeError):
    pass


class SingularB(BrokenSobolevError, ValueError):
    pass


class SeminormKillsNoConstants(BrokenSobolevError, ValueError):
    pass


# shift_lab
class ZeroShift(BrokenSobolevError, ValueError):
    pass


class ZeroFunction(BrokenSobolevError, ValueError):
    pass


class LineHitsVertex(BrokenSobolevError, ValueError):
    pass


class BoundViolated(BrokenSobolevError, AssertionError):
    pass
