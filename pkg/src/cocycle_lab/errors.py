"""Exception hierarchy.  Every error the library raises derives from LabError."""


class LabError(Exception):
    pass


# frequency arithmetic
class RationalDetected(LabError):
    pass


class PrecisionExhausted(LabError):
    pass


class InsufficientDepth(LabError):
    pass


class NonMonotoneDelta(LabError):
    pass


class BracketFailure(LabError):
    pass


# observables / cocycles
class OutsideAnnulus(LabError):
    pass


class NearZeroWeight(LabError):
    """An orbit point came within the exclusion radius of a zero of the weight."""

    def __init__(self, message, x=None, j=None):
        super().__init__(message)
        self.x = x
        self.j = j


class DegenerateSingularValues(LabError):
    pass


class HypothesisLarge(LabError):
    """Avalanche Principle hypothesis min ||A_j|| >= H > n violated."""


class HypothesisDiff(LabError):
    """Avalanche Principle angle hypothesis violated."""


# spectrum
class InvalidTolerance(LabError):
    pass


class CenterZero(LabError):
    pass


class DegenerateFit(LabError):
    pass


# ergodic
class OrbitHit(LabError):
    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class QuadratureOverflow(LabError):
    pass


# harness
class ConfigError(LabError):
    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class CacheCorrupt(LabError):
    pass


class AssertionFailed(LabError):
    pass


class ScenarioError(LabError):
    """A module error raised inside a scenario; ``scenario`` names it."""

    def __init__(self, scenario, cause):
        super().__init__(f"scenario {scenario}: {type(cause).__name__}: {cause}")
        self.scenario = scenario
