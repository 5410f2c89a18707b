"""Exception hierarchy shared by all modules."""


class IsothermicError(Exception):
    """Base class for every error raised by the package."""


# algebra
class SignatureMismatch(IsothermicError):
    pass


class NonScalarNorm(IsothermicError):
    pass


class SingularElement(IsothermicError):
    pass


class InvalidVahlen(IsothermicError):
    pass


class PointAtInfinity(IsothermicError):
    pass


class CoincidentPoints(IsothermicError):
    pass


# surfaces
class DegenerateGrid(IsothermicError):
    pass


class GridMismatch(IsothermicError):
    pass


class NotConformal(IsothermicError):
    pass


class NotClosed(IsothermicError):
    pass


class UmbilicZero(IsothermicError):
    pass


class CoincidentSurfaces(IsothermicError):
    pass


class NotCCL(IsothermicError):
    pass


class NonFlatNormalBundle(IsothermicError):
    pass


class InconsistentData(IsothermicError):
    pass


class InvalidParams(IsothermicError):
    pass


# transforms
class InvalidParameter(IsothermicError):
    pass


class SeedSingular(IsothermicError):
    pass


class AllSingular(IsothermicError):
    pass


class IntegrationDiverged(IsothermicError):
    pass


class DegenerateDenominator(IsothermicError):
    pass


class NotUnitNormal(IsothermicError):
    pass


class InsufficientSamples(IsothermicError):
    pass


# loop group
class InvalidAlpha(IsothermicError):
    pass


class NullSeed(IsothermicError):
    pass


class PoleEvaluation(IsothermicError):
    pass


class OutOfChart(IsothermicError):
    pass


class MissingAlphaSample(IsothermicError):
    pass


class OmegaDegenerate(IsothermicError):
    pass


class EqualParameters(IsothermicError):
    pass


class DegenerateLine(IsothermicError):
    pass


# cli
class SpecInvalid(IsothermicError):
    pass


class BadAxes(IsothermicError):
    pass
