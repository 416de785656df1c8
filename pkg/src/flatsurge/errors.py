"""Exception hierarchy shared by all modules."""


class FlatSurgeError(Exception):
    """Base class for every error raised by the package."""


class InvalidSurface(FlatSurgeError):
    pass


class TriangleNotClosed(InvalidSurface):
    pass


class GluingMismatch(InvalidSurface):
    pass


class DegenerateTriangle(InvalidSurface):
    pass


class BadConeAngle(InvalidSurface):
    pass


class NotRealizable(FlatSurgeError):
    pass


class BudgetExceeded(FlatSurgeError):
    pass


# surgery
class SurgeryError(FlatSurgeError):
    pass


class NotPermissible(SurgeryError):
    pass


class WrongOrder(SurgeryError):
    pass


class HasCylinder(SurgeryError):
    pass


class MultiplicityAboveOne(SurgeryError):
    pass


class BadAngleSplit(SurgeryError):
    pass


class Degeneration(SurgeryError):
    pass


class FlipLimit(SurgeryError):
    pass


class LengthMismatch(SurgeryError):
    pass


class NotParallel(SurgeryError):
    pass


class RayObstructed(SurgeryError):
    pass


class LociIntersect(SurgeryError):
    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


# sampler / stats / cli
class UnknownStratum(FlatSurgeError):
    pass


class RejectionBudget(FlatSurgeError):
    pass


class InsufficientSamples(FlatSurgeError):
    pass


class ConfigInvalid(FlatSurgeError):
    pass
