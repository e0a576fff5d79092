"""Exception hierarchy shared by all morphforge modules."""


class MorphforgeError(Exception):
    """Base class for every error raised by this package."""


# inertia
class InertiaError(MorphforgeError, ValueError):
    pass


class NonSymmetric(InertiaError):
    pass


class ZeroMass(InertiaError):
    pass


class NotPositiveDefinite(InertiaError):
    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class NotUpperTriangular(InertiaError):
    pass


class NonPositiveDiagonal(InertiaError):
    pass


# robot_model
class RobotModelError(MorphforgeError, ValueError):
    pass


class MalformedDocument(RobotModelError):
    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (line {position[0]}, column {position[1]})"
        super().__init__(message)
        self.position = position


class DanglingReference(RobotModelError):
    pass


class CyclicTree(RobotModelError):
    pass


class MissingInertia(RobotModelError):
    pass


class InconsistentLink(RobotModelError):
    def __init__(self, message, link=None):
        super().__init__(message)
        self.link = link


# randomizer
class RandomizerError(MorphforgeError, ValueError):
    pass


class UnknownGroup(RandomizerError):
    pass


class InconsistentTemplate(RandomizerError):
    pass


class ZeroReferenceMass(RandomizerError):
    pass


class ConfigError(RandomizerError):
    pass


# canonical
class CanonicalError(MorphforgeError, ValueError):
    pass


class UnmappedJoint(CanonicalError):
    def __init__(self, name, suggestions=()):
        self.name = name
        self.suggestions = list(suggestions)
        msg = f"joint {name!r} has no canonical alias"
        if self.suggestions:
            msg += f"; did you mean: {', '.join(self.suggestions)}"
        super().__init__(msg)


class DuplicateSlot(CanonicalError):
    pass


class LengthMismatch(CanonicalError):
    pass


class DisconnectedGraph(CanonicalError):
    pass


class CycleDetected(CanonicalError):
    pass


# encoder / rewards
class ShapeMismatch(MorphforgeError, ValueError):
    pass


class WrongHistoryLength(MorphforgeError, ValueError):
    pass


class InvalidStanceRatio(MorphforgeError, ValueError):
    pass
