"""Exception hierarchy shared by every module."""


class ProppError(ValueError):
    """Base class for all library errors."""


# groups
class NotAssociative(ProppError):
    pass


class NotPPower(ProppError):
    pass


class BadIdentity(ProppError):
    pass


class NotASubgroup(ProppError):
    pass


class NotAHomomorphism(ProppError):
    pass


class UnreducedWord(ProppError):
    pass


class TrivialWord(ProppError):
    pass


class TrivialSubgroup(ProppError):
    pass


# gog
class Disconnected(ProppError):
    pass


class NonInjectiveAttachment(ProppError):
    pass


class PrimeMismatch(ProppError):
    pass


class NotSpanningTree(ProppError):
    pass


class NotConnected(ProppError):
    pass


class EdgeGroupNotElliptic(ProppError):
    pass


# bass_serre
class UnsupportedCosetTest(ProppError):
    pass


class BudgetExceeded(ProppError):
    pass


class NotInBall(ProppError):
    pass


class NotFinite(ProppError):
    pass


# cylinders
class NotAdmissible(ProppError):
    pass


class UnsupportedRelation(ProppError):
    pass


class ConjugacyUndecided(ProppError):
    pass


class NotOneEdge(ProppError):
    pass


# homology
class TrivialEdgeWord(ProppError):
    pass


class NotStar(ProppError):
    pass


class NonFreeVertex(ProppError):
    pass


class NotTree(ProppError):
    pass


class NoSuchVertex(ProppError):
    pass


class NotOneLoop(ProppError):
    pass


class NotFree(ProppError):
    pass


# jsj
class IncompatiblePresentations(ProppError):
    pass


class InfiniteVertexGroup(ProppError):
    pass


class NotReduced(ProppError):
    pass


class NotFictitious(ProppError):
    pass


class BadExpansion(ProppError):
    pass


# cli
class SchemaError(ProppError):
    pass


class ValidationError(ProppError):
    """A parsed input that fails a module-level check; ``cause`` holds the original error."""

    def __init__(self, cause):
        self.cause = cause
        super().__init__(f"{type(cause).__name__}: {cause}")
