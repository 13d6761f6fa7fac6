"""Exception hierarchy.

Every failure raised by the package derives from :class:`PolystabError` and
carries a short machine-readable ``code`` (the class name) plus an exit code
used by the command line interface.
"""


class PolystabError(Exception):
    exit_code = 2

    @property
    def code(self):
        return type(self).__name__


class ValidationError(PolystabError):
    """Input geometry or configuration rejected."""

    exit_code = 1


class NumericalError(PolystabError):
    """A numerical procedure failed to deliver its postcondition."""

    exit_code = 2


# geometry
class NonManifold(ValidationError):
    pass


class NonPlanarFace(ValidationError):
    pass


class WrongEuler(ValidationError):
    pass


class ResolutionTooCoarse(ValidationError):
    pass


class CountMismatch(ValidationError):
    pass


class AmbiguousMatch(ValidationError):
    pass


# deformation
class InadmissibleFace(ValidationError):
    pass


class CollarMismatch(ValidationError):
    pass


class NotContractive(ValidationError):
    pass


# fem
class FeatureUnderResolved(ValidationError):
    pass


class NoConvergence(NumericalError):
    pass


class MeshMismatch(ValidationError):
    pass


class SourceTooClose(ValidationError):
    pass


# dtn
class BasisMismatch(ValidationError):
    pass


class SingularPoint(ValidationError):
    pass


class TraceNotCompact(NumericalError):
    pass


# shape calculus and harness
class EdgeCollarTooWide(ValidationError):
    pass


class DescentStalled(NumericalError):
    pass


class InadmissibleIterate(NumericalError):
    pass
