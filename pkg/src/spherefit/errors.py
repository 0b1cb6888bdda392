"""Exception and warning types raised across the package."""


class SphereFitError(Exception):
    pass


class AntipodalCollision(SphereFitError):
    """A node and its antipode are both already present."""


class NotAntipodal(SphereFitError):
    """An operation needing antipodal pairing got an unpaired node set."""


class ParseError(SphereFitError, ValueError):
    pass


class OffSphereError(SphereFitError, ValueError):
    """A loaded point is further than the accepted tolerance from the unit sphere."""


class RankDeficient(SphereFitError):
    pass


class SingularKKT(SphereFitError):
    pass


class NotUnisolvent(SphereFitError):
    pass


class RankWarning(UserWarning):
    """A rank condition fails at the configured relative threshold (non-fatal)."""
