"""Exception types raised across the package."""


class AnosovLabError(Exception):
    """Base class for all package errors."""


class RadiusOutOfRange(AnosovLabError):
    def __init__(self, index, radius):
        super().__init__(f"obstacle {index}: radius {radius!r} not in (0, pi/2)")
        self.index = index
        self.radius = radius


class OverlappingObstacles(AnosovLabError):
    def __init__(self, i, j, distance, radii_sum):
        super().__init__(
            f"obstacles {i} and {j} overlap: center distance {distance:.12g} "
            f"<= r_i + r_j = {radii_sum:.12g}"
        )
        self.i = i
        self.j = j


class StartsInsideObstacle(AnosovLabError):
    pass


class ExactlyGrazing(AnosovLabError):
    pass


class GrazingJump(AnosovLabError):
    pass


class InfiniteHorizon(AnosovLabError):
    pass


class StepUnderflow(AnosovLabError):
    pass


class LeftDomain(AnosovLabError):
    pass


class DomainError(AnosovLabError):
    pass


class DeltaTooLarge(AnosovLabError):
    pass


class JunctionMismatch(AnosovLabError):
    pass


class EpsilonNotSmallEnough(AnosovLabError):
    pass


class NoDelta3(AnosovLabError):
    pass


class ConfigError(AnosovLabError):
    pass
