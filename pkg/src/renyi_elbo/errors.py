"""Exception types raised across the package."""


class RenyiElboError(ValueError):
    """Base class for invalid inputs."""


class InvalidOrderError(RenyiElboError):
    pass


class InvalidDistributionError(RenyiElboError):
    pass


class DimensionError(RenyiElboError):
    pass


class InfeasibleOrderError(RenyiElboError):
    """The order-weighted covariance combination is not positive definite."""


class DegenerateModelError(RenyiElboError):
    pass
