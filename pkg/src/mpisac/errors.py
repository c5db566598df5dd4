"""Exception types shared across the toolkit."""


class MpisacError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(MpisacError):
    """Invalid or inconsistent experiment configuration."""


class DuplicateTap(MpisacError):
    """Two propagation routes collapsed onto the same (delay, Doppler) tap pair.

    The scene violates the distinguishable-path assumption at this grid
    resolution; use a finer grid or move the scatterers.
    """


class NonOrthogonalPaths(MpisacError):
    """Path steering vectors are not numerically orthogonal.

    Raised when the tap configuration breaks the orthogonality the compact
    detector relies on (e.g. two paths sharing a Doppler tap).
    """


class DegenerateDenominator(MpisacError):
    """The echo frame lies entirely in the signal subspace."""


class InsufficientTrials(MpisacError):
    """Too few Monte Carlo trials to estimate the requested quantile."""


class ZeroChannel(MpisacError):
    """A communication subcarrier has zero gain; the SNR floor is unsatisfiable."""


class Infeasible(MpisacError):
    """The comm-SNR floors alone exceed the transmit power budget."""


class ZeroSignal(MpisacError):
    """All per-path signal energies vanish; weights are undefined."""
