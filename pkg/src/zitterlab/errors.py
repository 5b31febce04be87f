"""Exception hierarchy shared by all zitterlab modules."""


class ZitterlabError(Exception):
    """Base class for every error raised by this package."""


class NonFiniteVelocity(ZitterlabError):
    """A velocity program or field produced a NaN/inf value."""


class EpsilonUnderflow(ZitterlabError):
    """De Broglie epsilon refresh fell below the configured floor."""


class MisalignedCycle(ZitterlabError):
    """Cycle observables were asked for a window not starting at n = 4q."""


class PacketTooNarrow(ZitterlabError):
    """Initial packet width is below the resolvable minimum (4 grid spacings)."""


class PacketTouchesBoundary(ZitterlabError):
    """Initial packet carries more than 1e-12 probability mass outside the box."""


class ResolutionLoss(ZitterlabError):
    """High-wavenumber spectral mass exceeds the aliasing guard threshold."""


class NodeRegion(ZitterlabError):
    """A velocity query touched grid cells masked as wave-function nodes."""


class LeftDomain(ZitterlabError):
    """A trajectory position left the periodic box."""


class EnsembleFailure(ZitterlabError):
    """Too many ensemble trajectories terminated early."""


class ConfigError(ZitterlabError):
    """Base class for scenario-configuration problems (CLI exit code 2)."""


class UnknownField(ConfigError):
    """Config contains a key that no scenario understands."""


class UnknownScenario(ConfigError):
    """Config names a scenario outside the supported catalog."""


class OutOfRange(ConfigError):
    """Config value is outside its legal range."""


class MissingRequired(ConfigError):
    """Config omits a required key."""
