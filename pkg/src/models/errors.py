"""Error hierarchy shared by every layer of the simulator."""


class CVPVError(Exception):
    """Base class for all simulator errors."""


class CausalityViolation(CVPVError):
    pass


class UnknownEvent(CVPVError, KeyError):
    pass


class UnknownParty(CVPVError, KeyError):
    pass


class LengthMismatch(CVPVError, ValueError):
    pass


class SeedTooShort(CVPVError, ValueError):
    pass


class TooManyQubits(CVPVError, ValueError):
    pass


class DimensionMismatch(CVPVError, ValueError):
    pass


class IndexOutOfRange(CVPVError, IndexError):
    pass


class NoTestRounds(CVPVError):
    """Raised when a transcript drew zero test rounds (t = 0)."""


class UnknownKind(CVPVError, ValueError):
    pass


class ConfigInvalid(CVPVError, ValueError):
    pass


class CommModeViolation(CVPVError):
    pass


class EmptyString(CVPVError, ValueError):
    pass


class EmptyAcceptanceSet(CVPVError, ValueError):
    pass


class DomainError(CVPVError, ValueError):
    pass


class ConfigParseError(CVPVError):
    exit_code = 2


class SimulationPanic(CVPVError):
    exit_code = 3
