"""Exception types.

Every error carries a short machine-readable ``code`` which the CLI prints
as ``code=<code>``.
"""


class TsunamiSenseError(Exception):
    code = "error"

    def __init__(self, detail="", code=None):
        super().__init__(detail)
        if code is not None:
            self.code = code
        self.detail = detail


class SensorOnLandError(TsunamiSenseError):
    code = "sensor-on-land"


class OnLandError(TsunamiSenseError):
    code = "on-land"


class OffGridError(TsunamiSenseError):
    code = "off-grid"


class NoWetPathError(TsunamiSenseError):
    code = "no-wet-path"


class BlowUpError(TsunamiSenseError):
    code = "blow-up"


class NoObservationsError(TsunamiSenseError):
    code = "no-observations"


class NonFiniteGradientError(TsunamiSenseError):
    code = "non-finite-gradient"


class DivergenceError(TsunamiSenseError):
    code = "divergence"


class NoSignalError(TsunamiSenseError):
    code = "no-signal"


class AntipodalError(TsunamiSenseError):
    code = "antipodal"


class GridMismatchError(TsunamiSenseError):
    code = "grid-mismatch"


class MissingVelocityError(TsunamiSenseError):
    code = "missing-velocity"


class ConfigError(TsunamiSenseError):
    code = "bad-config"
