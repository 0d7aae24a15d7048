"""Exception types shared across the pipeline."""


class SfnetError(Exception):
    """Base class for all library errors."""

    #: short machine-readable error kind, used in CLI error JSON
    kind = "Error"


class InputError(SfnetError):
    """Bad or missing input data; maps to CLI exit code 2."""

    kind = "InputError"


class NumericalError(SfnetError):
    """Numerical failure; maps to CLI exit code 3."""

    kind = "NumericalError"


# --- ingest ---------------------------------------------------------------

class MissingColumn(InputError):
    kind = "MissingColumn"

    def __init__(self, name):
        super().__init__(f"missing required column: {name}")
        self.name = name


class EmptyFile(InputError):
    kind = "EmptyFile"


class MalformedRow(InputError):
    """A single rejected row. Usually collected in a report, not raised."""

    kind = "MalformedRow"

    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class UnsortedCalls(InputError):
    kind = "UnsortedCalls"

    def __init__(self, vessel_id):
        super().__init__(f"port calls for vessel {vessel_id!r} are not sorted by date")
        self.vessel_id = vessel_id


class InvalidSpec(InputError):
    kind = "InvalidSpec"


# --- ballast --------------------------------------------------------------

class InsufficientData(InputError):
    kind = "InsufficientData"


class DegenerateDWT(InputError):
    kind = "DegenerateDWT"


# --- sfn / mapeq ----------------------------------------------------------

class OutOfRange(InputError):
    kind = "OutOfRange"


class EmptyNetwork(InputError):
    kind = "EmptyNetwork"


class NoConvergence(NumericalError):
    """Power iteration did not reach tolerance; carries the best iterate."""

    kind = "NoConvergence"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class IncompletePartition(InputError):
    kind = "IncompletePartition"


# --- analytics ------------------------------------------------------------

class PartitionMismatch(InputError):
    kind = "PartitionMismatch"


class TooFewPeriods(InputError):
    kind = "TooFewPeriods"


# --- risk -----------------------------------------------------------------

class MissingEcoregion(InputError):
    kind = "MissingEcoregion"

    def __init__(self, port_id):
        super().__init__(f"port {port_id!r} has no ecoregion assignment")
        self.port_id = port_id


class MissingEnvironment(InputError):
    kind = "MissingEnvironment"

    def __init__(self, port_id):
        super().__init__(f"port {port_id!r} lacks temperature or salinity")
        self.port_id = port_id


# --- cli ------------------------------------------------------------------

class ConfigError(InputError):
    kind = "ConfigError"


class MissingInput(InputError):
    kind = "MissingInput"
