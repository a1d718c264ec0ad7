"""Exception hierarchy shared by every module.

Each error carries the CLI exit code it maps to.
"""


class ZeroEventError(Exception):
    exit_code = 3


class ConfigError(ZeroEventError):
    exit_code = 2


class DataError(ZeroEventError):
    exit_code = 3


class EmptySource(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class EmptyModel(DataError):
    pass


class EmptyInput(DataError):
    pass


class EmptyCollection(DataError):
    pass


class EmptyList(DataError):
    pass


class EmptyBackground(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class IdMismatch(DataError):
    pass


class SingleClass(DataError):
    pass


class InsufficientSamples(DataError):
    pass


class InsufficientEvents(DataError):
    pass


class MissingInput(DataError):
    pass


class NoPositives(DataError):
    pass


class AllUndefined(DataError):
    pass


class ZeroVector(DataError):
    pass


class NonConvergence(ZeroEventError):
    exit_code = 4

    def __init__(self, message, kkt_violation=None):
        super().__init__(message)
        self.kkt_violation = kkt_violation
