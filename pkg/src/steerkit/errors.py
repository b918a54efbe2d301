"""Exception hierarchy. CLI exit codes are attached to each class."""


class SteerkitError(Exception):
    exit_code = 1


class NonHermitian(SteerkitError, ValueError):
    exit_code = 10


class NoConvergence(SteerkitError, ArithmeticError):
    exit_code = 11


class NearSingular(SteerkitError, ArithmeticError):
    exit_code = 12


class InvalidState(SteerkitError, ValueError):
    exit_code = 13


class ParamOutOfRange(SteerkitError, ValueError):
    exit_code = 14


class DegenerateSpectrum(SteerkitError, ArithmeticError):
    exit_code = 15


class TooManySettings(SteerkitError, ValueError):
    exit_code = 16


class SolverStalled(SteerkitError, RuntimeError):
    exit_code = 17


class ShapeMismatch(SteerkitError, ValueError):
    exit_code = 18


class FilterSingular(NearSingular):
    exit_code = 19


class ClassGenerationFailed(SteerkitError, RuntimeError):
    exit_code = 20


class SchemaMismatch(SteerkitError, ValueError):
    exit_code = 21


class ChecksumMismatch(SteerkitError, ValueError):
    exit_code = 22


class DegenerateData(SteerkitError, ValueError):
    exit_code = 23


class DivergedLoss(SteerkitError, ArithmeticError):
    exit_code = 24


class AllStagesRejected(SteerkitError, RuntimeError):
    exit_code = 25


class FeatureKindMismatch(SteerkitError, ValueError):
    exit_code = 26


class NoFlipFound(SteerkitError, RuntimeError):
    exit_code = 27


class ConfigInvalid(SteerkitError, ValueError):
    exit_code = 2


class InputMissing(SteerkitError, FileNotFoundError):
    exit_code = 3
