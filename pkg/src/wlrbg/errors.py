class WlrbgError(Exception):
    exit_code = 1


class ConfigError(WlrbgError, ValueError):
    exit_code = 2


class DataError(WlrbgError, ValueError):
    exit_code = 3


class SolverError(WlrbgError, RuntimeError):
    exit_code = 4


class InfeasibleProblemError(SolverError):
    pass
