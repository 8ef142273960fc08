class ZenoError(Exception):
    """Base class for simulator failures."""

    exit_code = 4


class ConfigError(ZenoError, ValueError):
    exit_code = 2


class TruncationError(ZenoError):
    """Fock truncation did not converge below the hard ceiling."""

    exit_code = 3

    def __init__(self, message: str, n_max: int, top_population: float):
        super().__init__(message)
        self.n_max = n_max
        self.top_population = top_population


class IntegratorError(ZenoError):
    """Non-finite values appeared during propagation."""

    exit_code = 4
