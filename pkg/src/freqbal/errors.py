class ConfigError(Exception):
    """Invalid run configuration (CLI exit code 2)."""


class NumericError(Exception):
    """Non-finite values encountered mid-run (CLI exit code 3).

    Carries the partial training trace, if any, so the caller can flush
    it for diagnosis before exiting.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
