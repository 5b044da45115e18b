"""Exception types shared across the package."""


class NetabError(Exception):
    """Base class for every error raised by netab."""


class GraphParseError(NetabError, ValueError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ValidationError(NetabError, ValueError):
    """Invalid parameters or inputs (bad sigma, length mismatch, ...)."""


class ConfigError(ValidationError):
    pass


class EstimationError(NetabError):
    """An estimator could not produce an estimate for the given data."""


class SingularDesignError(EstimationError):
    def __init__(self, message, column=None):
        self.column = column
        super().__init__(message)


class EmptyExposureClassError(EstimationError):
    def __init__(self, n_c1, n_c0, message=None):
        self.n_c1 = n_c1
        self.n_c0 = n_c0
        if message is None:
            message = f"empty exposure class: |C1|={n_c1}, |C0|={n_c0}"
        super().__init__(message)


class SingleClassResponseError(EstimationError):
    pass


class SeparationWarning(UserWarning):
    pass


class RealismWarning(UserWarning):
    pass
