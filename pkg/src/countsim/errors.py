"""Exception types shared across the toolkit."""


class ConfigurationError(ValueError):
    """A model or experiment was built from inconsistent parameters."""


class StationarityError(ValueError):
    """An operation required a stability condition that does not hold."""


class DivergenceError(RuntimeError):
    """A simulated trajectory left the numerically representable range.

    ``time_index`` is the step at which the blow-up was detected, when known.
    """

    def __init__(self, message: str, time_index: int | None = None):
        super().__init__(message)
        self.time_index = time_index

    def __str__(self) -> str:
        base = super().__str__()
        if self.time_index is not None:
            return f"{base} (at time index {self.time_index})"
        return base
