"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid grid, parameter or experiment configuration."""


class NumericalError(ArithmeticError):
    """Non-finite values appeared in a computation."""


class BlowUpError(NumericalError):
    """A time stepper produced non-finite values.

    ``time`` is the last time at which the state was still finite.
    """

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.6g})")
        self.time = time


class InterpolationRefusedError(LookupError):
    """A profile was requested at a time that was not solved for exactly."""


class TailCheckError(ConfigurationError):
    """Generated data does not decay to the domain boundary."""
