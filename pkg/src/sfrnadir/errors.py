"""Exception hierarchy shared by the model, solvers and CLI."""


class SfrError(Exception):
    """Base class for every error raised by sfrnadir."""


class InputError(SfrError, ValueError):
    """Invalid parameters or malformed input documents (CLI exit code 1)."""


class NonPositiveParameter(InputError):
    pass


class NoSynchronousGeneration(InputError):
    pass


class HeterogeneousStepTiming(InputError):
    pass


class StepTooLarge(InputError):
    pass


class RegimeError(SfrError):
    """The closed form does not apply to this system (CLI exit code 2)."""


class Overdamped(RegimeError):
    pass


class Undamped(RegimeError):
    pass


class NoDip(SfrError):
    """Frequency never falls below its initial value."""


class DegenerateAmplitude(SfrError):
    pass


class NonFinite(SfrError, ArithmeticError):
    def __init__(self, t: float):
        super().__init__(f"state became non-finite at t={t:.6g} s")
        self.t = t
