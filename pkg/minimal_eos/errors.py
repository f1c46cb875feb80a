"""errors raised by the simulation, verification and harness layers"""


class EosError(Exception):
    """base class of every error raised by minimal_eos"""


class ConfigError(ValueError, EosError):
    """invalid model or run configuration"""

    def __init__(self, message, missing_keys=None):
        super().__init__(message)
        self.missing_keys = list(missing_keys or [])


class PreconditionError(ValueError, EosError):
    """an operation was called on a state outside its domain"""


class DivergedError(EosError):
    """a run produced a non-finite or runaway state

    `last_state` is the last finite state, `step` the index at which the run
    stopped and `partial` the trajectory built so far (when there is one).
    """

    def __init__(self, message, last_state=None, step=None, partial=None):
        super().__init__(message)
        self.last_state = last_state
        self.step = step
        self.partial = partial


class NotConvergedError(EosError):
    """gradient flow integration exhausted its step budget

    `partial` holds the samples taken so far when the integrator records them.
    """

    def __init__(self, message, terminal_state=None, steps=None, partial=None):
        super().__init__(message)
        self.terminal_state = terminal_state
        self.steps = steps
        self.partial = partial


class EmptyRegionError(EosError):
    """a sampler could not produce a member of its region"""
