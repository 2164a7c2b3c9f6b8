"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An input broke a documented precondition (bad dimension, unknown id, ...)."""


class SimulationDiverged(RuntimeError):
    """The integrator produced a non-finite state."""

    def __init__(self, step_index: int, message: str = "simulation diverged"):
        super().__init__(f"{message} at step {step_index}")
        self.step_index = step_index


class ConfigError(ValueError):
    """A configuration file or override could not be resolved."""
