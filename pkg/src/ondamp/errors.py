"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid or inconsistent configuration value."""


class SingularityError(ArithmeticError):
    """Raw OND law evaluated on the x2-axis (x1 = 0, x2 != 0)."""

    def __init__(self, x1, x2):
        super().__init__(f"raw OND law is singular at state (x1={x1!r}, x2={x2!r})")
        self.state = (x1, x2)


class SimulationAborted(RuntimeError):
    """Non-finite state encountered; carries the trace recorded so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class SettlingTimeout(RuntimeError):
    """Run did not reach the settle condition within its horizon."""

    def __init__(self, message, terminal_x1, trace=None):
        super().__init__(message)
        self.terminal_x1 = terminal_x1
        self.trace = trace


class InstabilityError(RuntimeError):
    """Identification loop output left the allowed excursion band."""


class OutOfRangeError(ValueError):
    """Requested crossover or margin lies outside the available range."""


class DegenerateDataError(ValueError):
    """Not enough usable frequency-response points for a fit."""
