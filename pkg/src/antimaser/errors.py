class DomainError(ValueError):
    """An input lies outside the physical domain of an operation."""


class ConfigError(ValueError):
    """A configuration block or chain netlist is malformed."""


class SolverError(RuntimeError):
    """A numerical solver could not produce a result."""


class InfeasibleMeasurementError(SolverError):
    """No cavity temperature in the search bracket reproduces the measurement."""
