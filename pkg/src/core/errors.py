from __future__ import annotations


class SimulationError(Exception):
    """Base class for simulator failures.

    Attributes:
        code: stable machine-readable error code ('sim.<kind>')
        field: dotted config/parameter path the error refers to, when known
    """

    code = "sim.error"

    def __init__(self, message: str, *, field: str | None = None):
        super().__init__(message)
        self.field = field


class ParameterError(SimulationError):
    code = "sim.parameter_error"


class ConfigurationError(SimulationError):
    """Raised for invalid or incomplete configuration.

    `line`/`column` are set when the failure comes from parsing the config file.
    """

    code = "sim.configuration_error"

    def __init__(
        self,
        message: str,
        *,
        field: str | None = None,
        line: int | None = None,
        column: int | None = None,
    ):
        super().__init__(message, field=field)
        self.line = line
        self.column = column


class DegenerateGeometryError(SimulationError):
    code = "sim.degenerate_geometry"


class TierMissingError(SimulationError):
    code = "sim.tier_missing"


class LinkClassificationError(SimulationError):
    code = "sim.link_classification"


class ConsistencyError(SimulationError):
    code = "sim.consistency_error"
