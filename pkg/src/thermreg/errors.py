"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain of a model equation."""


class ThermalRunaway(RuntimeError):
    """Leakage/temperature feedback outran the chip's ability to dissipate heat."""

    def __init__(self, message: str, core: int | None = None) -> None:
        super().__init__(message)
        self.core = core


class RunawayProximityError(ThermalRunaway):
    """The leakage feedback loop gain reached 1 at the measured operating point."""


class SingularGainError(ArithmeticError):
    """The plant derivative (or Jacobian) cannot be inverted into a gain."""


class CalibrationError(RuntimeError):
    pass


class FitError(CalibrationError):
    pass


class ConfigError(ValueError):
    pass


class ScenarioError(ConfigError):
    """Scenario text failed validation. ``line`` is 1-based, or None for whole-file issues."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
