class QctlError(Exception):
  """Base class of every error raised by qctl."""


class InvalidInputError(QctlError, ValueError):
  """An argument violates a shape, range or tolerance contract."""


class UndefinedAngleError(InvalidInputError):
  pass


class WrongObjectiveError(InvalidInputError):
  pass


class ConfigError(InvalidInputError):
  """A job config is malformed; ``field`` names the offending key."""

  def __init__(self, field: str, message: str):
    super().__init__(f"{field}: {message}")
    self.field = field


class IntegrationError(QctlError, RuntimeError):
  """Deterministic integration drifted out of tolerance (step too large)."""


class TrajectoryError(IntegrationError):
  """A conditional state lost its trace during stochastic integration."""


class IndeterminateSyndromeError(QctlError):
  """The state is a superposition of several syndrome sectors."""


class UncorrectableError(QctlError):
  """The syndrome is not produced by any single-qubit error."""
