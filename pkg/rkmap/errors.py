"""Exceptions raised by rkmap services.

Every error carries a human-readable ``detail`` and the process ``exit_code`` the CLI maps it to.
"""

from typing import Any, Optional


class RkMapError(Exception):
  """Base class for all rkmap errors."""

  exit_code: int = 2

  def __init__(self, detail: str):
    super().__init__(detail)
    self.detail = detail


class InvalidArgumentError(RkMapError, ValueError):
  """An argument violates an operation's precondition."""


class EmptyResultError(RkMapError):
  """An operation would produce an empty result (e.g. crop without intersection)."""


class InsufficientDataError(RkMapError):
  """Not enough samples or populated bins to carry out the computation."""


class FitConvergenceError(RkMapError):
  """The variogram optimizer failed within its budget."""

  def __init__(self, detail: str, best_so_far: Optional[Any] = None):
    super().__init__(detail)
    self.best_so_far = best_so_far


class EmptyNeighborhoodError(RkMapError):
  """No samples fall in the kriging neighborhood of a target."""


class SingularSystemError(RkMapError):
  """The kriging or covariance system stays singular after jitter escalation."""

  def __init__(self, detail: str, condition: float = float('inf')):
    super().__init__(detail)
    self.condition = condition


class DuplicateSampleError(RkMapError):
  """Two samples share a position under the strict duplicate policy."""


class PeriodicityError(RkMapError):
  """The semivariogram cannot support a periodicity score."""

  def __init__(self, detail: str, missing_lags: Optional[list[float]] = None):
    super().__init__(detail)
    self.missing_lags = missing_lags or []


class EmptyOverlapError(RkMapError):
  """Predicted and reference data share no valid cell."""


class PipelineError(RkMapError):
  """A residual-kriging run failed for a site."""

  def __init__(self, detail: str, site: Optional[str] = None):
    super().__init__(f'[{site}] {detail}' if site else detail)
    self.site = site


class FormatError(RkMapError):
  """An input file does not match its declared format."""

  def __init__(self, detail: str, path: Optional[str] = None, line: Optional[int] = None):
    location = path or '<input>'
    if line is not None:
      location = f'{location}:{line}'
    super().__init__(f'{location}: {detail}')
    self.path = path
    self.line = line


class ConfigError(RkMapError):
  """A run configuration is invalid."""

  exit_code = 1

  def __init__(self, detail: str, key: Optional[str] = None):
    super().__init__(detail)
    self.key = key
