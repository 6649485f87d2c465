"""Pydantic models for empirical semivariograms and parametric variogram models."""

import math
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

DEFAULT_BIN_WIDTH = 100.0
DEFAULT_MAX_LAG = 10_000.0
DEFAULT_TOLERANCE_DEG = 1.0


class LagBin(BaseModel):
  """One distance class of an empirical semivariogram."""

  lag_lo: float = Field(..., ge=0)
  lag_hi: float
  semivariance: Optional[float] = Field(None, description='Undefined when the bin has no pairs')
  pair_count: int = Field(0, ge=0)

  model_config = {'frozen': True}

  @model_validator(mode='after')
  def _consistent(self) -> 'LagBin':
    if not self.lag_lo < self.lag_hi:
      raise ValueError(f'empty lag interval [{self.lag_lo}, {self.lag_hi})')
    if self.pair_count == 0 and self.semivariance is not None:
      raise ValueError('an empty bin cannot carry a semivariance')
    if self.pair_count > 0 and (self.semivariance is None or self.semivariance < 0):
      raise ValueError(f'populated bin needs a semivariance >= 0, got {self.semivariance}')
    return self

  @property
  def lag_center(self) -> float:
    return 0.5 * (self.lag_lo + self.lag_hi)

  @property
  def populated(self) -> bool:
    return self.pair_count > 0


class Direction(BaseModel):
  """Direction filter of a directional semivariogram."""

  azimuth_deg: float = Field(..., description='Degrees clockwise from north')
  tolerance_deg: float = Field(..., gt=0, le=90)

  model_config = {'frozen': True}


class EmpiricalSemivariogram(BaseModel):
  """Binned semivariance table, optionally restricted to one direction."""

  bins: List[LagBin]
  bin_width: float = Field(..., gt=0)
  max_lag: float = Field(..., gt=0)
  direction: Optional[Direction] = None
  coincident_pairs: int = Field(0, ge=0, description='Pairs at zero distance, excluded from bins')

  model_config = {'frozen': True}

  @model_validator(mode='after')
  def _contiguous(self) -> 'EmpiricalSemivariogram':
    if not self.bins:
      raise ValueError('a semivariogram needs at least one bin')
    if self.bins[0].lag_lo != 0.0:
      raise ValueError('bins must start at lag 0')
    for previous, current in zip(self.bins, self.bins[1:]):
      if current.lag_lo != previous.lag_hi:
        raise ValueError(f'bins are not contiguous at lag {current.lag_lo}')
    if not math.isclose(self.bins[-1].lag_hi, self.max_lag, rel_tol=1e-12, abs_tol=1e-9):
      raise ValueError(f'bins end at {self.bins[-1].lag_hi}, expected max_lag {self.max_lag}')
    return self

  @property
  def populated(self) -> List[LagBin]:
    return [b for b in self.bins if b.populated]

  def bin_index(self, lag: float) -> Optional[int]:
    """Index of the bin containing ``lag``, or None beyond max_lag."""
    if lag < 0 or lag >= self.max_lag:
      return None
    return min(int(math.floor(lag / self.bin_width)), len(self.bins) - 1)

  def same_grid(self, other: 'EmpiricalSemivariogram') -> bool:
    return (
      self.bin_width == other.bin_width
      and self.max_lag == other.max_lag
      and len(self.bins) == len(other.bins)
    )


class PeriodicityScore(BaseModel):
  """Strength of semivariance peaks at multiples of a period."""

  period: float
  score: float = Field(..., ge=0)
  peak_lags: List[float] = Field(default_factory=list)
  ratios: List[float] = Field(default_factory=list, description='Peak/baseline ratio per multiple')

  model_config = {'frozen': True}


class VariogramKind(str, Enum):
  """Closed-form variogram families."""

  EXPONENTIAL = 'exponential'
  SPHERICAL = 'spherical'
  GAUSSIAN = 'gaussian'
  LINEAR = 'linear'
  CIRCULAR = 'circular'


class Weighting(str, Enum):
  """Least-squares weights of the bins."""

  UNIFORM = 'uniform'
  PAIR_COUNT = 'pair_count'


class VariogramModel(BaseModel):
  """Isotropic variogram with total sill and practical range."""

  kind: VariogramKind
  nugget: float = Field(..., ge=0)
  sill: float = Field(..., ge=0)
  range: float = Field(..., gt=0)

  model_config = {'frozen': True}

  @model_validator(mode='after')
  def _sill_above_nugget(self) -> 'VariogramModel':
    if self.sill < self.nugget:
      raise ValueError(f'sill {self.sill} is below nugget {self.nugget}')
    return self

  @property
  def partial_sill(self) -> float:
    return self.sill - self.nugget

  def scaled(self, factor: float) -> 'VariogramModel':
    """Same shape with nugget and sill multiplied by ``factor``."""
    return self.model_copy(update={'nugget': self.nugget * factor, 'sill': self.sill * factor})


class FitResult(BaseModel):
  """Outcome of a least-squares variogram fit."""

  model: VariogramModel
  r_squared: float = Field(..., le=1.0)
  residual_sum_squares: float = Field(..., ge=0)
  bins_used: int = Field(..., ge=3)
  degenerate: bool = False

  model_config = {'frozen': True}
