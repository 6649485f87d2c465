"""Pydantic models for accuracy metrics."""

import math
from typing import List, Optional

from pydantic import BaseModel, Field, model_validator


class MetricSet(BaseModel):
  """Bias, RMSE and relative RMSE over a set of errors (predicted - reference)."""

  n: int = Field(..., ge=0)
  bias: Optional[float] = None
  rmse: Optional[float] = None
  rrmse: Optional[float] = Field(None, description='Undefined when the reference mean is 0')

  model_config = {'frozen': True}

  @model_validator(mode='after')
  def _rmse_bounds_bias(self) -> 'MetricSet':
    if self.n == 0:
      if self.bias is not None or self.rmse is not None:
        raise ValueError('metrics over zero cells must be undefined')
      return self
    if self.bias is None or self.rmse is None:
      raise ValueError('bias and rmse are required when n > 0')
    if self.rmse < abs(self.bias) and not math.isclose(self.rmse, abs(self.bias), rel_tol=1e-9):
      raise ValueError(f'rmse {self.rmse} below |bias| {abs(self.bias)}')
    return self

  @property
  def defined(self) -> bool:
    return self.n > 0


class ProximityRow(BaseModel):
  """Metrics over cells within ``radius`` of a sample (inf: all valid cells)."""

  radius: float = Field(..., ge=0)
  metrics: MetricSet

  model_config = {'frozen': True}

  @property
  def flagged(self) -> bool:
    return not self.metrics.defined


class ProximityReport(BaseModel):
  """Metrics stratified by distance to the nearest sample."""

  rows: List[ProximityRow]

  model_config = {'frozen': True}

  @model_validator(mode='after')
  def _increasing(self) -> 'ProximityReport':
    for previous, current in zip(self.rows, self.rows[1:]):
      if not current.radius > previous.radius:
        raise ValueError('proximity radii must be strictly increasing')
      if current.metrics.n < previous.metrics.n:
        raise ValueError('qualifying cell counts must not shrink with radius')
    return self
