"""Pydantic models for the ordinary kriging solver."""

from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

AUTO_GLOBAL_LIMIT = 5000
AUTO_NEAREST_K = 64


class NeighborhoodKind(str, Enum):
  """Which samples enter each kriging system."""

  GLOBAL = 'global'
  NEAREST = 'nearest'
  AUTO = 'auto'  # global up to AUTO_GLOBAL_LIMIT samples, nearest beyond


class DuplicatePolicy(str, Enum):
  """Handling of samples sharing a position."""

  AVERAGE = 'average'
  ERROR = 'error'


class KrigingConfig(BaseModel):
  """Neighborhood search and numerical safeguards."""

  neighborhood: NeighborhoodKind = NeighborhoodKind.GLOBAL
  k: int = Field(AUTO_NEAREST_K, ge=1, description='Samples per system in nearest mode')
  max_radius: Optional[float] = Field(
    None, gt=0, description='Search radius in nearest mode; defaults to the model range'
  )
  duplicate_policy: DuplicatePolicy = DuplicatePolicy.AVERAGE
  jitter: float = Field(0.0, ge=0, description='Initial diagonal ridge in units of the sill')

  model_config = {'frozen': True}

  @model_validator(mode='after')
  def _nearest_needs_radius(self) -> 'KrigingConfig':
    if self.neighborhood == NeighborhoodKind.NEAREST and self.max_radius is None:
      raise ValueError('nearest neighborhood requires max_radius')
    return self

  @classmethod
  def nearest(cls, k: int, max_radius: float, **kwargs) -> 'KrigingConfig':
    return cls(neighborhood=NeighborhoodKind.NEAREST, k=k, max_radius=max_radius, **kwargs)


class KrigingSolution(BaseModel):
  """Weights and prediction of one ordinary kriging system."""

  weights: List[Tuple[int, float]] = Field(..., description='(sample index, lambda) pairs')
  lagrange: float
  estimate: float
  variance: float = Field(..., ge=0)

  model_config = {'frozen': True}
