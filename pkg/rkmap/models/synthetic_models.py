"""Pydantic models for synthetic fields and the GEDI-like sampling pattern."""

from typing import List

from pydantic import BaseModel, Field, model_validator

from rkmap.models.geometry_models import Aabb, Raster, Sample, TrackAzimuthClass
from rkmap.models.variogram_models import VariogramKind, VariogramModel

GRF_POINT_CAP = 4000


class GrfSpec(BaseModel):
  """Stationary Gaussian random field with a variogram-derived covariance."""

  model: VariogramModel
  mean: float = 0.0
  seed: int = Field(0, ge=0, lt=2**64)

  model_config = {'frozen': True}


class PassSpec(BaseModel):
  """One overflight: its direction class and the cross-track offset of the swath center."""

  azimuth_class: TrackAzimuthClass
  cross_offset: float = 0.0

  model_config = {'frozen': True}


class GediPatternSpec(BaseModel):
  """Acquisition geometry and beam-dependent observation effects."""

  extent: Aabb
  track_spacing_cross: float = Field(600.0, gt=0)
  footprint_spacing_along: float = Field(60.0, gt=0)
  beams_per_pass: int = Field(8, ge=2)
  azimuth_nwd: float = 36.0
  azimuth_swd: float = 144.0
  passes: List[PassSpec] = Field(
    default_factory=lambda: [PassSpec(azimuth_class=TrackAzimuthClass.NWD)]
  )
  coverage_bias: float = -3.0
  coverage_noise_sd: float = Field(0.0, ge=0)
  coverage_track_bias_sd: float = Field(
    0.0, ge=0, description='Constant offset drawn per coverage track on top of coverage_bias'
  )
  per_track_offset_sd: float = Field(0.0, ge=0, description='Cross-track position jitter')
  track_value_offset_sd: float = Field(0.0, ge=0, description='Additive value offset per track')
  observation_noise_sd: float = Field(0.0, ge=0, description='Noise added to every beam')
  seed: int = Field(0, ge=0, lt=2**64)

  model_config = {'frozen': True}

  @model_validator(mode='after')
  def _even_beams(self) -> 'GediPatternSpec':
    if self.beams_per_pass % 2:
      raise ValueError(f'beams_per_pass must be even, got {self.beams_per_pass}')
    return self

  def azimuth_of(self, azimuth_class: TrackAzimuthClass) -> float:
    if azimuth_class == TrackAzimuthClass.NWD:
      return self.azimuth_nwd
    return self.azimuth_swd


class ScenarioSpec(BaseModel):
  """End-to-end synthetic site: truth, regression prediction and observations."""

  pattern: GediPatternSpec
  cell_size: float = Field(100.0, gt=0)
  truth_mean: float = 30.0
  truth_model: VariogramModel = Field(
    default_factory=lambda: VariogramModel(
      kind=VariogramKind.EXPONENTIAL, nugget=0.0, sill=16.0, range=4000.0
    )
  )
  error_model: VariogramModel = Field(
    default_factory=lambda: VariogramModel(
      kind=VariogramKind.EXPONENTIAL, nugget=2.0, sill=20.0, range=2500.0
    )
  )
  prediction_bias: float = 0.0
  seed: int = Field(0, ge=0, lt=2**64)

  model_config = {'frozen': True}


class Scenario(BaseModel):
  """Realized synthetic site."""

  truth: Raster
  prediction: Raster
  observed: List[Sample]

  model_config = {'arbitrary_types_allowed': True}
