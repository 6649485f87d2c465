"""Pydantic models for the residual kriging pipeline."""

from enum import Enum
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, Field

from rkmap.models.geometry_models import Aabb, BeamClass, Raster, Sample
from rkmap.models.kriging_models import KrigingConfig, NeighborhoodKind
from rkmap.models.validation_models import MetricSet
from rkmap.models.variogram_models import (
  DEFAULT_BIN_WIDTH,
  DEFAULT_MAX_LAG,
  DEFAULT_TOLERANCE_DEG,
  FitResult,
  VariogramKind,
  VariogramModel,
  Weighting,
)

DEFAULT_BUFFER_MARGIN = 3000.0
DEFAULT_AZIMUTH_NWD = 36.0
DEFAULT_AZIMUTH_SWD = 144.0


class ProvidedModel(BaseModel):
  """Use a variogram model fitted elsewhere."""

  source: Literal['provided'] = 'provided'
  model: VariogramModel

  model_config = {'frozen': True}


class FitAlongTrack(BaseModel):
  """Fit a model to pooled along-track directional semivariograms of NWD and SWD tracks."""

  source: Literal['fit_along_track'] = 'fit_along_track'
  bin_width: float = Field(DEFAULT_BIN_WIDTH, gt=0)
  max_lag: float = Field(DEFAULT_MAX_LAG, gt=0)
  tolerance_deg: float = Field(DEFAULT_TOLERANCE_DEG, gt=0, le=90)
  kind: VariogramKind = VariogramKind.EXPONENTIAL
  weighting: Weighting = Weighting.PAIR_COUNT
  azimuth_nwd: float = DEFAULT_AZIMUTH_NWD
  azimuth_swd: float = DEFAULT_AZIMUTH_SWD

  model_config = {'frozen': True}


class RkConfig(BaseModel):
  """Settings of one residual kriging run."""

  buffer_margin: float = Field(DEFAULT_BUFFER_MARGIN, ge=0)
  beam_filter: Optional[BeamClass] = Field(BeamClass.POWER, description='None keeps every beam')
  semivariogram_source: Union[ProvidedModel, FitAlongTrack] = Field(
    default_factory=FitAlongTrack, discriminator='source'
  )
  kriging: KrigingConfig = Field(
    default_factory=lambda: KrigingConfig(neighborhood=NeighborhoodKind.AUTO)
  )
  threads: int = Field(1, ge=1)

  model_config = {'frozen': True}


class RkDiagnostics(BaseModel):
  """Counters collected along a run."""

  samples_in: int = 0
  samples_beam_filtered: int = 0
  samples_outside_buffer: int = 0
  samples_outside_raster: int = 0
  samples_on_nodata: int = 0
  duplicates_merged: int = 0
  samples_used: int = 0
  neighborhood: Optional[NeighborhoodKind] = None
  fit_degenerate: bool = False
  nodata_propagated_cells: int = 0
  empty_neighborhood_cells: int = 0
  seconds: float = 0.0


class RkOutput(BaseModel):
  """Cropped rasters and diagnostics of one site."""

  corrected: Raster
  kriged_residuals: Raster
  kriging_variance: Raster
  model: VariogramModel
  fit: Optional[FitResult] = None
  diagnostics: RkDiagnostics

  model_config = {'arbitrary_types_allowed': True}


class SiteInput(BaseModel):
  """One independently kriged study site."""

  name: str
  observed: List[Sample]
  prediction: Raster
  site: Aabb
  reference: Optional[Raster] = Field(None, description='Ground truth used for pooled metrics')

  model_config = {'arbitrary_types_allowed': True}


class SiteStatus(str, Enum):
  """Outcome of a site run."""

  OK = 'ok'
  FAILED = 'failed'


class SiteResult(BaseModel):
  """Output or failure of one site."""

  name: str
  status: SiteStatus
  output: Optional[RkOutput] = None
  error: Optional[str] = None
  errors: List[float] = Field(
    default_factory=list, description='corrected - reference over valid cells'
  )
  reference_values: List[float] = Field(
    default_factory=list, description='Reference values at the cells of ``errors``'
  )


class MultiSiteResult(BaseModel):
  """Per-site results in input order plus pooled metrics."""

  sites: List[SiteResult]
  pooled: Optional[MetricSet] = None

  @property
  def all_failed(self) -> bool:
    return all(s.status == SiteStatus.FAILED for s in self.sites)

  @property
  def any_failed(self) -> bool:
    return any(s.status == SiteStatus.FAILED for s in self.sites)
