"""Run configuration shared by every subcommand.

A config file is a dotenv-style ``key=value`` file whose keys are the field names below. Explicit
command-line flags take precedence over file values, which take precedence over the defaults.
"""

import os
from pathlib import Path
from typing import List, Optional, Union

from dotenv import dotenv_values
from pydantic import BaseModel, Field, ValidationError, field_validator

from rkmap.errors import ConfigError
from rkmap.models.geometry_models import BeamClass, TrackAzimuthClass
from rkmap.models.kriging_models import (
  AUTO_NEAREST_K,
  DuplicatePolicy,
  KrigingConfig,
  NeighborhoodKind,
)
from rkmap.models.pipeline_models import (
  DEFAULT_AZIMUTH_NWD,
  DEFAULT_AZIMUTH_SWD,
  DEFAULT_BUFFER_MARGIN,
  FitAlongTrack,
  ProvidedModel,
  RkConfig,
)
from rkmap.models.variogram_models import (
  DEFAULT_BIN_WIDTH,
  DEFAULT_MAX_LAG,
  DEFAULT_TOLERANCE_DEG,
  VariogramKind,
  VariogramModel,
  Weighting,
)

THREADS_ENV = 'RKMAP_THREADS'
DEFAULT_RADII = '0,250,500,1000,range,inf'


def default_threads() -> int:
  """Thread count from ``RKMAP_THREADS``, or 1."""
  raw = os.environ.get(THREADS_ENV, '').strip()
  if not raw:
    return 1
  try:
    threads = int(raw)
  except ValueError:
    raise ConfigError(f'{THREADS_ENV} must be an integer, got {raw!r}', key=THREADS_ENV)
  if threads < 1:
    raise ConfigError(f'{THREADS_ENV} must be >= 1, got {threads}', key=THREADS_ENV)
  return threads


class RunConfig(BaseModel):
  """Every tunable of the command line, with its default."""

  threads: int = Field(default_factory=default_threads, ge=1)
  seed: int = Field(0, ge=0, lt=2**64)

  # semivariogram
  bin_width: float = Field(DEFAULT_BIN_WIDTH, gt=0)
  max_lag: float = Field(DEFAULT_MAX_LAG, gt=0)
  azimuth: Optional[float] = Field(None, description='Omnidirectional when unset')
  tolerance: float = Field(DEFAULT_TOLERANCE_DEG, gt=0, le=90)
  beam: Optional[BeamClass] = None
  azimuth_class: Optional[TrackAzimuthClass] = None
  max_samples: Optional[int] = Field(None, ge=2)
  period: float = Field(600.0, gt=0)

  # fit
  kind: Union[VariogramKind, str] = VariogramKind.EXPONENTIAL
  weighting: Weighting = Weighting.PAIR_COUNT

  # kriging
  neighborhood: NeighborhoodKind = NeighborhoodKind.AUTO
  k: int = Field(AUTO_NEAREST_K, ge=1)
  max_radius: Optional[float] = Field(None, gt=0)
  duplicate_policy: DuplicatePolicy = DuplicatePolicy.AVERAGE
  jitter: float = Field(0.0, ge=0)
  cell_size: Optional[float] = Field(None, gt=0)

  # residual kriging
  buffer: float = Field(DEFAULT_BUFFER_MARGIN, ge=0)
  beam_filter: str = Field('power', description='power, coverage or all')
  azimuth_nwd: float = DEFAULT_AZIMUTH_NWD
  azimuth_swd: float = DEFAULT_AZIMUTH_SWD

  # simulation
  passes: str = Field('nwd', description='class[:cross_offset] items, e.g. nwd,swd:300')
  truth_mean: float = 30.0
  truth_model: str = Field('exponential:0,16,4000', description='[kind:]nugget,sill,range')
  error_model: str = Field('exponential:2,20,2500', description='[kind:]nugget,sill,range')
  prediction_bias: float = 0.0
  coverage_bias: float = -3.0
  coverage_noise_sd: float = Field(0.0, ge=0)
  coverage_track_bias_sd: float = Field(0.0, ge=0)
  track_offset_sd: float = Field(0.0, ge=0)
  track_value_offset_sd: float = Field(0.0, ge=0)
  noise_sd: float = Field(0.0, ge=0)

  # validation
  radii: str = DEFAULT_RADII
  step: float = Field(10.0, gt=0)

  model_config = {'extra': 'forbid', 'frozen': True}

  @field_validator('kind')
  @classmethod
  def _kind_or_auto(cls, value):
    if isinstance(value, VariogramKind) or value == 'auto':
      return value
    return VariogramKind(str(value).lower())

  @field_validator('beam_filter')
  @classmethod
  def _beam_filter(cls, value: str) -> str:
    value = value.lower()
    if value not in ('power', 'coverage', 'all'):
      raise ValueError(f'beam_filter must be power, coverage or all, got {value}')
    return value

  def merged(self, **overrides) -> 'RunConfig':
    """Copy with every non-None override applied and validated."""
    values = self.model_dump()
    values.update({k: v for k, v in overrides.items() if v is not None})
    return build_config(values)

  def kriging_config(self) -> KrigingConfig:
    if self.neighborhood == NeighborhoodKind.NEAREST and self.max_radius is None:
      raise ConfigError('nearest neighborhood requires max_radius', key='max_radius')
    return KrigingConfig(
      neighborhood=self.neighborhood,
      k=self.k,
      max_radius=self.max_radius,
      duplicate_policy=self.duplicate_policy,
      jitter=self.jitter,
    )

  def rk_config(self, model: Optional[VariogramModel] = None) -> RkConfig:
    """Pipeline settings; ``model`` skips the in-pipeline fit."""
    if model is not None:
      source = ProvidedModel(model=model)
    else:
      kind = VariogramKind.EXPONENTIAL if self.kind == 'auto' else self.kind
      source = FitAlongTrack(
        bin_width=self.bin_width,
        max_lag=self.max_lag,
        tolerance_deg=self.tolerance,
        kind=kind,
        weighting=self.weighting,
        azimuth_nwd=self.azimuth_nwd,
        azimuth_swd=self.azimuth_swd,
      )
    beam_filter = None if self.beam_filter == 'all' else BeamClass(self.beam_filter)
    return RkConfig(
      buffer_margin=self.buffer,
      beam_filter=beam_filter,
      semivariogram_source=source,
      kriging=self.kriging_config(),
      threads=self.threads,
    )


def build_config(values: dict) -> RunConfig:
  """Validate raw values, reporting the first offending key."""
  try:
    return RunConfig(**values)
  except ValidationError as exc:
    error = exc.errors()[0]
    key = str(error['loc'][0]) if error['loc'] else None
    if error['type'] == 'extra_forbidden':
      raise ConfigError(f'unknown config key {key!r}', key=key)
    raise ConfigError(f'invalid value for {key!r}: {error["msg"]}', key=key)


def load_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
  """Defaults, overlaid with the ``key=value`` file at ``path`` when given."""
  if path is None:
    return build_config({})
  raw = dotenv_values(path)
  values = {key.strip().lower(): value for key, value in raw.items() if value not in (None, '')}
  return build_config(values)


def parse_radii(text: str, model_range: Optional[float] = None) -> List[float]:
  """Comma-separated radii in meters; ``inf`` and ``range`` (the model range) are accepted."""
  radii: List[float] = []
  for token in (t.strip().lower() for t in text.split(',') if t.strip()):
    if token == 'range':
      if model_range is None:
        raise ConfigError('radius "range" needs a variogram model (--model)', key='radii')
      radii.append(model_range)
    else:
      try:
        radii.append(float(token))
      except ValueError:
        raise ConfigError(f'invalid radius {token!r}', key='radii')
  return sorted(set(radii))
