"""Shared fixtures for the rkmap test suite."""

from typing import Callable, List, Optional

import numpy as np
import pytest
from click.testing import CliRunner

from rkmap.models.geometry_models import (
  BeamClass,
  Point2D,
  Raster,
  Sample,
  TrackAzimuthClass,
)
from rkmap.models.variogram_models import VariogramKind, VariogramModel


@pytest.fixture
def rng() -> np.random.Generator:
  return np.random.default_rng(20240611)


@pytest.fixture
def make_raster() -> Callable[..., Raster]:
  """Factory of rasters from a 2-D value array (row 0 north)."""

  def build(
    values, origin=(0.0, 0.0), cell_size: float = 10.0, nodata: float = -9999.0
  ) -> Raster:
    return Raster(
      origin=Point2D(x=origin[0], y=origin[1]),
      cell_size=cell_size,
      values=np.asarray(values, dtype=float),
      nodata=nodata,
    )

  return build


@pytest.fixture
def random_samples() -> Callable[..., List[Sample]]:
  """Factory of samples at uniform random positions with normal values."""

  def build(
    n: int,
    seed: int = 0,
    extent=(0.0, 0.0, 5000.0, 5000.0),
    beams: Optional[List[BeamClass]] = None,
  ) -> List[Sample]:
    generator = np.random.default_rng(seed)
    xs = generator.uniform(extent[0], extent[2], n)
    ys = generator.uniform(extent[1], extent[3], n)
    values = generator.normal(10.0, 3.0, n)
    beam_cycle = beams or [BeamClass.POWER]
    classes = [TrackAzimuthClass.NWD, TrackAzimuthClass.SWD]
    return [
      Sample.at(
        float(x),
        float(y),
        float(v),
        beam=beam_cycle[i % len(beam_cycle)],
        azimuth_class=classes[i % 2],
        track_id=f't{i % 7}',
      )
      for i, (x, y, v) in enumerate(zip(xs, ys, values))
    ]

  return build


@pytest.fixture
def exponential_model() -> VariogramModel:
  return VariogramModel(kind=VariogramKind.EXPONENTIAL, nugget=2.0, sill=20.0, range=2500.0)


@pytest.fixture
def runner() -> CliRunner:
  return CliRunner()
