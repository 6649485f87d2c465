"""Pydantic models for planar geometry, point observations and rasters."""

import math
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

DEFAULT_NODATA = -9999.0


class BeamClass(str, Enum):
  """Laser beam energy class of a footprint."""

  POWER = 'power'
  COVERAGE = 'coverage'


class TrackAzimuthClass(str, Enum):
  """Orbital pass direction of a ground track."""

  NWD = 'nwd'  # northward pass
  SWD = 'swd'  # southward pass


class Point2D(BaseModel):
  """Planar position in meters (easting, northing)."""

  x: float = Field(..., description='Easting in meters')
  y: float = Field(..., description='Northing in meters')

  model_config = {'frozen': True}

  @field_validator('x', 'y')
  @classmethod
  def _finite(cls, value: float) -> float:
    if not math.isfinite(value):
      raise ValueError(f'coordinate must be finite, got {value}')
    return value


class Aabb(BaseModel):
  """Axis-aligned bounding box."""

  min: Point2D
  max: Point2D

  model_config = {'frozen': True}

  @model_validator(mode='after')
  def _ordered(self) -> 'Aabb':
    if self.min.x > self.max.x or self.min.y > self.max.y:
      raise ValueError(f'invalid extent: min={self.min} max={self.max}')
    return self

  @classmethod
  def from_bounds(cls, xmin: float, ymin: float, xmax: float, ymax: float) -> 'Aabb':
    """Build an extent from four bounds."""
    return cls(min=Point2D(x=xmin, y=ymin), max=Point2D(x=xmax, y=ymax))

  @property
  def width(self) -> float:
    return self.max.x - self.min.x

  @property
  def height(self) -> float:
    return self.max.y - self.min.y

  def contains(self, xy: np.ndarray) -> np.ndarray:
    """Mask of points (n, 2) lying inside the closed box."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    return (
      (xy[:, 0] >= self.min.x)
      & (xy[:, 0] <= self.max.x)
      & (xy[:, 1] >= self.min.y)
      & (xy[:, 1] <= self.max.y)
    )

  def intersects(self, other: 'Aabb') -> bool:
    return not (
      other.max.x < self.min.x
      or other.min.x > self.max.x
      or other.max.y < self.min.y
      or other.min.y > self.max.y
    )


class Sample(BaseModel):
  """A point observation: canopy height or residual at a footprint."""

  position: Point2D
  value: float = Field(..., description='Height or residual in meters')
  beam: BeamClass = BeamClass.POWER
  azimuth_class: TrackAzimuthClass = TrackAzimuthClass.NWD
  track_id: str = ''

  model_config = {'frozen': True}

  @field_validator('value')
  @classmethod
  def _finite_value(cls, value: float) -> float:
    if not math.isfinite(value):
      raise ValueError(f'sample value must be finite, got {value}')
    return value

  @classmethod
  def at(cls, x: float, y: float, value: float, **metadata) -> 'Sample':
    """Shorthand constructor from raw coordinates."""
    return cls(position=Point2D(x=x, y=y), value=value, **metadata)

  def with_value(self, value: float) -> 'Sample':
    return self.model_copy(update={'value': value})


def sample_coordinates(samples: list[Sample]) -> np.ndarray:
  """Positions of samples as an (n, 2) float array."""
  if not samples:
    return np.empty((0, 2), dtype=float)
  return np.array([(s.position.x, s.position.y) for s in samples], dtype=float)


def sample_values(samples: list[Sample]) -> np.ndarray:
  return np.array([s.value for s in samples], dtype=float)


class Raster(BaseModel):
  """Regular grid of square cells.

  ``values`` has shape (n_rows, n_cols); row 0 is the northernmost row, matching the ASCII grid
  layout. ``origin`` is the lower-left corner of the lower-left cell. Cells equal to ``nodata``
  carry no value.
  """

  origin: Point2D
  cell_size: float = Field(..., gt=0, description='Square cell edge in meters')
  values: np.ndarray
  nodata: float = DEFAULT_NODATA

  model_config = {'frozen': True, 'arbitrary_types_allowed': True}

  @field_validator('values', mode='before')
  @classmethod
  def _as_grid(cls, values) -> np.ndarray:
    grid = np.array(values, dtype=float, copy=True)
    if grid.ndim != 2:
      raise ValueError(f'raster values must be 2-D, got shape {grid.shape}')
    grid.setflags(write=False)
    return grid

  @model_validator(mode='after')
  def _valid_cells(self) -> 'Raster':
    if not math.isfinite(self.nodata):
      raise ValueError('nodata sentinel must be finite')
    bad = ~np.isfinite(self.values)
    if bad.any():
      raise ValueError(f'{int(bad.sum())} raster values are not finite')
    return self

  @classmethod
  def filled(
    cls,
    origin: Point2D,
    cell_size: float,
    n_rows: int,
    n_cols: int,
    fill: float = 0.0,
    nodata: float = DEFAULT_NODATA,
  ) -> 'Raster':
    """Grid of constant value."""
    return cls(
      origin=origin, cell_size=cell_size, values=np.full((n_rows, n_cols), fill), nodata=nodata
    )

  @property
  def n_rows(self) -> int:
    return int(self.values.shape[0])

  @property
  def n_cols(self) -> int:
    return int(self.values.shape[1])

  @property
  def extent(self) -> Aabb:
    return Aabb.from_bounds(
      self.origin.x,
      self.origin.y,
      self.origin.x + self.n_cols * self.cell_size,
      self.origin.y + self.n_rows * self.cell_size,
    )

  @property
  def valid(self) -> np.ndarray:
    """Mask of cells that carry a value."""
    return self.values != self.nodata

  def same_geometry(self, other: 'Raster') -> bool:
    return (
      self.values.shape == other.values.shape
      and self.cell_size == other.cell_size
      and self.origin == other.origin
    )

  def column_centers(self) -> np.ndarray:
    return self.origin.x + (np.arange(self.n_cols) + 0.5) * self.cell_size

  def row_centers(self) -> np.ndarray:
    """Northing of each row center, top row first."""
    from_bottom = self.n_rows - 1 - np.arange(self.n_rows)
    return self.origin.y + (from_bottom + 0.5) * self.cell_size

  def cell_centers(self) -> np.ndarray:
    """Centers of all cells as an (n_rows * n_cols, 2) array in row-major order."""
    xs, ys = np.meshgrid(self.column_centers(), self.row_centers())
    return np.column_stack([xs.ravel(), ys.ravel()])

  def locate(self, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Containing cell of each point.

    Cells are half-open on their max edges, so a point on the raster's outer max edge is
    outside. Returns (rows, cols, inside); rows/cols are only meaningful where ``inside`` is
    true.
    """
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    cols = np.floor((xy[:, 0] - self.origin.x) / self.cell_size).astype(np.int64)
    from_bottom = np.floor((xy[:, 1] - self.origin.y) / self.cell_size).astype(np.int64)
    inside = (cols >= 0) & (cols < self.n_cols) & (from_bottom >= 0) & (from_bottom < self.n_rows)
    rows = self.n_rows - 1 - from_bottom
    return rows, cols, inside

  def value_at(self, x: float, y: float) -> Optional[float]:
    """Value of the cell containing (x, y), or None outside or on no-data."""
    rows, cols, inside = self.locate(np.array([[x, y]]))
    if not inside[0]:
      return None
    value = float(self.values[rows[0], cols[0]])
    return None if value == self.nodata else value

  def with_values(self, values: np.ndarray) -> 'Raster':
    """Same geometry and sentinel, new values."""
    return Raster(origin=self.origin, cell_size=self.cell_size, values=values, nodata=self.nodata)
