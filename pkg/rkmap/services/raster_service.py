"""Raster operations shared by the pipeline: residuals, buffering, cropping."""

import logging
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel

from rkmap.errors import EmptyResultError, InvalidArgumentError
from rkmap.models.geometry_models import Aabb, Point2D, Raster, Sample, sample_coordinates

logger = logging.getLogger(__name__)


class SkipSummary(BaseModel):
  """Samples that could not be matched with a raster cell."""

  outside_raster: int = 0
  on_nodata: int = 0

  @property
  def total(self) -> int:
    return self.outside_raster + self.on_nodata


def residuals_with_summary(
  observed: List[Sample], predicted: Raster
) -> Tuple[List[Sample], SkipSummary]:
  """Observed minus predicted at each sample's containing cell, with a skip summary."""
  if not observed:
    return [], SkipSummary()

  rows, cols, inside = predicted.locate(sample_coordinates(observed))
  result: List[Sample] = []
  summary = SkipSummary()
  for sample, row, col, ok in zip(observed, rows, cols, inside):
    if not ok:
      summary.outside_raster += 1
      continue
    cell = float(predicted.values[row, col])
    if cell == predicted.nodata:
      summary.on_nodata += 1
      continue
    result.append(sample.with_value(sample.value - cell))

  if summary.total:
    logger.info(
      'residuals: skipped %d samples (%d outside raster, %d on no-data)',
      summary.total,
      summary.outside_raster,
      summary.on_nodata,
    )
  return result, summary


def residuals(observed: List[Sample], predicted: Raster) -> List[Sample]:
  """Observed minus predicted value at each sample's cell; unmatched samples are dropped."""
  result, _ = residuals_with_summary(observed, predicted)
  return result


def buffer_extent(extent: Aabb, margin: float) -> Aabb:
  """Grow ``extent`` by ``margin`` meters on all four sides."""
  if margin < 0:
    raise InvalidArgumentError(f'buffer margin must be >= 0, got {margin}')
  return Aabb.from_bounds(
    extent.min.x - margin, extent.min.y - margin, extent.max.x + margin, extent.max.y + margin
  )


def crop(raster: Raster, extent: Aabb) -> Raster:
  """Sub-raster of the cells whose centers lie inside ``extent`` (closed box)."""
  xs = raster.column_centers()
  ys = raster.row_centers()
  cols = np.nonzero((xs >= extent.min.x) & (xs <= extent.max.x))[0]
  rows = np.nonzero((ys >= extent.min.y) & (ys <= extent.max.y))[0]
  if cols.size == 0 or rows.size == 0:
    raise EmptyResultError(
      f'extent {extent.min.x},{extent.min.y} - {extent.max.x},{extent.max.y} '
      'contains no cell center of the raster'
    )

  c0, c1 = int(cols[0]), int(cols[-1])
  r0, r1 = int(rows[0]), int(rows[-1])
  bottom_row = raster.n_rows - 1 - r1
  origin = Point2D(
    x=raster.origin.x + c0 * raster.cell_size,
    y=raster.origin.y + bottom_row * raster.cell_size,
  )
  return Raster(
    origin=origin,
    cell_size=raster.cell_size,
    values=raster.values[r0 : r1 + 1, c0 : c1 + 1],
    nodata=raster.nodata,
  )


def sample_raster(raster: Raster, samples: List[Sample]) -> Tuple[np.ndarray, np.ndarray]:
  """Raster value at each sample's containing cell and the mask of usable samples."""
  rows, cols, inside = raster.locate(sample_coordinates(samples))
  values = np.full(len(samples), np.nan)
  values[inside] = raster.values[rows[inside], cols[inside]]
  usable = inside & (values != raster.nodata)
  return values, usable


def add_rasters(base: Raster, increment: Raster) -> Tuple[Raster, int]:
  """Cellwise base + increment; no-data in either input stays no-data in ``base``'s sentinel.

  Returns the sum and the number of cells where ``increment`` was valid but ``base`` was not.
  """
  if not base.same_geometry(increment):
    raise InvalidArgumentError('rasters do not share grid geometry')
  valid = base.valid & increment.valid
  summed = np.where(valid, base.values + increment.values, base.nodata)
  propagated = int(np.count_nonzero(increment.valid & ~base.valid))
  return base.with_values(summed), propagated
