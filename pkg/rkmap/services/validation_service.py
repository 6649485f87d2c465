"""Accuracy metrics of predicted rasters against references."""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from rkmap.errors import EmptyOverlapError, InvalidArgumentError
from rkmap.models.geometry_models import Point2D, Raster, Sample, sample_coordinates, sample_values
from rkmap.models.validation_models import MetricSet, ProximityReport, ProximityRow
from rkmap.services.raster_service import sample_raster
from rkmap.services.spatial_index import GridIndex

logger = logging.getLogger(__name__)

TRANSECT_COLUMNS = ['distance', 'x', 'y', 'value']


def metric_set(errors: np.ndarray, reference: Optional[np.ndarray] = None) -> MetricSet:
  """Bias, RMSE and rRMSE of ``errors`` (predicted - reference).

  rRMSE is only defined when ``reference`` is given and its mean is not 0.
  """
  errors = np.asarray(errors, dtype=float)
  n = len(errors)
  if n == 0:
    return MetricSet(n=0)
  bias = float(np.mean(errors))
  rmse = math.sqrt(float(np.mean(errors**2)))
  variance = float(np.var(errors))
  if not math.isclose(rmse**2, bias**2 + variance, rel_tol=1e-9, abs_tol=1e-12):
    logger.warning(
      'metrics: rmse^2=%.12g differs from bias^2 + var=%.12g', rmse**2, bias**2 + variance
    )
  rrmse = None
  if reference is not None and len(reference):
    mean_reference = float(np.mean(reference))
    if mean_reference != 0:
      rrmse = rmse / mean_reference
  return MetricSet(n=n, bias=bias, rmse=rmse, rrmse=rrmse)


def _overlap(predicted: Raster, reference: Raster) -> np.ndarray:
  if not predicted.same_geometry(reference):
    raise InvalidArgumentError('predicted and reference rasters do not share grid geometry')
  valid = predicted.valid & reference.valid
  if not valid.any():
    raise EmptyOverlapError('predicted and reference rasters share no valid cell')
  return valid


def _masked(predicted: Raster, reference: Raster, mask: np.ndarray) -> MetricSet:
  return metric_set(predicted.values[mask] - reference.values[mask], reference.values[mask])


def metrics(predicted: Raster, reference: Raster) -> MetricSet:
  """Metrics over cells valid in both rasters.

  Raises:
    InvalidArgumentError: the rasters differ in geometry.
    EmptyOverlapError: no cell is valid in both.
  """
  return _masked(predicted, reference, _overlap(predicted, reference))


def _containing_cells(raster: Raster, samples: List[Sample]) -> np.ndarray:
  mask = np.zeros(raster.values.shape, dtype=bool)
  if samples:
    rows, cols, inside = raster.locate(sample_coordinates(samples))
    mask[rows[inside], cols[inside]] = True
  return mask


def proximity_analysis(
  predicted: Raster, reference: Raster, samples: List[Sample], radii: Sequence[float]
) -> ProximityReport:
  """Metrics over cells whose center lies within each radius of a sample.

  Radius 0 selects the cells containing a sample; every finite radius also keeps those cells, so
  the selected sets are nested. An infinite radius selects every valid cell. Radii with no
  qualifying cell yield a row with undefined metrics.
  """
  valid = _overlap(predicted, reference)
  radii = [float(r) for r in radii]
  if not radii:
    raise InvalidArgumentError('at least one radius is required')
  if any(r < 0 for r in radii):
    raise InvalidArgumentError(f'radii must be >= 0, got {radii}')
  if any(b <= a for a, b in zip(radii, radii[1:])):
    raise InvalidArgumentError(f'radii must be strictly increasing, got {radii}')

  containing = _containing_cells(predicted, samples)
  finite = [r for r in radii if 0 < r < math.inf]
  distance = np.full(predicted.values.shape, math.inf)
  if finite and samples:
    reach = max(finite)
    index = GridIndex(sample_coordinates(samples), max(reach, predicted.cell_size))
    distance = index.nearest_distance(predicted.cell_centers(), reach).reshape(
      predicted.values.shape
    )

  rows: List[ProximityRow] = []
  for radius in radii:
    if math.isinf(radius):
      mask = valid
    elif radius == 0:
      mask = valid & containing
    else:
      mask = valid & (containing | (distance <= radius))
    row = ProximityRow(radius=radius, metrics=_masked(predicted, reference, mask))
    if row.flagged:
      logger.warning('proximity: no valid cell within %s m of a sample', radius)
    rows.append(row)
  return ProximityReport(rows=rows)


def pooled_metrics(
  per_site_errors: Sequence[np.ndarray],
  per_site_references: Optional[Sequence[np.ndarray]] = None,
) -> MetricSet:
  """Metrics over the concatenation of several sites' error vectors.

  Raises:
    EmptyOverlapError: every vector is empty.
  """
  vectors = [np.asarray(e, dtype=float).ravel() for e in per_site_errors]
  if not vectors or not any(len(v) for v in vectors):
    raise EmptyOverlapError('no errors to pool')
  reference = None
  if per_site_references is not None:
    reference = np.concatenate([np.asarray(r, dtype=float).ravel() for r in per_site_references])
  return metric_set(np.concatenate(vectors), reference)


def point_metrics(predicted: Raster, samples: List[Sample]) -> MetricSet:
  """Metrics of the raster at each sample's containing cell against the sample values.

  Raises:
    EmptyOverlapError: no sample falls on a valid cell.
  """
  values, usable = sample_raster(predicted, samples)
  if not usable.any():
    raise EmptyOverlapError('no sample falls on a valid raster cell')
  reference = sample_values(samples)[usable]
  return metric_set(values[usable] - reference, reference)


def sample_along_segment(raster: Raster, start: Point2D, end: Point2D, step: float) -> pd.DataFrame:
  """Raster values every ``step`` meters from ``start`` to ``end`` (end included).

  Points outside the raster or on no-data get NaN.
  """
  if not step > 0:
    raise InvalidArgumentError(f'step must be > 0, got {step}')
  length = math.hypot(end.x - start.x, end.y - start.y)
  distances = np.arange(0.0, length, step)
  if not len(distances) or distances[-1] < length:
    distances = np.append(distances, length)
  fraction = distances / length if length > 0 else np.zeros_like(distances)
  xs = start.x + fraction * (end.x - start.x)
  ys = start.y + fraction * (end.y - start.y)

  rows, cols, inside = raster.locate(np.column_stack([xs, ys]))
  values = np.full(len(distances), np.nan)
  values[inside] = raster.values[rows[inside], cols[inside]]
  values[values == raster.nodata] = np.nan
  return pd.DataFrame({'distance': distances, 'x': xs, 'y': ys, 'value': values})[TRANSECT_COLUMNS]
