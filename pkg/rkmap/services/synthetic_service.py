"""Synthetic truth fields and replay of the GEDI ground sampling geometry.

Random streams are seeded per purpose (pattern jitter, observation noise, each field) so that
changing one setting does not shift the draws of another.
"""

import logging
import math
from typing import Callable, Dict, List, Sequence, Union

import numpy as np
from scipy.linalg import LinAlgError, cholesky
from scipy.spatial.distance import cdist

from rkmap.errors import InvalidArgumentError, SingularSystemError
from rkmap.models.geometry_models import (
  BeamClass,
  Point2D,
  Raster,
  Sample,
  sample_coordinates,
)
from rkmap.models.synthetic_models import (
  GRF_POINT_CAP,
  GediPatternSpec,
  GrfSpec,
  Scenario,
  ScenarioSpec,
)
from rkmap.services.variogram_fit_service import covariance_from_model

logger = logging.getLogger(__name__)

TruthField = Callable[[np.ndarray], np.ndarray]
PointsLike = Union[Sequence[Point2D], np.ndarray]

JITTER_LEVELS = (0.0, 1e-10, 1e-8, 1e-6)
PATTERN_STREAM = 0
OBSERVE_STREAM = 1


def _as_xy(points: PointsLike) -> np.ndarray:
  if isinstance(points, np.ndarray):
    return np.asarray(points, dtype=float).reshape(-1, 2)
  return np.array([(p.x, p.y) for p in points], dtype=float).reshape(-1, 2)


def _cholesky_lower(cov: np.ndarray, scale: float, kind: str) -> np.ndarray:
  n = len(cov)
  for level in JITTER_LEVELS:
    matrix = cov.copy()
    if level:
      matrix[np.arange(n), np.arange(n)] += level * scale
    try:
      factor = cholesky(matrix, lower=True, check_finite=False)
    except LinAlgError:
      continue
    if level:
      logger.info('grf: covariance regularized with ridge %.1e x sill', level)
    return factor
  raise SingularSystemError(
    f'{kind} covariance of {n} points is not positive definite after ridge '
    f'{JITTER_LEVELS[-1]:.0e} x sill'
  )


def sample_grf_at(points: PointsLike, spec: GrfSpec) -> np.ndarray:
  """One realization of a stationary Gaussian field at ``points``.

  The covariance is ``sill - gamma(h)`` of ``spec.model``; values are drawn by Cholesky
  factorization of the dense covariance matrix.

  Raises:
    InvalidArgumentError: more than ``GRF_POINT_CAP`` points.
    SingularSystemError: the covariance stays indefinite after regularization.
  """
  xy = _as_xy(points)
  n = len(xy)
  if n > GRF_POINT_CAP:
    raise InvalidArgumentError(f'{n} points exceed the dense field limit of {GRF_POINT_CAP}')
  if n == 0:
    return np.empty(0)

  model = spec.model
  rng = np.random.default_rng(spec.seed)
  z = rng.standard_normal(n)
  if model.sill == 0:
    return np.full(n, spec.mean)

  cov = np.asarray(covariance_from_model(model, cdist(xy, xy)))
  lower = _cholesky_lower(cov, model.sill, model.kind.value)
  return spec.mean + lower @ z


def generate_pattern(spec: GediPatternSpec) -> List[Sample]:
  """Footprint positions of every pass, clipped to the extent.

  Each pass lays ``beams_per_pass`` parallel tracks centered on the extent center shifted by
  the pass's cross-track offset. Tracks are ``track_spacing_cross`` apart and carry stations every
  ``footprint_spacing_along`` meters. Beams alternate in pairs, power first (P P C C ...).
  Values are 0.
  """
  rng = np.random.default_rng([spec.seed, PATTERN_STREAM])
  extent = spec.extent
  center = np.array(
    [0.5 * (extent.min.x + extent.max.x), 0.5 * (extent.min.y + extent.max.y)]
  )
  n_beams = spec.beams_per_pass
  swath_half = 0.5 * (n_beams - 1) * spec.track_spacing_cross
  reach = 0.5 * math.hypot(extent.width, extent.height) + swath_half
  n_steps = int(math.ceil(reach / spec.footprint_spacing_along))
  along = np.arange(-n_steps, n_steps + 1) * spec.footprint_spacing_along

  samples: List[Sample] = []
  for pass_index, pass_spec in enumerate(spec.passes):
    theta = math.radians(spec.azimuth_of(pass_spec.azimuth_class))
    u = np.array([math.sin(theta), math.cos(theta)])
    v = np.array([math.cos(theta), -math.sin(theta)])
    for beam_index in range(n_beams):
      offset = pass_spec.cross_offset + (beam_index - (n_beams - 1) / 2) * spec.track_spacing_cross
      if spec.per_track_offset_sd > 0:
        offset += rng.normal(0.0, spec.per_track_offset_sd)
      xy = center + offset * v + along[:, None] * u
      xy = xy[extent.contains(xy)]
      beam = BeamClass.POWER if (beam_index // 2) % 2 == 0 else BeamClass.COVERAGE
      track_id = f'p{pass_index}b{beam_index}'
      samples.extend(
        Sample.at(
          float(x),
          float(y),
          0.0,
          beam=beam,
          azimuth_class=pass_spec.azimuth_class,
          track_id=track_id,
        )
        for x, y in xy
      )

  if not samples:
    logger.warning('pattern: no footprint falls inside the extent')
  return samples


def _track_offsets(samples: List[Sample], rng: np.random.Generator, sd: float) -> np.ndarray:
  offsets: Dict[str, float] = {}
  for sample in samples:
    if sample.track_id not in offsets:
      offsets[sample.track_id] = float(rng.normal(0.0, sd))
  return np.array([offsets[s.track_id] for s in samples])


def observe(pattern: List[Sample], truth_at: TruthField, spec: GediPatternSpec) -> List[Sample]:
  """Observed heights: truth plus beam-dependent bias and noise.

  Coverage beams add ``coverage_bias``, a constant N(0, coverage_track_bias_sd) offset per
  coverage track and N(0, coverage_noise_sd) noise. Every track may add a constant
  N(0, track_value_offset_sd) offset and every footprint N(0, observation_noise_sd).
  Per-track draws follow the first appearance of each track in ``pattern``.
  """
  if not pattern:
    return []
  rng = np.random.default_rng([spec.seed, OBSERVE_STREAM])
  values = np.asarray(truth_at(sample_coordinates(pattern)), dtype=float).copy()
  coverage = np.array([s.beam == BeamClass.COVERAGE for s in pattern])

  if spec.track_value_offset_sd > 0:
    values += _track_offsets(pattern, rng, spec.track_value_offset_sd)
  if spec.coverage_track_bias_sd > 0:
    covered = [s for s, c in zip(pattern, coverage) if c]
    if covered:
      values[coverage] += _track_offsets(covered, rng, spec.coverage_track_bias_sd)

  values[coverage] += spec.coverage_bias
  if spec.coverage_noise_sd > 0:
    values[coverage] += rng.normal(0.0, spec.coverage_noise_sd, int(coverage.sum()))
  if spec.observation_noise_sd > 0:
    values += rng.normal(0.0, spec.observation_noise_sd, len(values))

  return [sample.with_value(float(value)) for sample, value in zip(pattern, values)]


def raster_field(raster: Raster) -> TruthField:
  """Query function returning the value of the cell containing each point.

  Points on the raster's outer max edges belong to the last cell.
  """

  def query(xy: np.ndarray) -> np.ndarray:
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    outside = ~raster.extent.contains(xy)
    if outside.any():
      raise InvalidArgumentError(f'{int(outside.sum())} points lie outside the raster')
    rows, cols, _ = raster.locate(xy)
    rows = np.clip(rows, 0, raster.n_rows - 1)
    cols = np.clip(cols, 0, raster.n_cols - 1)
    return raster.values[rows, cols]

  return query


def grf_field(grid: Raster, spec: GrfSpec) -> Raster:
  """Realization of ``spec`` at the cell centers of ``grid``."""
  values = sample_grf_at(grid.cell_centers(), spec)
  return grid.with_values(values.reshape(grid.n_rows, grid.n_cols))


def simulate_scenario(spec: ScenarioSpec) -> Scenario:
  """Truth raster, regression-like prediction raster and GEDI-like observations.

  The prediction is the truth plus a correlated error field and a constant bias; observations
  sample the truth at the footprint's cell. Both fields are drawn densely on the grid, which
  therefore holds at most ``GRF_POINT_CAP`` cells.

  Raises:
    InvalidArgumentError: the grid exceeds ``GRF_POINT_CAP`` cells.
  """
  extent = spec.pattern.extent
  n_rows = max(1, int(math.ceil(extent.height / spec.cell_size)))
  n_cols = max(1, int(math.ceil(extent.width / spec.cell_size)))
  if n_rows * n_cols > GRF_POINT_CAP:
    coarsest = math.sqrt(extent.width * extent.height / GRF_POINT_CAP)
    raise InvalidArgumentError(
      f'{n_rows}x{n_cols} cells exceed the dense field limit of {GRF_POINT_CAP}; '
      f'use a cell size above {coarsest:.0f} m'
    )
  grid = Raster.filled(
    origin=extent.min, cell_size=spec.cell_size, n_rows=n_rows, n_cols=n_cols
  )
  truth = grf_field(grid, GrfSpec(model=spec.truth_model, mean=spec.truth_mean, seed=spec.seed))
  error = grf_field(grid, GrfSpec(model=spec.error_model, seed=(spec.seed + 1) % 2**64))
  prediction = truth.with_values(truth.values + error.values + spec.prediction_bias)

  pattern = generate_pattern(spec.pattern)
  observed = observe(pattern, raster_field(truth), spec.pattern)
  logger.info(
    'scenario: %dx%d cells, %d footprints', grid.n_rows, grid.n_cols, len(observed)
  )
  return Scenario(truth=truth, prediction=prediction, observed=observed)
