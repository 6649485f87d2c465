"""Ordinary kriging on the semivariogram form of the bordered Lagrange system.

For n selected samples the (n + 1) system is::

  | gamma(d_ij)  1 | |lambda|   |gamma(d_i0)|
  | 1 ...        0 | |  mu  | = |     1     |

with gamma(0) = 0 on the diagonal, so predictions at a sample location reproduce it exactly.
"""

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.spatial.distance import cdist

from rkmap.errors import (
  DuplicateSampleError,
  EmptyNeighborhoodError,
  InsufficientDataError,
  InvalidArgumentError,
  SingularSystemError,
)
from rkmap.models.geometry_models import Point2D, Raster, Sample
from rkmap.models.kriging_models import (
  AUTO_GLOBAL_LIMIT,
  AUTO_NEAREST_K,
  DuplicatePolicy,
  KrigingConfig,
  KrigingSolution,
  NeighborhoodKind,
)
from rkmap.models.variogram_models import VariogramModel
from rkmap.services.spatial_index import GridIndex
from rkmap.services.variogram_fit_service import model_eval

logger = logging.getLogger(__name__)

JITTER_LEVELS = (0.0, 1e-10, 1e-8, 1e-6)
SINGULAR_PIVOT_RATIO = 1e-13
GRID_CHUNK = 4096

Factorization = Tuple[np.ndarray, np.ndarray]


class PreparedSamples:
  """Sample coordinates and values with duplicate positions resolved.

  ``source[i]`` is the index, in the caller's list, of the first sample at position i.
  """

  def __init__(self, xy: np.ndarray, z: np.ndarray, source: np.ndarray, merged: int):
    self.xy = xy
    self.z = z
    self.source = source
    self.merged = merged

  def __len__(self) -> int:
    return len(self.z)


def prepare_samples(
  samples: List[Sample], policy: DuplicatePolicy = DuplicatePolicy.AVERAGE
) -> PreparedSamples:
  """Collapse samples sharing a position according to ``policy``.

  Raises:
    DuplicateSampleError: under ``DuplicatePolicy.ERROR`` when two samples coincide.
  """
  groups: Dict[Tuple[float, float], List[int]] = {}
  for index, sample in enumerate(samples):
    groups.setdefault((sample.position.x, sample.position.y), []).append(index)

  merged = len(samples) - len(groups)
  if merged and policy == DuplicatePolicy.ERROR:
    position = next(key for key, members in groups.items() if len(members) > 1)
    raise DuplicateSampleError(f'samples share position ({position[0]}, {position[1]})')

  xy = np.array(list(groups.keys()), dtype=float).reshape(-1, 2)
  z = np.array([np.mean([samples[i].value for i in members]) for members in groups.values()])
  source = np.array([members[0] for members in groups.values()], dtype=np.int64)
  if merged:
    logger.info('kriging: averaged %d duplicate samples', merged)
  return PreparedSamples(xy, z, source, merged)


def resolve_neighborhood(
  config: KrigingConfig, n_samples: int, model: VariogramModel
) -> KrigingConfig:
  """Replace an ``AUTO`` neighborhood by the concrete one used for ``n_samples``."""
  if config.neighborhood != NeighborhoodKind.AUTO:
    return config
  if n_samples <= AUTO_GLOBAL_LIMIT:
    return config.model_copy(update={'neighborhood': NeighborhoodKind.GLOBAL})
  radius = config.max_radius or model.range
  logger.info(
    'kriging: %d samples exceed %d, switching to nearest(%d, %.1f m)',
    n_samples,
    AUTO_GLOBAL_LIMIT,
    AUTO_NEAREST_K,
    radius,
  )
  return config.model_copy(
    update={'neighborhood': NeighborhoodKind.NEAREST, 'k': AUTO_NEAREST_K, 'max_radius': radius}
  )


def _system_matrix(xy: np.ndarray, model: VariogramModel) -> np.ndarray:
  n = len(xy)
  a = np.zeros((n + 1, n + 1))
  a[:n, :n] = model_eval(model, cdist(xy, xy))
  a[:n, n] = 1.0
  a[n, :n] = 1.0
  return a


def _pivot_ratio(lu: np.ndarray) -> float:
  pivots = np.abs(np.diag(lu))
  top = pivots.max()
  if top == 0 or not np.all(np.isfinite(pivots)):
    return 0.0
  return float(pivots.min() / top)


def factor_system(
  xy: np.ndarray, model: VariogramModel, base_jitter: float = 0.0
) -> Factorization:
  """LU factorization of the bordered system, escalating a diagonal ridge until it is regular.

  The ridge is subtracted from the semivariance diagonal (equivalent to adding it to the
  covariance diagonal) in units of the sill.

  Raises:
    SingularSystemError: still singular at the largest ridge.
  """
  scale = model.sill if model.sill > 0 else 1.0
  base = _system_matrix(xy, model)
  n = len(xy)
  levels = sorted({max(level, base_jitter) for level in JITTER_LEVELS})
  ratio = 0.0
  for level in levels:
    a = base.copy()
    if level:
      a[np.arange(n), np.arange(n)] -= level * scale
    with warnings.catch_warnings():
      warnings.simplefilter('ignore')
      factors = lu_factor(a, check_finite=False)
    ratio = _pivot_ratio(factors[0])
    if ratio >= SINGULAR_PIVOT_RATIO:
      if level:
        logger.info('kriging: system regularized with ridge %.1e x sill (n=%d)', level, n)
      return factors
  condition = math.inf if ratio == 0 else 1.0 / ratio
  raise SingularSystemError(
    f'kriging system of {n} samples is singular after ridge {levels[-1]:.0e} x sill',
    condition=condition,
  )


def _solve_local(
  xy: np.ndarray, z: np.ndarray, target: np.ndarray, model: VariogramModel, jitter: float
) -> Tuple[np.ndarray, float, float, float]:
  """Weights, Lagrange multiplier, estimate and variance for one target."""
  factors = factor_system(xy, model, jitter)
  n = len(xy)
  rhs = np.ones(n + 1)
  rhs[:n] = model_eval(model, np.hypot(xy[:, 0] - target[0], xy[:, 1] - target[1]))
  x = lu_solve(factors, rhs, check_finite=False)
  weights, mu = x[:n], float(x[n])
  estimate = float(weights @ z)
  variance = float(weights @ rhs[:n] + mu)
  return weights, mu, estimate, max(variance, 0.0)


def _select(
  prepared: PreparedSamples,
  target: np.ndarray,
  config: KrigingConfig,
  index: Optional[GridIndex],
) -> np.ndarray:
  if config.neighborhood == NeighborhoodKind.GLOBAL:
    return np.arange(len(prepared))
  assert index is not None and config.max_radius is not None
  selected, _ = index.nearest(float(target[0]), float(target[1]), config.k, config.max_radius)
  return selected


def solve_weights(
  samples: List[Sample], target: Point2D, model: VariogramModel, config: KrigingConfig
) -> KrigingSolution:
  """Solve the ordinary kriging system at ``target``.

  Raises:
    EmptyNeighborhoodError: no sample falls in the neighborhood.
    SingularSystemError: see ``factor_system``.
  """
  prepared = prepare_samples(samples, config.duplicate_policy)
  if not len(prepared):
    raise EmptyNeighborhoodError('no samples to krige from')
  config = resolve_neighborhood(config, len(prepared), model)
  index = None
  if config.neighborhood == NeighborhoodKind.NEAREST:
    index = GridIndex(prepared.xy, config.max_radius)
  point = np.array([target.x, target.y])
  selected = _select(prepared, point, config, index)
  if selected.size == 0:
    raise EmptyNeighborhoodError(
      f'no sample within {config.max_radius} m of ({target.x}, {target.y})'
    )
  weights, mu, estimate, variance = _solve_local(
    prepared.xy[selected], prepared.z[selected], point, model, config.jitter
  )
  return KrigingSolution(
    weights=[(int(prepared.source[i]), float(w)) for i, w in zip(selected, weights)],
    lagrange=mu,
    estimate=estimate,
    variance=variance,
  )


def predict_point(
  samples: List[Sample], target: Point2D, model: VariogramModel, config: KrigingConfig
) -> Tuple[float, float]:
  """Kriged estimate and variance at ``target``."""
  solution = solve_weights(samples, target, model, config)
  return solution.estimate, solution.variance


def _predict_global(
  prepared: PreparedSamples,
  cells: np.ndarray,
  model: VariogramModel,
  jitter: float,
  threads: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
  factors = factor_system(prepared.xy, model, jitter)
  n = len(prepared)

  def run(start: int) -> Tuple[np.ndarray, np.ndarray]:
    block = cells[start : start + GRID_CHUNK]
    gamma = np.asarray(model_eval(model, cdist(block, prepared.xy))).T
    rhs = np.vstack([gamma, np.ones((1, len(block)))])
    x = lu_solve(factors, rhs, check_finite=False)
    estimates = prepared.z @ x[:n]
    variances = np.einsum('ij,ij->j', x[:n], gamma) + x[n]
    return estimates, np.maximum(variances, 0.0)

  starts = list(range(0, len(cells), GRID_CHUNK))
  parts = _map(run, starts, threads)
  estimates = np.concatenate([p[0] for p in parts])
  variances = np.concatenate([p[1] for p in parts])
  return estimates, variances, np.ones(len(cells), dtype=bool)


def _predict_nearest(
  prepared: PreparedSamples,
  cells: np.ndarray,
  model: VariogramModel,
  config: KrigingConfig,
  threads: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
  index = GridIndex(prepared.xy, config.max_radius)
  estimates = np.zeros(len(cells))
  variances = np.zeros(len(cells))
  solved = np.zeros(len(cells), dtype=bool)

  def run(start: int) -> None:
    for c in range(start, min(start + GRID_CHUNK, len(cells))):
      selected = _select(prepared, cells[c], config, index)
      if selected.size == 0:
        continue
      _, _, estimates[c], variances[c] = _solve_local(
        prepared.xy[selected], prepared.z[selected], cells[c], model, config.jitter
      )
      solved[c] = True

  _map(run, list(range(0, len(cells), GRID_CHUNK)), threads)
  return estimates, variances, solved


def _map(func, items: list, threads: int) -> list:
  if threads > 1 and len(items) > 1:
    with ThreadPoolExecutor(max_workers=threads) as pool:
      return list(pool.map(func, items))
  return [func(item) for item in items]


def predict_grid(
  samples: List[Sample],
  grid: Raster,
  model: VariogramModel,
  config: KrigingConfig,
  threads: int = 1,
) -> Tuple[Raster, Raster]:
  """Krige every cell center of ``grid``.

  Only the geometry of ``grid`` is used. Cells without samples in their neighborhood get an
  estimate of 0 and a no-data variance.

  Returns:
    (estimates, variances) on the grid's geometry and no-data sentinel.
  """
  if grid.n_rows == 0 or grid.n_cols == 0:
    raise InvalidArgumentError('grid has no cells')
  prepared = prepare_samples(samples, config.duplicate_policy)
  if not len(prepared):
    raise InsufficientDataError('grid kriging needs at least one sample')
  config = resolve_neighborhood(config, len(prepared), model)
  cells = grid.cell_centers()

  if config.neighborhood == NeighborhoodKind.GLOBAL:
    estimates, variances, solved = _predict_global(
      prepared, cells, model, config.jitter, threads
    )
  else:
    estimates, variances, solved = _predict_nearest(prepared, cells, model, config, threads)

  empty = int(np.count_nonzero(~solved))
  if empty:
    logger.info('kriging: %d cells have an empty neighborhood', empty)
  shape = (grid.n_rows, grid.n_cols)
  variances = np.where(solved, variances, grid.nodata)
  return (
    grid.with_values(estimates.reshape(shape)),
    grid.with_values(variances.reshape(shape)),
  )

