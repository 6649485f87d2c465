"""Closed-form variogram models and weighted least-squares fitting.

Ranges follow the practical-range convention: exponential and gaussian models reach 95% of the
partial sill at ``range``.
"""

import logging
import math
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import minimize

from rkmap.errors import FitConvergenceError, InsufficientDataError, InvalidArgumentError
from rkmap.models.variogram_models import (
  EmpiricalSemivariogram,
  FitResult,
  LagBin,
  VariogramKind,
  VariogramModel,
  Weighting,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

RANGE_STARTS = (0.25, 0.5, 1.0, 2.0)
MAX_EVALUATIONS = 4000


def _shape(kind: VariogramKind, h: np.ndarray, r: float) -> np.ndarray:
  """Normalized structure function rising from 0 at h = 0 to 1 at the sill."""
  if kind == VariogramKind.EXPONENTIAL:
    return 1.0 - np.exp(-3.0 * h / r)
  if kind == VariogramKind.GAUSSIAN:
    return 1.0 - np.exp(-3.0 * (h / r) ** 2)
  t = np.minimum(h / r, 1.0)
  if kind == VariogramKind.SPHERICAL:
    return 1.5 * t - 0.5 * t**3
  if kind == VariogramKind.LINEAR:
    return t
  if kind == VariogramKind.CIRCULAR:
    return 1.0 - (2.0 / math.pi) * (np.arccos(t) - t * np.sqrt(1.0 - t**2))
  raise InvalidArgumentError(f'unknown variogram kind {kind}')


def model_eval(model: VariogramModel, h: ArrayLike) -> ArrayLike:
  """Semivariance at lag(s) ``h``; exactly 0 at h = 0 and nugget + structure beyond.

  Raises:
    InvalidArgumentError: if any lag is negative.
  """
  lags = np.asarray(h, dtype=float)
  if np.any(lags < 0):
    raise InvalidArgumentError('lag must be >= 0')
  gamma = model.nugget + model.partial_sill * _shape(model.kind, lags, model.range)
  gamma = np.where(lags == 0, 0.0, np.minimum(gamma, model.sill))
  if np.ndim(h) == 0:
    return float(gamma)
  return gamma


def covariance_from_model(model: VariogramModel, h: ArrayLike) -> ArrayLike:
  """Covariance ``sill - gamma(h)`` under second-order stationarity."""
  gamma = model_eval(model, h)
  if np.ndim(h) == 0:
    return model.sill - gamma
  return model.sill - np.asarray(gamma)


def _populated_arrays(sv: EmpiricalSemivariogram) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
  populated = sv.populated
  lags = np.array([b.lag_center for b in populated])
  gamma = np.array([b.semivariance for b in populated], dtype=float)
  counts = np.array([b.pair_count for b in populated], dtype=float)
  return lags, gamma, counts


def _weights(weighting: Weighting, counts: np.ndarray) -> np.ndarray:
  if weighting == Weighting.PAIR_COUNT:
    return counts / counts.sum()
  return np.full(len(counts), 1.0 / len(counts))


def _r_squared(rss: float, gamma: np.ndarray, w: np.ndarray) -> float:
  mean = float(np.sum(w * gamma) / np.sum(w))
  tss = float(np.sum(w * (gamma - mean) ** 2))
  if tss == 0:
    return 1.0 if rss == 0 else -math.inf
  return min(1.0, 1.0 - rss / tss)


def fit(
  sv: EmpiricalSemivariogram,
  kind: VariogramKind = VariogramKind.EXPONENTIAL,
  weighting: Weighting = Weighting.PAIR_COUNT,
) -> FitResult:
  """Least-squares fit of ``kind`` to the populated bins of ``sv``.

  Parameters are searched in units of the largest bin semivariance and of max_lag, from a
  fixed grid of starting points; the lowest weighted residual sum of squares wins, ties going
  to the earlier start. A flat semivariogram yields a flagged pure-nugget result.

  Raises:
    InsufficientDataError: fewer than three populated bins, or populated bins that do not
      reach both below and above one bin width.
    FitConvergenceError: no start converged; ``best_so_far`` carries the lowest-residual
      unconverged parameters when any were finite.
  """
  lags, gamma, counts = _populated_arrays(sv)
  if len(lags) < 3:
    raise InsufficientDataError(f'fit needs >= 3 populated bins, got {len(lags)}')
  if not (lags.min() < sv.bin_width < lags.max()):
    raise InsufficientDataError(
      f'fit needs populated lags below and above {sv.bin_width:g}, '
      f'got {lags.min():g}..{lags.max():g}'
    )
  w = _weights(weighting, counts)

  if np.all(gamma == gamma[0]):
    level = float(gamma[0])
    logger.info('fit: flat semivariogram at %.6g, returning pure-nugget model', level)
    model = VariogramModel(kind=kind, nugget=level, sill=level, range=sv.max_lag)
    return FitResult(
      model=model, r_squared=1.0, residual_sum_squares=0.0, bins_used=len(lags), degenerate=True
    )

  scale = float(gamma.max())
  if scale == 0:
    scale = 1.0
  lag_scale = sv.max_lag
  g = gamma / scale
  x = lags / lag_scale

  def objective(params: np.ndarray) -> float:
    nugget, partial, r = params
    predicted = nugget + partial * _shape(kind, x, r)
    return float(np.sum(w * (predicted - g) ** 2))

  bounds = [(0.0, None), (0.0, None), (1e-6, None)]
  starts = [
    np.array([nugget, max(1.0 - nugget, 1e-3), factor])
    for nugget in (0.0, float(g.min()))
    for factor in RANGE_STARTS
  ]

  best: Optional[Tuple[float, np.ndarray]] = None
  unconverged: Optional[Tuple[float, np.ndarray]] = None
  for start in starts:
    result = minimize(
      objective,
      start,
      method='Nelder-Mead',
      bounds=bounds,
      options={
        'xatol': 1e-9,
        'fatol': 1e-13,
        'maxfev': MAX_EVALUATIONS,
        'maxiter': MAX_EVALUATIONS,
      },
    )
    if not np.all(np.isfinite(result.x)):
      continue
    value = objective(result.x)
    if not result.success:
      logger.debug('fit: %s start %s stopped: %s', kind.value, start, result.message)
      if unconverged is None or value < unconverged[0]:
        unconverged = (value, result.x)
      continue
    if best is None or value < best[0]:
      best = (value, result.x)

  if best is None:
    best_so_far = None
    if unconverged is not None:
      best_so_far = _to_result(kind, unconverged[1], scale, lag_scale, lags, gamma, w)
    raise FitConvergenceError(
      f'{kind.value} fit did not converge from any start', best_so_far=best_so_far
    )
  return _to_result(kind, best[1], scale, lag_scale, lags, gamma, w)


def _to_result(
  kind: VariogramKind,
  params: np.ndarray,
  scale: float,
  lag_scale: float,
  lags: np.ndarray,
  gamma: np.ndarray,
  w: np.ndarray,
) -> FitResult:
  nugget, partial, r = (float(v) for v in params)
  model = VariogramModel(
    kind=kind,
    nugget=nugget * scale,
    sill=(nugget + partial) * scale,
    range=r * lag_scale,
  )
  rss = float(np.sum(w * (np.asarray(model_eval(model, lags)) - gamma) ** 2))
  return FitResult(
    model=model,
    r_squared=_r_squared(rss, gamma, w),
    residual_sum_squares=rss,
    bins_used=len(lags),
  )


def merge(sv_a: EmpiricalSemivariogram, sv_b: EmpiricalSemivariogram) -> EmpiricalSemivariogram:
  """Pool two semivariograms on the same bin grid by pair-count weighted averaging."""
  if not sv_a.same_grid(sv_b):
    raise InvalidArgumentError('semivariograms differ in bin_width or max_lag')
  bins: List[LagBin] = []
  for a, b in zip(sv_a.bins, sv_b.bins):
    count = a.pair_count + b.pair_count
    if count == 0:
      semivariance = None
    elif b.pair_count == 0:
      semivariance = a.semivariance
    elif a.pair_count == 0:
      semivariance = b.semivariance
    else:
      semivariance = (a.pair_count * a.semivariance + b.pair_count * b.semivariance) / count
    bins.append(
      LagBin(lag_lo=a.lag_lo, lag_hi=a.lag_hi, semivariance=semivariance, pair_count=count)
    )
  return EmpiricalSemivariogram(
    bins=bins,
    bin_width=sv_a.bin_width,
    max_lag=sv_a.max_lag,
    coincident_pairs=sv_a.coincident_pairs + sv_b.coincident_pairs,
  )


def fit_combined(
  sv_a: EmpiricalSemivariogram,
  sv_b: EmpiricalSemivariogram,
  kind: VariogramKind = VariogramKind.EXPONENTIAL,
  weighting: Weighting = Weighting.PAIR_COUNT,
) -> FitResult:
  """Fit one model to the pooled pairs of two semivariograms."""
  return fit(merge(sv_a, sv_b), kind, weighting)


def select_kind(
  sv: EmpiricalSemivariogram, weighting: Weighting = Weighting.PAIR_COUNT
) -> FitResult:
  """Fit every kind and keep the highest R², earlier kinds winning ties."""
  best: Optional[FitResult] = None
  for kind in VariogramKind:
    try:
      result = fit(sv, kind, weighting)
    except FitConvergenceError as exc:
      logger.warning('fit: %s', exc.detail)
      continue
    logger.debug('fit: %s r2=%.6f', kind.value, result.r_squared)
    if best is None or result.r_squared > best.r_squared:
      best = result
  if best is None:
    raise FitConvergenceError('no variogram kind could be fitted')
  return best
