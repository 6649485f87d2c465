"""Empirical semivariogram estimation and periodicity diagnostics.

Pairs are accumulated in fixed-size chunks of the first pair index. Each chunk produces partial
per-bin sums and the partial sums are added in chunk order, so results do not depend on how
many threads evaluate the chunks.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np

from rkmap.errors import InsufficientDataError, InvalidArgumentError, PeriodicityError
from rkmap.models.geometry_models import (
  BeamClass,
  Sample,
  TrackAzimuthClass,
  sample_coordinates,
  sample_values,
)
from rkmap.models.variogram_models import (
  DEFAULT_BIN_WIDTH,
  DEFAULT_MAX_LAG,
  DEFAULT_TOLERANCE_DEG,
  Direction,
  EmpiricalSemivariogram,
  LagBin,
  PeriodicityScore,
)

logger = logging.getLogger(__name__)

CHUNK_ROWS = 256


def bin_edges(bin_width: float, max_lag: float) -> List[float]:
  """Lower edges of every bin followed by ``max_lag``."""
  n_bins = max(1, math.ceil(round(max_lag / bin_width, 9)))
  return [i * bin_width for i in range(n_bins)] + [max_lag]


def separation_azimuth(dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
  """Azimuth of separation vectors in degrees clockwise from north, folded into [0, 180)."""
  return np.mod(np.degrees(np.arctan2(dx, dy)), 180.0)


def azimuth_offset(azimuths: np.ndarray, azimuth_deg: float) -> np.ndarray:
  """Signed angular offset of each azimuth from ``azimuth_deg`` modulo 180, in [-90, 90)."""
  return np.mod(azimuths - azimuth_deg + 90.0, 180.0) - 90.0


def _chunk_sums(
  xy: np.ndarray,
  z: np.ndarray,
  start: int,
  stop: int,
  bin_width: float,
  max_lag: float,
  n_bins: int,
  direction: Optional[Direction],
) -> Tuple[np.ndarray, np.ndarray, int]:
  """Per-bin semivariance sums and counts of pairs (i, j) with start <= i < stop and i < j."""
  sums = np.zeros(n_bins)
  counts = np.zeros(n_bins, dtype=np.int64)
  coincident = 0
  n = len(z)
  for i in range(start, stop):
    if i + 1 >= n:
      break
    dx = xy[i + 1 :, 0] - xy[i, 0]
    dy = xy[i + 1 :, 1] - xy[i, 1]
    d = np.hypot(dx, dy)
    keep = d < max_lag
    zero = d == 0
    if direction is not None:
      offset = azimuth_offset(separation_azimuth(dx, dy), direction.azimuth_deg)
      keep &= (offset >= -direction.tolerance_deg) & (offset < direction.tolerance_deg)
    coincident += int(np.count_nonzero(zero & (d < max_lag)))
    keep &= ~zero
    if not keep.any():
      continue
    half_sq = 0.5 * (z[i + 1 :][keep] - z[i]) ** 2
    idx = np.minimum(np.floor(d[keep] / bin_width).astype(np.int64), n_bins - 1)
    sums += np.bincount(idx, weights=half_sq, minlength=n_bins)
    counts += np.bincount(idx, minlength=n_bins)
  return sums, counts, coincident


def _validate(n_samples: int, bin_width: float, max_lag: float) -> None:
  if n_samples < 2:
    raise InsufficientDataError(f'a semivariogram needs at least 2 samples, got {n_samples}')
  if not bin_width > 0:
    raise InvalidArgumentError(f'bin_width must be > 0, got {bin_width}')
  if not max_lag >= bin_width:
    raise InvalidArgumentError(f'max_lag {max_lag} must be >= bin_width {bin_width}')


def _subsample(
  samples: List[Sample], max_samples: Optional[int], seed: int
) -> List[Sample]:
  if max_samples is None or len(samples) <= max_samples:
    return samples
  rng = np.random.default_rng(seed)
  keep = np.sort(rng.choice(len(samples), size=max_samples, replace=False))
  logger.info('semivariogram: subsampled %d of %d samples', max_samples, len(samples))
  return [samples[i] for i in keep]


def _estimate(
  samples: List[Sample],
  bin_width: float,
  max_lag: float,
  direction: Optional[Direction],
  threads: int,
) -> EmpiricalSemivariogram:
  xy = sample_coordinates(samples)
  z = sample_values(samples)
  edges = bin_edges(bin_width, max_lag)
  n_bins = len(edges) - 1
  starts = list(range(0, len(z), CHUNK_ROWS))

  def run(start: int):
    return _chunk_sums(xy, z, start, start + CHUNK_ROWS, bin_width, max_lag, n_bins, direction)

  if threads > 1 and len(starts) > 1:
    with ThreadPoolExecutor(max_workers=threads) as pool:
      partials = list(pool.map(run, starts))
  else:
    partials = [run(start) for start in starts]

  sums = np.zeros(n_bins)
  counts = np.zeros(n_bins, dtype=np.int64)
  coincident = 0
  for chunk_sums, chunk_counts, chunk_coincident in partials:
    sums += chunk_sums
    counts += chunk_counts
    coincident += chunk_coincident
  if coincident:
    logger.info('semivariogram: excluded %d coincident pairs', coincident)

  bins = [
    LagBin(
      lag_lo=edges[i],
      lag_hi=edges[i + 1],
      semivariance=float(sums[i] / counts[i]) if counts[i] else None,
      pair_count=int(counts[i]),
    )
    for i in range(n_bins)
  ]
  return EmpiricalSemivariogram(
    bins=bins,
    bin_width=bin_width,
    max_lag=max_lag,
    direction=direction,
    coincident_pairs=coincident,
  )


def empirical(
  samples: List[Sample],
  bin_width: float = DEFAULT_BIN_WIDTH,
  max_lag: float = DEFAULT_MAX_LAG,
  max_samples: Optional[int] = None,
  seed: int = 0,
  threads: int = 1,
) -> EmpiricalSemivariogram:
  """Omnidirectional semivariogram: half mean squared difference of pairs per distance bin."""
  _validate(len(samples), bin_width, max_lag)
  samples = _subsample(samples, max_samples, seed)
  return _estimate(samples, bin_width, max_lag, None, threads)


def empirical_directional(
  samples: List[Sample],
  bin_width: float = DEFAULT_BIN_WIDTH,
  max_lag: float = DEFAULT_MAX_LAG,
  azimuth_deg: float = 0.0,
  tolerance_deg: float = DEFAULT_TOLERANCE_DEG,
  max_samples: Optional[int] = None,
  seed: int = 0,
  threads: int = 1,
) -> EmpiricalSemivariogram:
  """Semivariogram over pairs whose separation azimuth is within tolerance of ``azimuth_deg``.

  Azimuths are folded modulo 180 degrees; a pair passes when its signed offset lies in
  [-tolerance, +tolerance), so adjacent windows tile the half circle without overlap.
  """
  _validate(len(samples), bin_width, max_lag)
  if not 0 < tolerance_deg <= 90:
    raise InvalidArgumentError(f'tolerance must be in (0, 90], got {tolerance_deg}')
  direction = Direction(azimuth_deg=azimuth_deg, tolerance_deg=tolerance_deg)
  samples = _subsample(samples, max_samples, seed)
  return _estimate(samples, bin_width, max_lag, direction, threads)


def filter_samples(
  samples: List[Sample],
  beam: Optional[BeamClass] = None,
  azimuth_class: Optional[TrackAzimuthClass] = None,
) -> List[Sample]:
  """Samples matching every given criterion, in their original order."""
  return [
    s
    for s in samples
    if (beam is None or s.beam == beam)
    and (azimuth_class is None or s.azimuth_class == azimuth_class)
  ]


def _nearest_populated(
  sv: EmpiricalSemivariogram, lag: float, exclude: int
) -> Optional[int]:
  """Index of the populated bin closest to ``lag`` (by center), skipping ``exclude``."""
  best: Optional[int] = None
  best_distance = math.inf
  for index, lag_bin in enumerate(sv.bins):
    if index == exclude or not lag_bin.populated:
      continue
    distance = abs(lag_bin.lag_center - lag)
    if distance < best_distance:
      best, best_distance = index, distance
  return best


def periodicity_score(sv: EmpiricalSemivariogram, period: float) -> PeriodicityScore:
  """Mean ratio of semivariance at multiples of ``period`` to the local baseline.

  The baseline of multiple k is the mean semivariance of the populated bins nearest to
  k * period - period / 2 and k * period + period / 2 (the latter only below max_lag).
  """
  populated = sv.populated
  if not period > sv.bin_width:
    raise InvalidArgumentError(f'period {period} must exceed bin width {sv.bin_width}')
  if len(populated) < 3:
    raise PeriodicityError(f'need >= 3 populated bins, got {len(populated)}')
  span = populated[-1].lag_hi
  if span < 2 * period:
    raise PeriodicityError(
      f'populated bins span {span} m, need at least {2 * period} m', missing_lags=[2 * period]
    )

  multiples = [
    k * period for k in range(1, int(sv.max_lag // period) + 1) if k * period < sv.max_lag
  ]
  missing = [lag for lag in multiples if not sv.bins[sv.bin_index(lag)].populated]
  if missing:
    raise PeriodicityError(
      f'bins at lags {missing} are empty; cannot score period {period}', missing_lags=missing
    )

  ratios: List[float] = []
  peaks: List[float] = []
  for lag in multiples:
    peak_index = sv.bin_index(lag)
    baseline_lags = [lag - period / 2]
    if lag + period / 2 < sv.max_lag:
      baseline_lags.append(lag + period / 2)
    neighbors = [_nearest_populated(sv, b, exclude=peak_index) for b in baseline_lags]
    neighbors = [n for n in neighbors if n is not None]
    if not neighbors:
      raise PeriodicityError(f'no baseline bins around lag {lag}', missing_lags=baseline_lags)
    baseline = float(np.mean([sv.bins[n].semivariance for n in neighbors]))
    peak = sv.bins[peak_index].semivariance
    if baseline == 0:
      ratio = 1.0 if peak == 0 else math.inf
    else:
      ratio = peak / baseline
    ratios.append(ratio)
    if ratio > 1:
      peaks.append(lag)

  return PeriodicityScore(
    period=period, score=float(np.mean(ratios)), peak_lags=peaks, ratios=ratios
  )
