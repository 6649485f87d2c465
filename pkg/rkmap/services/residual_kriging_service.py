"""Residual kriging: krige regression residuals and add them back to the prediction raster."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np

from rkmap.errors import (
  FitConvergenceError,
  InsufficientDataError,
  InvalidArgumentError,
  PipelineError,
  RkMapError,
)
from rkmap.models.geometry_models import Aabb, Raster, Sample, TrackAzimuthClass, sample_coordinates
from rkmap.models.pipeline_models import (
  FitAlongTrack,
  MultiSiteResult,
  ProvidedModel,
  RkConfig,
  RkDiagnostics,
  RkOutput,
  SiteInput,
  SiteResult,
  SiteStatus,
)
from rkmap.models.variogram_models import (
  EmpiricalSemivariogram,
  FitResult,
  VariogramKind,
  VariogramModel,
)
from rkmap.services.kriging_service import predict_grid, resolve_neighborhood
from rkmap.services.raster_service import add_rasters, buffer_extent, crop, residuals_with_summary
from rkmap.services.semivariogram_service import empirical_directional, filter_samples
from rkmap.services.validation_service import pooled_metrics
from rkmap.services.variogram_fit_service import fit, fit_combined

logger = logging.getLogger(__name__)


def along_track_semivariograms(
  residuals: List[Sample], source: FitAlongTrack, threads: int = 1
) -> List[EmpiricalSemivariogram]:
  """Directional semivariogram of each azimuth class along its own track direction.

  Classes with fewer than two samples or no populated bin are skipped.
  """
  result: List[EmpiricalSemivariogram] = []
  for azimuth_class, azimuth in (
    (TrackAzimuthClass.NWD, source.azimuth_nwd),
    (TrackAzimuthClass.SWD, source.azimuth_swd),
  ):
    subset = filter_samples(residuals, azimuth_class=azimuth_class)
    if len(subset) < 2:
      logger.info('rk: %d %s samples, skipping its semivariogram', len(subset), azimuth_class.value)
      continue
    sv = empirical_directional(
      subset,
      bin_width=source.bin_width,
      max_lag=source.max_lag,
      azimuth_deg=azimuth,
      tolerance_deg=source.tolerance_deg,
      threads=threads,
    )
    if sv.populated:
      result.append(sv)
  return result


def _pure_nugget(residuals: List[Sample], max_lag: float) -> VariogramModel:
  """Pure-nugget model at the residual variance.

  A zero level would leave the kriging system singular; any positive level gives the same
  weights, so a constant residual field falls back to a unit level.
  """
  level = float(np.var([s.value for s in residuals])) or 1.0
  return VariogramModel(kind=VariogramKind.EXPONENTIAL, nugget=level, sill=level, range=max_lag)


def resolve_model(
  residuals: List[Sample], config: RkConfig, diagnostics: RkDiagnostics
) -> Tuple[VariogramModel, Optional[FitResult]]:
  """Variogram model of the run: the provided one, or a fit to the along-track semivariograms.

  A fit that is degenerate or lacks data falls back to a pure-nugget model, flagged in
  ``diagnostics``.
  """
  source = config.semivariogram_source
  if isinstance(source, ProvidedModel):
    return source.model, None

  svs = along_track_semivariograms(residuals, source, config.threads)
  try:
    if len(svs) == 2:
      result = fit_combined(svs[0], svs[1], source.kind, source.weighting)
    elif len(svs) == 1:
      result = fit(svs[0], source.kind, source.weighting)
    else:
      raise InsufficientDataError('no along-track semivariogram could be computed')
  except (InsufficientDataError, FitConvergenceError) as exc:
    logger.warning('rk: %s; kriging with a pure-nugget model', exc.detail)
    diagnostics.fit_degenerate = True
    return _pure_nugget(residuals, source.max_lag), None

  if result.degenerate:
    logger.warning('rk: flat semivariogram; kriging with a pure-nugget model')
    diagnostics.fit_degenerate = True
    if result.model.sill == 0:
      return _pure_nugget(residuals, source.max_lag), result
  logger.info(
    'rk: fitted %s nugget=%.4g sill=%.4g range=%.1f r2=%.4f',
    result.model.kind.value,
    result.model.nugget,
    result.model.sill,
    result.model.range,
    result.r_squared,
  )
  return result.model, result


def _select_samples(
  observed: List[Sample], buffered: Aabb, config: RkConfig, diagnostics: RkDiagnostics
) -> List[Sample]:
  kept = observed
  if config.beam_filter is not None:
    kept = filter_samples(observed, beam=config.beam_filter)
    diagnostics.samples_beam_filtered = len(observed) - len(kept)
  if kept:
    inside = buffered.contains(sample_coordinates(kept))
    diagnostics.samples_outside_buffer = int(np.count_nonzero(~inside))
    kept = [s for s, ok in zip(kept, inside) if ok]
  return kept


def run_rk(
  observed: List[Sample],
  prediction: Raster,
  site: Aabb,
  config: Optional[RkConfig] = None,
  name: Optional[str] = None,
) -> RkOutput:
  """Correct ``prediction`` over ``site`` with kriged residuals of ``observed``.

  Samples are beam-filtered and restricted to the buffered site, residuals are kriged over the
  prediction cells inside the buffer and added back, then every raster is cropped to ``site``.

  Raises:
    PipelineError: no usable residual, or any stage failed; carries ``name``.
  """
  config = config or RkConfig()
  started = time.perf_counter()
  diagnostics = RkDiagnostics(samples_in=len(observed))
  try:
    buffered = buffer_extent(site, config.buffer_margin)
    selected = _select_samples(observed, buffered, config, diagnostics)
    residual_samples, skipped = residuals_with_summary(selected, prediction)
    diagnostics.samples_outside_raster = skipped.outside_raster
    diagnostics.samples_on_nodata = skipped.on_nodata
    if not residual_samples:
      raise PipelineError('no usable samples', site=name)

    model, fit_result = resolve_model(residual_samples, config, diagnostics)
    positions = {(s.position.x, s.position.y) for s in residual_samples}
    diagnostics.duplicates_merged = len(residual_samples) - len(positions)
    diagnostics.samples_used = len(positions)
    resolved = resolve_neighborhood(config.kriging, len(positions), model)
    diagnostics.neighborhood = resolved.neighborhood

    work = crop(prediction, buffered)
    kriged, variance = predict_grid(residual_samples, work, model, config.kriging, config.threads)
    diagnostics.empty_neighborhood_cells = int(np.count_nonzero(~variance.valid))
    corrected, propagated = add_rasters(work, kriged)
    diagnostics.nodata_propagated_cells = propagated
    if propagated:
      logger.info('rk: %d cells keep no-data from the prediction raster', propagated)

    diagnostics.seconds = time.perf_counter() - started
    output = RkOutput(
      corrected=crop(corrected, site),
      kriged_residuals=crop(kriged, site),
      kriging_variance=crop(variance, site),
      model=model,
      fit=fit_result,
      diagnostics=diagnostics,
    )
  except PipelineError:
    raise
  except RkMapError as exc:
    raise PipelineError(exc.detail, site=name) from exc

  logger.info(
    'rk%s: %d samples used, %.2f s',
    f' [{name}]' if name else '',
    diagnostics.samples_used,
    diagnostics.seconds,
  )
  return output


def _site_errors(output: RkOutput, site: SiteInput) -> Tuple[List[float], List[float]]:
  if site.reference is None:
    return [], []
  reference = crop(site.reference, site.site)
  corrected = output.corrected
  if not reference.same_geometry(corrected):
    raise InvalidArgumentError('reference raster does not align with the prediction raster')
  valid = corrected.valid & reference.valid
  errors = corrected.values[valid] - reference.values[valid]
  return errors.tolist(), reference.values[valid].tolist()


def run_site(site: SiteInput, config: RkConfig) -> SiteResult:
  """Run one site, turning failures into a failed result."""
  try:
    output = run_rk(site.observed, site.prediction, site.site, config, name=site.name)
    errors, reference_values = _site_errors(output, site)
  except RkMapError as exc:
    logger.error('rk [%s] failed: %s', site.name, exc.detail)
    return SiteResult(name=site.name, status=SiteStatus.FAILED, error=exc.detail)
  return SiteResult(
    name=site.name,
    status=SiteStatus.OK,
    output=output,
    errors=errors,
    reference_values=reference_values,
  )


def run_rk_multi(sites: List[SiteInput], config: Optional[RkConfig] = None) -> MultiSiteResult:
  """Run independent sites concurrently, keeping input order, and pool their errors.

  Pooled metrics are computed when at least one successful site has a reference raster.
  """
  if not sites:
    raise InvalidArgumentError('at least one site is required')
  config = config or RkConfig()

  if config.threads > 1 and len(sites) > 1:
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
      results = list(pool.map(lambda s: run_site(s, config), sites))
  else:
    results = [run_site(s, config) for s in sites]

  pooled = None
  with_errors = [r for r in results if r.errors]
  if with_errors:
    pooled = pooled_metrics(
      [np.array(r.errors) for r in with_errors],
      [np.array(r.reference_values) for r in with_errors],
    )
  failed = sum(r.status == SiteStatus.FAILED for r in results)
  if failed:
    logger.warning('rk: %d of %d sites failed', failed, len(results))
  return MultiSiteResult(sites=results, pooled=pooled)
