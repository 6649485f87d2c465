"""Residual kriging command for one site or a manifest of sites."""

import logging
from pathlib import Path
from typing import List, Optional

import click

from rkmap.config import RunConfig
from rkmap.errors import PipelineError
from rkmap.models.kriging_models import NeighborhoodKind
from rkmap.models.pipeline_models import RkConfig, RkOutput, SiteInput
from rkmap.models.variogram_models import VariogramKind, Weighting
from rkmap.services.io_service import (
  diagnostics_rows,
  read_grid,
  read_points,
  read_sites,
  write_fit,
  write_grid,
  write_site_statuses,
)
from rkmap.services.residual_kriging_service import run_rk, run_rk_multi

from .common import load_model, output_dir, parse_extent, print_table

logger = logging.getLogger(__name__)


def write_output(directory: Path, output: RkOutput) -> None:
  """Rasters of a run and, when fitted in the pipeline, its fit block."""
  write_grid(directory / 'corrected.asc', output.corrected)
  write_grid(directory / 'kriged_residuals.asc', output.kriged_residuals)
  write_grid(directory / 'kriging_variance.asc', output.kriging_variance)
  if output.fit is not None:
    write_fit(directory / 'fit.txt', output.fit)


def _run_manifest(manifest: str, rk_config: RkConfig, out_dir: Path, report: bool) -> None:
  sites: List[SiteInput] = []
  for entry in read_sites(manifest):
    sites.append(
      SiteInput(
        name=entry.name,
        observed=read_points(entry.points),
        prediction=read_grid(entry.prediction),
        site=parse_extent(f'{entry.xmin},{entry.ymin},{entry.xmax},{entry.ymax}', entry.name),
        reference=read_grid(entry.reference) if entry.reference else None,
      )
    )
  result = run_rk_multi(sites, rk_config)
  for site in result.sites:
    if site.output is None:
      continue
    write_output(output_dir(str(out_dir / site.name)), site.output)
    if report:
      print_table(site.name, diagnostics_rows(site.output))
  write_site_statuses(out_dir / 'sites.csv', result)

  failed = [s.name for s in result.sites if s.error]
  if failed:
    raise PipelineError(f'{len(failed)} of {len(result.sites)} sites failed: {", ".join(failed)}')


@click.command('rk')
@click.argument('points', required=False, type=click.Path(exists=True, dir_okay=False))
@click.argument('prediction', required=False, type=click.Path(exists=True, dir_okay=False))
@click.option('--site', help='xmin,ymin,xmax,ymax of the site (single-site mode)')
@click.option(
  '--sites', 'manifest', type=click.Path(exists=True, dir_okay=False),
  help='CSV manifest: name,points,prediction,xmin,ymin,xmax,ymax[,reference]',
)
@click.option('--out-dir', required=True, type=click.Path(file_okay=False), help='Output folder')
@click.option(
  '--model', 'model_path', type=click.Path(exists=True, dir_okay=False),
  help='Fit block to use instead of fitting along-track semivariograms',
)
@click.option('--buffer', type=float, help='Site buffer in meters (default 3000)')
@click.option('--beam-filter', type=click.Choice(['power', 'coverage', 'all']))
@click.option('--kind', type=click.Choice([k.value for k in VariogramKind]))
@click.option('--weighting', type=click.Choice([w.value for w in Weighting]))
@click.option('--bin-width', type=float)
@click.option('--max-lag', type=float)
@click.option('--tolerance', type=float)
@click.option('--neighborhood', type=click.Choice([n.value for n in NeighborhoodKind]))
@click.option('--k', type=int)
@click.option('--max-radius', type=float)
@click.option('--report', is_flag=True, help='Print the diagnostics of every site')
@click.pass_obj
def rk_command(
  config: RunConfig,
  points: Optional[str],
  prediction: Optional[str],
  site: Optional[str],
  manifest: Optional[str],
  out_dir: str,
  model_path: Optional[str],
  buffer: Optional[float],
  beam_filter: Optional[str],
  kind: Optional[str],
  weighting: Optional[str],
  bin_width: Optional[float],
  max_lag: Optional[float],
  tolerance: Optional[float],
  neighborhood: Optional[str],
  k: Optional[int],
  max_radius: Optional[float],
  report: bool,
):
  """Correct PREDICTION over a site with kriged residuals of POINTS."""
  config = config.merged(
    buffer=buffer,
    beam_filter=beam_filter,
    kind=kind,
    weighting=weighting,
    bin_width=bin_width,
    max_lag=max_lag,
    tolerance=tolerance,
    neighborhood=neighborhood,
    k=k,
    max_radius=max_radius,
  )
  rk_config = config.rk_config(load_model(model_path))
  directory = output_dir(out_dir)

  if manifest:
    if points or prediction or site:
      raise click.UsageError('--sites replaces POINTS, PREDICTION and --site')
    _run_manifest(manifest, rk_config, directory, report)
    return

  if not (points and prediction and site):
    raise click.UsageError('give POINTS, PREDICTION and --site, or --sites')
  output = run_rk(
    read_points(points), read_grid(prediction), parse_extent(site, '--site'), rk_config
  )
  write_output(directory, output)
  if report:
    print_table('rk', diagnostics_rows(output))
