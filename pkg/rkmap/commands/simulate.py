"""Synthetic scenario command."""

from typing import List, Optional

import click

from rkmap.config import RunConfig
from rkmap.models.geometry_models import BeamClass, TrackAzimuthClass
from rkmap.models.synthetic_models import GediPatternSpec, PassSpec, ScenarioSpec
from rkmap.models.variogram_models import VariogramKind, VariogramModel
from rkmap.services.io_service import write_grid, write_points
from rkmap.services.synthetic_service import simulate_scenario

from .common import output_dir, parse_extent, parse_floats, print_table


def parse_passes(text: str) -> List[PassSpec]:
  """Passes as ``class[:cross_offset]`` items, e.g. ``nwd,swd:300``."""
  passes: List[PassSpec] = []
  for item in (t.strip() for t in text.split(',') if t.strip()):
    name, _, offset = item.partition(':')
    try:
      azimuth_class = TrackAzimuthClass(name.lower())
      passes.append(PassSpec(azimuth_class=azimuth_class, cross_offset=float(offset or 0)))
    except ValueError:
      raise click.BadParameter(f'invalid pass {item!r}', param_hint='--passes')
  if not passes:
    raise click.BadParameter('at least one pass is required', param_hint='--passes')
  return passes


def parse_model(text: str, name: str) -> VariogramModel:
  """Model from ``[kind:]nugget,sill,range``; the kind defaults to exponential."""
  kind_name, _, numbers = text.rpartition(':')
  try:
    kind = VariogramKind(kind_name.strip().lower() or VariogramKind.EXPONENTIAL.value)
  except ValueError:
    choices = ', '.join(k.value for k in VariogramKind)
    raise click.BadParameter(f'unknown kind {kind_name!r}; use one of {choices}', param_hint=name)
  nugget, sill, model_range = parse_floats(numbers, 3, name)
  try:
    return VariogramModel(kind=kind, nugget=nugget, sill=sill, range=model_range)
  except ValueError as exc:
    raise click.BadParameter(str(exc), param_hint=name)


@click.command('simulate')
@click.option('--extent', required=True, help='xmin,ymin,xmax,ymax of the scenario')
@click.option('--out-dir', required=True, type=click.Path(file_okay=False))
@click.option('--cell-size', type=float, help='Raster cell size (default 100)')
@click.option('--seed', type=int)
@click.option('--passes', help='class[:cross_offset] items (default nwd), e.g. nwd,swd:300')
@click.option('--truth-mean', type=float, help='Mean of the truth field (default 30)')
@click.option('--truth-model', help='[kind:]nugget,sill,range (default exponential:0,16,4000)')
@click.option('--error-model', help='[kind:]nugget,sill,range (default exponential:2,20,2500)')
@click.option('--prediction-bias', type=float, help='Constant added to the prediction (default 0)')
@click.option('--coverage-bias', type=float, help='Offset of coverage beams (default -3)')
@click.option('--coverage-noise-sd', type=float, help='Noise of coverage beams (default 0)')
@click.option(
  '--coverage-track-bias-sd', type=float, help='Constant offset per coverage track (default 0)'
)
@click.option('--track-offset-sd', type=float, help='Cross-track position jitter (default 0)')
@click.option('--track-value-offset-sd', type=float, help='Value offset per track (default 0)')
@click.option('--noise-sd', type=float, help='Noise of every beam (default 0)')
@click.option('--report', is_flag=True, help='Print the scenario summary')
@click.pass_obj
def simulate_command(
  config: RunConfig,
  extent: str,
  out_dir: str,
  cell_size: Optional[float],
  seed: Optional[int],
  passes: Optional[str],
  truth_mean: Optional[float],
  truth_model: Optional[str],
  error_model: Optional[str],
  prediction_bias: Optional[float],
  coverage_bias: Optional[float],
  coverage_noise_sd: Optional[float],
  coverage_track_bias_sd: Optional[float],
  track_offset_sd: Optional[float],
  track_value_offset_sd: Optional[float],
  noise_sd: Optional[float],
  report: bool,
):
  """Write truth.asc, prediction.asc and points.csv of a synthetic site.

  Truth and prediction rasters hold at most 4000 cells; coarsen --cell-size for larger extents.
  """
  config = config.merged(
    cell_size=cell_size,
    seed=seed,
    passes=passes,
    truth_mean=truth_mean,
    truth_model=truth_model,
    error_model=error_model,
    prediction_bias=prediction_bias,
    coverage_bias=coverage_bias,
    coverage_noise_sd=coverage_noise_sd,
    coverage_track_bias_sd=coverage_track_bias_sd,
    track_offset_sd=track_offset_sd,
    track_value_offset_sd=track_value_offset_sd,
    noise_sd=noise_sd,
  )
  pattern = GediPatternSpec(
    extent=parse_extent(extent),
    passes=parse_passes(config.passes),
    azimuth_nwd=config.azimuth_nwd,
    azimuth_swd=config.azimuth_swd,
    coverage_bias=config.coverage_bias,
    coverage_noise_sd=config.coverage_noise_sd,
    coverage_track_bias_sd=config.coverage_track_bias_sd,
    per_track_offset_sd=config.track_offset_sd,
    track_value_offset_sd=config.track_value_offset_sd,
    observation_noise_sd=config.noise_sd,
    seed=config.seed,
  )
  spec = ScenarioSpec(
    pattern=pattern,
    cell_size=config.cell_size or 100.0,
    truth_mean=config.truth_mean,
    truth_model=parse_model(config.truth_model, '--truth-model'),
    error_model=parse_model(config.error_model, '--error-model'),
    prediction_bias=config.prediction_bias,
    seed=config.seed,
  )
  scenario = simulate_scenario(spec)
  directory = output_dir(out_dir)
  write_grid(directory / 'truth.asc', scenario.truth)
  write_grid(directory / 'prediction.asc', scenario.prediction)
  write_points(directory / 'points.csv', scenario.observed)

  if report:
    power = sum(1 for s in scenario.observed if s.beam == BeamClass.POWER)
    print_table(
      'simulate',
      [
        ('cells', f'{scenario.truth.n_rows} x {scenario.truth.n_cols}'),
        ('footprints', str(len(scenario.observed))),
        ('power footprints', str(power)),
        ('truth model', spec.truth_model.kind.value),
        ('error model', spec.error_model.kind.value),
      ],
    )
