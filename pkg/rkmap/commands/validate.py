"""Validation and transect commands."""

from typing import List, Optional, Tuple

import click

from rkmap.config import RunConfig, parse_radii
from rkmap.models.geometry_models import Point2D
from rkmap.services.io_service import (
  format_coordinate,
  read_grid,
  read_points,
  write_metrics,
  write_proximity,
  write_transect,
)
from rkmap.services.validation_service import (
  metrics,
  point_metrics,
  proximity_analysis,
  sample_along_segment,
)

from .common import load_model, metric_rows, parse_point, print_table


@click.command('validate')
@click.argument('predicted', type=click.Path(exists=True, dir_okay=False))
@click.option('--reference', type=click.Path(exists=True, dir_okay=False), help='Reference grid')
@click.option('--points', type=click.Path(exists=True, dir_okay=False), help='Sample points')
@click.option('--radii', help='Comma-separated radii; accepts inf and range')
@click.option(
  '--model', 'model_path', type=click.Path(exists=True, dir_okay=False),
  help='Fit block whose range resolves the "range" radius',
)
@click.option('--at-points', is_flag=True, help='Compare PREDICTED with the values of --points')
@click.option('-o', '--output', required=True, type=click.Path(dir_okay=False), help='Metrics CSV')
@click.option('--report', is_flag=True, help='Print the metrics')
@click.pass_obj
def validate_command(
  config: RunConfig,
  predicted: str,
  reference: Optional[str],
  points: Optional[str],
  radii: Optional[str],
  model_path: Optional[str],
  at_points: bool,
  output: str,
  report: bool,
):
  """Bias, RMSE and rRMSE of PREDICTED, overall or by distance to the samples."""
  config = config.merged(radii=radii)
  raster = read_grid(predicted)
  rows: List[Tuple[str, str]] = []

  if at_points:
    if not points:
      raise click.UsageError('--at-points needs --points')
    result = point_metrics(raster, read_points(points))
    write_metrics(output, result, label='points')
    rows = metric_rows('points', result)
  else:
    if not reference:
      raise click.UsageError('give --reference, or --points with --at-points')
    truth = read_grid(reference)
    if not points:
      result = metrics(raster, truth)
      write_metrics(output, result)
      rows = metric_rows('all', result)
    else:
      model = load_model(model_path)
      text = config.radii
      if model is None and radii is None:
        text = ','.join(t for t in text.split(',') if t.strip().lower() != 'range')
      selected = parse_radii(text, model.range if model else None)
      proximity = proximity_analysis(raster, truth, read_points(points), selected)
      write_proximity(output, proximity)
      for row in proximity.rows:
        rows.extend(metric_rows(f'R={format_coordinate(row.radius)}', row.metrics))

  if report:
    print_table('validate', rows)


@click.command('transect')
@click.argument('raster', type=click.Path(exists=True, dir_okay=False))
@click.option('--start', required=True, help='x,y of the first point')
@click.option('--end', required=True, help='x,y of the last point')
@click.option('--step', type=float, help='Spacing in meters (default 10)')
@click.option('-o', '--output', required=True, type=click.Path(dir_okay=False))
@click.pass_obj
def transect_command(
  config: RunConfig, raster: str, start: str, end: str, step: Optional[float], output: str
):
  """Sample RASTER every STEP meters along a straight segment."""
  config = config.merged(step=step)
  x0, y0 = parse_point(start, '--start')
  x1, y1 = parse_point(end, '--end')
  frame = sample_along_segment(
    read_grid(raster), Point2D(x=x0, y=y0), Point2D(x=x1, y=y1), config.step
  )
  write_transect(output, frame)
