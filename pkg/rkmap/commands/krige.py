"""Ordinary kriging command."""

from typing import Optional

import click

from rkmap.config import RunConfig
from rkmap.models.kriging_models import DuplicatePolicy, NeighborhoodKind
from rkmap.services.io_service import read_points, write_grid
from rkmap.services.kriging_service import predict_grid

from .common import grid_spec, load_model, print_table


@click.command('krige')
@click.argument('points', type=click.Path(exists=True, dir_okay=False))
@click.option(
  '--model', 'model_path', required=True, type=click.Path(exists=True, dir_okay=False),
  help='Fit block written by `rkmap fit`',
)
@click.option('--template', type=click.Path(exists=True, dir_okay=False), help='Grid to predict on')
@click.option('--extent', help='xmin,ymin,xmax,ymax of the target grid')
@click.option('--cell-size', type=float, help='Cell size with --extent')
@click.option('-o', '--output', required=True, type=click.Path(dir_okay=False), help='Estimates')
@click.option('--variance-output', type=click.Path(dir_okay=False), help='Kriging variance grid')
@click.option('--neighborhood', type=click.Choice([n.value for n in NeighborhoodKind]))
@click.option('--k', type=int, help='Samples per system in nearest mode')
@click.option('--max-radius', type=float, help='Search radius in nearest mode')
@click.option('--duplicate-policy', type=click.Choice([p.value for p in DuplicatePolicy]))
@click.option('--jitter', type=float, help='Initial diagonal ridge in units of the sill')
@click.option('--report', is_flag=True, help='Print grid and variance summary')
@click.pass_obj
def krige_command(
  config: RunConfig,
  points: str,
  model_path: str,
  template: Optional[str],
  extent: Optional[str],
  cell_size: Optional[float],
  output: str,
  variance_output: Optional[str],
  neighborhood: Optional[str],
  k: Optional[int],
  max_radius: Optional[float],
  duplicate_policy: Optional[str],
  jitter: Optional[float],
  report: bool,
):
  """Krige the values of POINTS onto a grid."""
  config = config.merged(
    neighborhood=neighborhood,
    k=k,
    max_radius=max_radius,
    duplicate_policy=duplicate_policy,
    jitter=jitter,
    cell_size=cell_size,
  )
  grid = grid_spec(template, extent, config.cell_size)
  samples = read_points(points)
  model = load_model(model_path)
  estimates, variances = predict_grid(
    samples, grid, model, config.kriging_config(), config.threads
  )
  write_grid(output, estimates)
  if variance_output:
    write_grid(variance_output, variances)

  if report:
    valid = variances.valid
    print_table(
      'krige',
      [
        ('samples', str(len(samples))),
        ('cells', f'{grid.n_rows} x {grid.n_cols}'),
        ('estimated cells', str(int(valid.sum()))),
        ('model', model.kind.value),
        ('neighborhood', config.neighborhood.value),
        (
          'mean variance',
          f'{float(variances.values[valid].mean()):.4f}' if valid.any() else '-',
        ),
      ],
    )
