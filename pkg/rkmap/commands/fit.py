"""Variogram model fitting command."""

import logging
from typing import Optional

import click

from rkmap.config import RunConfig
from rkmap.models.variogram_models import VariogramKind, Weighting
from rkmap.services.io_service import read_bins, write_fit
from rkmap.services.variogram_fit_service import fit, merge, select_kind

from .common import print_table

logger = logging.getLogger(__name__)


@click.command('fit')
@click.argument('bins', nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('-o', '--output', required=True, type=click.Path(dir_okay=False), help='Fit block')
@click.option('--kind', type=click.Choice([k.value for k in VariogramKind] + ['auto']))
@click.option('--weighting', type=click.Choice([w.value for w in Weighting]))
@click.option('--bin-width', type=float, help='Bin width of BINS (default 100)')
@click.option('--max-lag', type=float, help='max_lag of BINS (default: last bin edge)')
@click.option('--report', is_flag=True, help='Print the fitted parameters')
@click.pass_obj
def fit_command(
  config: RunConfig,
  bins: tuple,
  output: str,
  kind: Optional[str],
  weighting: Optional[str],
  bin_width: Optional[float],
  max_lag: Optional[float],
  report: bool,
):
  """Fit a variogram model to one bin CSV, or to the pooled bins of two."""
  if len(bins) > 2:
    raise click.UsageError('fit takes one or two bin CSVs')
  config = config.merged(kind=kind, weighting=weighting, bin_width=bin_width)
  svs = [read_bins(path, config.bin_width, max_lag) for path in bins]
  if len(svs) == 2 and max_lag is None and svs[0].max_lag != svs[1].max_lag:
    # Without an explicit max_lag each file ends at its own last bin; align them.
    common = max(svs[0].max_lag, svs[1].max_lag)
    svs = [read_bins(path, config.bin_width, common) for path in bins]
  sv = merge(svs[0], svs[1]) if len(svs) == 2 else svs[0]

  if config.kind == 'auto':
    result = select_kind(sv, config.weighting)
  else:
    result = fit(sv, config.kind, config.weighting)
  if result.degenerate:
    logger.warning('fit: semivariogram is flat; wrote a pure-nugget model')
  write_fit(output, result)

  if report:
    model = result.model
    print_table(
      'fit',
      [
        ('kind', model.kind.value),
        ('nugget', f'{model.nugget:.4f}'),
        ('sill', f'{model.sill:.4f}'),
        ('range', f'{model.range:.1f}'),
        ('r2', f'{result.r_squared:.4f}'),
        ('bins used', str(result.bins_used)),
      ],
    )
