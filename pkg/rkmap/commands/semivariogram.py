"""Empirical semivariogram and periodicity commands."""

import logging
from typing import Optional

import click

from rkmap.config import RunConfig
from rkmap.models.geometry_models import BeamClass, TrackAzimuthClass
from rkmap.services.io_service import read_bins, read_points, write_bins, write_periodicity
from rkmap.services.semivariogram_service import (
  empirical,
  empirical_directional,
  filter_samples,
  periodicity_score,
)

from .common import print_table

logger = logging.getLogger(__name__)


@click.command('semivariogram')
@click.argument('points', type=click.Path(exists=True, dir_okay=False))
@click.option('-o', '--output', required=True, type=click.Path(dir_okay=False), help='Bin CSV')
@click.option('--bin-width', type=float, help='Lag bin width in meters (default 100)')
@click.option('--max-lag', type=float, help='Largest lag in meters (default 10000)')
@click.option('--azimuth', type=float, help='Direction in degrees from north; omit for all')
@click.option('--tolerance', type=float, help='Angular tolerance in degrees (default 1)')
@click.option('--beam', type=click.Choice([b.value for b in BeamClass]))
@click.option('--azimuth-class', type=click.Choice([a.value for a in TrackAzimuthClass]))
@click.option('--max-samples', type=int, help='Subsample to at most this many points')
@click.option('--seed', type=int, help='Seed of the subsampling')
@click.option('--report', is_flag=True, help='Print bin and pair counts')
@click.pass_obj
def semivariogram_command(
  config: RunConfig,
  points: str,
  output: str,
  bin_width: Optional[float],
  max_lag: Optional[float],
  azimuth: Optional[float],
  tolerance: Optional[float],
  beam: Optional[str],
  azimuth_class: Optional[str],
  max_samples: Optional[int],
  seed: Optional[int],
  report: bool,
):
  """Bin half squared differences of POINTS by separation distance."""
  config = config.merged(
    bin_width=bin_width,
    max_lag=max_lag,
    azimuth=azimuth,
    tolerance=tolerance,
    beam=beam,
    azimuth_class=azimuth_class,
    max_samples=max_samples,
    seed=seed,
  )
  samples = filter_samples(read_points(points), config.beam, config.azimuth_class)
  logger.info('semivariogram: %d samples after filtering', len(samples))
  if config.azimuth is None:
    sv = empirical(
      samples,
      config.bin_width,
      config.max_lag,
      max_samples=config.max_samples,
      seed=config.seed,
      threads=config.threads,
    )
  else:
    sv = empirical_directional(
      samples,
      config.bin_width,
      config.max_lag,
      config.azimuth,
      config.tolerance,
      max_samples=config.max_samples,
      seed=config.seed,
      threads=config.threads,
    )
  write_bins(output, sv)

  if report:
    populated = sv.populated
    print_table(
      'semivariogram',
      [
        ('samples', str(len(samples))),
        ('direction', 'all' if config.azimuth is None else f'{config.azimuth:g}'),
        ('populated bins', f'{len(populated)} of {len(sv.bins)}'),
        ('pairs', str(sum(b.pair_count for b in populated))),
        ('coincident pairs', str(sv.coincident_pairs)),
      ],
    )


@click.command('periodicity')
@click.argument('bins', type=click.Path(exists=True, dir_okay=False))
@click.option('--period', type=float, help='Period in meters (default 600)')
@click.option('--bin-width', type=float, help='Bin width of BINS (default 100)')
@click.option('--max-lag', type=float, help='max_lag of BINS (default: last bin edge)')
@click.option('-o', '--output', type=click.Path(dir_okay=False), help='Per-multiple ratio CSV')
@click.pass_obj
def periodicity_command(
  config: RunConfig,
  bins: str,
  period: Optional[float],
  bin_width: Optional[float],
  max_lag: Optional[float],
  output: Optional[str],
):
  """Score semivariance peaks of BINS at multiples of a period."""
  config = config.merged(period=period, bin_width=bin_width)
  sv = read_bins(bins, config.bin_width, max_lag)
  score = periodicity_score(sv, config.period)
  if output:
    write_periodicity(output, score)
  print_table(
    'periodicity',
    [
      ('period', f'{score.period:g}'),
      ('score', f'{score.score:.4f}'),
      ('peak lags', ', '.join(f'{lag:g}' for lag in score.peak_lags) or '-'),
    ],
  )
