"""Option parsing and output helpers shared by the subcommands."""

from pathlib import Path
from typing import List, Optional, Tuple

import click
import numpy as np
from rich.console import Console
from rich.table import Table

from rkmap.errors import InvalidArgumentError
from rkmap.models.geometry_models import DEFAULT_NODATA, Aabb, Raster
from rkmap.models.validation_models import MetricSet
from rkmap.models.variogram_models import VariogramModel
from rkmap.services.io_service import read_fit, read_grid

console = Console()


def parse_floats(text: str, count: int, name: str) -> List[float]:
  """``count`` comma-separated numbers, or a usage error naming the option."""
  parts = [p.strip() for p in text.split(',')]
  try:
    values = [float(p) for p in parts]
  except ValueError:
    raise click.BadParameter(
      f'expected {count} comma-separated numbers, got {text!r}', param_hint=name
    )
  if len(values) != count:
    raise click.BadParameter(f'expected {count} numbers, got {len(values)}', param_hint=name)
  return values


def parse_extent(text: str, name: str = '--extent') -> Aabb:
  xmin, ymin, xmax, ymax = parse_floats(text, 4, name)
  if xmin > xmax or ymin > ymax:
    raise click.BadParameter(f'min corner must not exceed max corner: {text}', param_hint=name)
  return Aabb.from_bounds(xmin, ymin, xmax, ymax)


def parse_point(text: str, name: str) -> Tuple[float, float]:
  x, y = parse_floats(text, 2, name)
  return x, y


def load_model(path: Optional[str]) -> Optional[VariogramModel]:
  return read_fit(path).model if path else None


def grid_spec(
  template: Optional[str], extent: Optional[str], cell_size: Optional[float]
) -> Raster:
  """Target grid from a template raster, or from an extent tiled with square cells."""
  if template:
    return read_grid(template)
  if not extent or not cell_size:
    raise click.UsageError('give --template, or --extent together with --cell-size')
  box = parse_extent(extent)
  n_cols = int(np.ceil(round(box.width / cell_size, 9)))
  n_rows = int(np.ceil(round(box.height / cell_size, 9)))
  if n_cols < 1 or n_rows < 1:
    raise InvalidArgumentError(f'extent {extent} holds no cell of size {cell_size}')
  return Raster.filled(box.min, cell_size, n_rows, n_cols, nodata=DEFAULT_NODATA)


def output_dir(path: str) -> Path:
  directory = Path(path)
  directory.mkdir(parents=True, exist_ok=True)
  return directory


def print_table(title: str, rows: List[Tuple[str, str]]) -> None:
  """Two-column report on standard output."""
  table = Table(title=title, show_header=False)
  table.add_column('item', style='cyan')
  table.add_column('value', justify='right')
  for label, value in rows:
    table.add_row(label, value)
  console.print(table)


def metric_rows(label: str, metrics: MetricSet) -> List[Tuple[str, str]]:
  """Report rows of one metric set; undefined values print as '-'."""

  def shown(value: Optional[float]) -> str:
    return '-' if value is None else f'{value:.4f}'

  return [
    (f'{label} n', str(metrics.n)),
    (f'{label} bias', shown(metrics.bias)),
    (f'{label} rmse', shown(metrics.rmse)),
    (f'{label} rrmse', shown(metrics.rrmse)),
  ]
