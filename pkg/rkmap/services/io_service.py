"""Readers and writers for point CSVs, ASCII grids, bin CSVs, fit blocks and reports.

Numbers are written with at most six fractional digits, so files are byte-stable across runs.
"""

import math
from io import StringIO
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from dotenv import dotenv_values
from pydantic import BaseModel, ValidationError

from rkmap.errors import FormatError
from rkmap.models.geometry_models import (
  BeamClass,
  Point2D,
  Raster,
  Sample,
  TrackAzimuthClass,
)
from rkmap.models.pipeline_models import MultiSiteResult, RkOutput
from rkmap.models.validation_models import MetricSet, ProximityReport
from rkmap.models.variogram_models import (
  EmpiricalSemivariogram,
  FitResult,
  LagBin,
  PeriodicityScore,
  VariogramKind,
  VariogramModel,
)
from rkmap.services.semivariogram_service import bin_edges

PathLike = Union[str, Path]

POINT_COLUMNS = ['x', 'y', 'value', 'beam', 'azimuth_class', 'track_id']
BIN_COLUMNS = ['lag_center', 'semivariance', 'pair_count']
METRIC_COLUMNS = ['radius', 'n', 'bias', 'rmse', 'rrmse']
SITE_COLUMNS = ['name', 'points', 'prediction', 'xmin', 'ymin', 'xmax', 'ymax']
GRID_KEYS = ['ncols', 'nrows', 'xllcorner', 'yllcorner', 'cellsize', 'nodata_value']
FIT_KEYS = ['kind', 'nugget', 'sill', 'range', 'r_squared', 'bins_used', 'degenerate']
PRECISION = 6


def format_number(value: Optional[float]) -> str:
  """Decimal text with up to six fractional digits; empty for None, ``inf`` for infinity."""
  if value is None or (isinstance(value, float) and math.isnan(value)):
    return ''
  if math.isinf(value):
    return 'inf' if value > 0 else '-inf'
  text = np.format_float_positional(float(value), precision=PRECISION, unique=True, trim='0')
  return '0.0' if text == '-0.0' else text


def format_coordinate(value: Optional[float]) -> str:
  """Like format_number, but integral values drop the trailing '.0' (150.0 -> '150')."""
  text = format_number(value)
  return text[:-2] if text.endswith('.0') else text


def _write_frame(path: PathLike, frame: pd.DataFrame) -> None:
  frame.to_csv(path, index=False, lineterminator='\n')


def _read_frame(path: PathLike, columns: List[str], optional: Iterable[str] = ()) -> pd.DataFrame:
  """CSV as strings with lower-cased headers; required columns must come first, in order."""
  try:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
  except pd.errors.EmptyDataError:
    raise FormatError('file is empty', path=str(path), line=1)
  except pd.errors.ParserError as exc:
    raise FormatError(f'malformed CSV: {exc}', path=str(path))
  frame.columns = [str(c).strip().lower() for c in frame.columns]
  header = list(frame.columns)
  allowed = columns + [c for c in optional if c not in columns]
  if header[: len(columns)] != columns or not set(header) <= set(allowed):
    raise FormatError(
      f'expected header {",".join(columns)}, got {",".join(header)}', path=str(path), line=1
    )
  return frame


def _field(row: Dict[str, object], key: str, path: PathLike, line: int) -> str:
  value = row.get(key)
  if not isinstance(value, str):
    raise FormatError(f'missing field {key}', path=str(path), line=line)
  return value.strip()


def _number(row: Dict[str, object], key: str, path: PathLike, line: int) -> float:
  text = _field(row, key, path, line)
  try:
    value = float(text)
  except ValueError:
    raise FormatError(f'{key} is not a number: {text!r}', path=str(path), line=line)
  if not math.isfinite(value):
    raise FormatError(f'{key} must be finite, got {text}', path=str(path), line=line)
  return value


def read_points(path: PathLike) -> List[Sample]:
  """Samples of a point CSV (``x,y,value,beam,azimuth_class,track_id``).

  Raises:
    FormatError: bad header or any row that does not parse, with its line number.
  """
  frame = _read_frame(path, POINT_COLUMNS)
  samples: List[Sample] = []
  for offset, row in enumerate(frame.to_dict('records')):
    line = offset + 2
    x = _number(row, 'x', path, line)
    y = _number(row, 'y', path, line)
    value = _number(row, 'value', path, line)
    beam = _field(row, 'beam', path, line).lower()
    azimuth_class = _field(row, 'azimuth_class', path, line).lower()
    try:
      samples.append(
        Sample.at(
          x,
          y,
          value,
          beam=BeamClass(beam),
          azimuth_class=TrackAzimuthClass(azimuth_class),
          track_id=_field(row, 'track_id', path, line),
        )
      )
    except ValueError as exc:
      raise FormatError(f'invalid point: {exc}', path=str(path), line=line)
  return samples


def write_points(path: PathLike, samples: List[Sample]) -> None:
  rows = [
    {
      'x': format_coordinate(s.position.x),
      'y': format_coordinate(s.position.y),
      'value': format_number(s.value),
      'beam': s.beam.value,
      'azimuth_class': s.azimuth_class.value,
      'track_id': s.track_id,
    }
    for s in samples
  ]
  _write_frame(path, pd.DataFrame(rows, columns=POINT_COLUMNS))


def write_grid(path: PathLike, raster: Raster) -> None:
  """ESRI ASCII grid, rows from north to south."""
  header = [
    ('ncols', str(raster.n_cols)),
    ('nrows', str(raster.n_rows)),
    ('xllcorner', format_number(raster.origin.x)),
    ('yllcorner', format_number(raster.origin.y)),
    ('cellsize', format_number(raster.cell_size)),
    ('nodata_value', format_number(raster.nodata)),
  ]
  out = StringIO()
  for key, value in header:
    out.write(f'{key} {value}\n')
  for row in raster.values:
    out.write(' '.join(format_number(v) for v in row))
    out.write('\n')
  Path(path).write_text(out.getvalue())


def read_grid(path: PathLike) -> Raster:
  """Raster of an ESRI ASCII grid.

  Raises:
    FormatError: header keys out of order, or value rows of the wrong length or content.
  """
  lines = Path(path).read_text().splitlines()
  header: Dict[str, float] = {}
  for index, key in enumerate(GRID_KEYS):
    if index >= len(lines):
      raise FormatError(f'missing header key {key}', path=str(path), line=index + 1)
    parts = lines[index].split()
    if len(parts) != 2 or parts[0].lower() != key:
      raise FormatError(f'expected header key {key}', path=str(path), line=index + 1)
    try:
      header[key] = float(parts[1])
    except ValueError:
      raise FormatError(f'{key} is not a number: {parts[1]!r}', path=str(path), line=index + 1)

  n_cols, n_rows = int(header['ncols']), int(header['nrows'])
  if n_cols != header['ncols'] or n_rows != header['nrows'] or n_cols < 1 or n_rows < 1:
    raise FormatError('ncols and nrows must be positive integers', path=str(path), line=1)

  body = [(number, text) for number, text in enumerate(lines[6:], start=7) if text.strip()]
  if len(body) != n_rows:
    raise FormatError(f'expected {n_rows} value rows, got {len(body)}', path=str(path))
  values = np.empty((n_rows, n_cols))
  for r, (number, text) in enumerate(body):
    tokens = text.split()
    if len(tokens) != n_cols:
      raise FormatError(
        f'expected {n_cols} values, got {len(tokens)}', path=str(path), line=number
      )
    try:
      values[r] = [float(t) for t in tokens]
    except ValueError:
      raise FormatError('non-numeric value', path=str(path), line=number)

  try:
    return Raster(
      origin=Point2D(x=header['xllcorner'], y=header['yllcorner']),
      cell_size=header['cellsize'],
      values=values,
      nodata=header['nodata_value'],
    )
  except ValidationError as exc:
    raise FormatError(f'invalid grid: {exc}', path=str(path))


def write_bins(path: PathLike, sv: EmpiricalSemivariogram) -> None:
  """Populated bins as ``lag_center,semivariance,pair_count``."""
  rows = [
    {
      'lag_center': format_coordinate(b.lag_center),
      'semivariance': format_number(b.semivariance),
      'pair_count': str(b.pair_count),
    }
    for b in sv.populated
  ]
  _write_frame(path, pd.DataFrame(rows, columns=BIN_COLUMNS))


def read_bins(
  path: PathLike, bin_width: float, max_lag: Optional[float] = None
) -> EmpiricalSemivariogram:
  """Rebuild a semivariogram from its populated bins.

  ``max_lag`` defaults to the upper edge of the last listed bin.
  """
  frame = _read_frame(path, BIN_COLUMNS)
  entries: List[Tuple[float, float, int, int]] = []
  for offset, row in enumerate(frame.to_dict('records')):
    line = offset + 2
    center = _number(row, 'lag_center', path, line)
    semivariance = _number(row, 'semivariance', path, line)
    count = _number(row, 'pair_count', path, line)
    if count != int(count) or count < 1 or semivariance < 0:
      raise FormatError('pair_count must be a positive integer', path=str(path), line=line)
    entries.append((center, semivariance, int(count), line))
  if not entries:
    raise FormatError('no bins listed', path=str(path))

  if max_lag is None:
    max_lag = max(e[0] for e in entries) + bin_width / 2
  edges = bin_edges(bin_width, max_lag)
  filled: Dict[int, Tuple[float, int]] = {}
  for center, semivariance, count, line in entries:
    if not 0 <= center < max_lag:
      raise FormatError(f'lag {center} outside [0, {max_lag})', path=str(path), line=line)
    index = min(int(math.floor(center / bin_width)), len(edges) - 2)
    if index in filled:
      raise FormatError(f'bin of lag {center} listed twice', path=str(path), line=line)
    filled[index] = (semivariance, count)

  bins = [
    LagBin(
      lag_lo=edges[i],
      lag_hi=edges[i + 1],
      semivariance=filled[i][0] if i in filled else None,
      pair_count=filled[i][1] if i in filled else 0,
    )
    for i in range(len(edges) - 1)
  ]
  return EmpiricalSemivariogram(bins=bins, bin_width=bin_width, max_lag=max_lag)


def write_fit(path: PathLike, result: FitResult) -> None:
  """Fit result as ``key=value`` lines."""
  model = result.model
  values = {
    'kind': model.kind.value,
    'nugget': repr(model.nugget),
    'sill': repr(model.sill),
    'range': repr(model.range),
    'r_squared': repr(result.r_squared),
    'bins_used': str(result.bins_used),
    'degenerate': 'true' if result.degenerate else 'false',
  }
  Path(path).write_text(''.join(f'{key}={values[key]}\n' for key in FIT_KEYS))


def read_fit(path: PathLike) -> FitResult:
  """Fit result of a ``key=value`` block.

  Raises:
    FormatError: unknown or missing keys, or values that do not parse.
  """
  values = dotenv_values(path)
  unknown = sorted(set(values) - set(FIT_KEYS))
  if unknown:
    raise FormatError(f'unknown key {unknown[0]}', path=str(path))
  missing = [key for key in FIT_KEYS if not values.get(key)]
  if missing:
    raise FormatError(f'missing key {missing[0]}', path=str(path))
  try:
    model = VariogramModel(
      kind=VariogramKind(values['kind'].lower()),
      nugget=float(values['nugget']),
      sill=float(values['sill']),
      range=float(values['range']),
    )
    return FitResult(
      model=model,
      r_squared=float(values['r_squared']),
      residual_sum_squares=0.0,
      bins_used=int(values['bins_used']),
      degenerate=values['degenerate'].lower() == 'true',
    )
  except ValueError as exc:
    raise FormatError(f'invalid fit block: {exc}', path=str(path))


def _metric_row(label: str, metrics: MetricSet) -> Dict[str, str]:
  return {
    'radius': label,
    'n': str(metrics.n),
    'bias': format_number(metrics.bias),
    'rmse': format_number(metrics.rmse),
    'rrmse': format_number(metrics.rrmse),
  }


def write_metrics(path: PathLike, metrics: MetricSet, label: str = 'all') -> None:
  _write_frame(path, pd.DataFrame([_metric_row(label, metrics)], columns=METRIC_COLUMNS))


def write_proximity(path: PathLike, report: ProximityReport) -> None:
  """One row per radius; undefined metrics are left empty."""
  rows = [_metric_row(format_coordinate(row.radius), row.metrics) for row in report.rows]
  _write_frame(path, pd.DataFrame(rows, columns=METRIC_COLUMNS))


def write_transect(path: PathLike, frame: pd.DataFrame) -> None:
  formatted = frame.apply(lambda column: column.map(format_number))
  _write_frame(path, formatted)


def write_periodicity(path: PathLike, score: PeriodicityScore) -> None:
  rows = [
    {'lag': format_coordinate(lag), 'ratio': format_number(ratio)}
    for lag, ratio in zip(
      [score.period * (k + 1) for k in range(len(score.ratios))], score.ratios
    )
  ]
  _write_frame(path, pd.DataFrame(rows, columns=['lag', 'ratio']))


class SiteEntry(BaseModel):
  """One row of a multi-site manifest; paths are resolved against the manifest's folder."""

  name: str
  points: Path
  prediction: Path
  xmin: float
  ymin: float
  xmax: float
  ymax: float
  reference: Optional[Path] = None


def read_sites(path: PathLike) -> List[SiteEntry]:
  """Entries of a site manifest (``name,points,prediction,xmin,ymin,xmax,ymax[,reference]``)."""
  frame = _read_frame(path, SITE_COLUMNS, optional=['reference'])
  base = Path(path).parent
  entries: List[SiteEntry] = []
  for offset, row in enumerate(frame.to_dict('records')):
    line = offset + 2
    reference = str(row.get('reference') or '').strip()
    entries.append(
      SiteEntry(
        name=_field(row, 'name', path, line),
        points=base / _field(row, 'points', path, line),
        prediction=base / _field(row, 'prediction', path, line),
        xmin=_number(row, 'xmin', path, line),
        ymin=_number(row, 'ymin', path, line),
        xmax=_number(row, 'xmax', path, line),
        ymax=_number(row, 'ymax', path, line),
        reference=base / reference if reference else None,
      )
    )
  names = [e.name for e in entries]
  if len(set(names)) != len(names):
    raise FormatError('site names must be unique', path=str(path))
  if not entries:
    raise FormatError('no sites listed', path=str(path))
  return entries


def write_site_statuses(path: PathLike, result: MultiSiteResult) -> None:
  """Status of every site, followed by a pooled metrics row when references were given."""
  rows = [
    {'name': s.name, 'status': s.status.value, 'error': s.error or ''}
    for s in result.sites
  ]
  if result.pooled is not None:
    pooled = _metric_row('all', result.pooled)
    del pooled['radius']
    rows.append({'name': 'pooled', 'status': '', 'error': '', **pooled})
  columns = ['name', 'status', 'n', 'bias', 'rmse', 'rrmse', 'error']
  _write_frame(path, pd.DataFrame(rows, columns=columns).fillna(''))


def diagnostics_rows(output: RkOutput) -> List[Tuple[str, str]]:
  """Label/value pairs of a run's counters, model and timing."""
  d = output.diagnostics
  model = output.model
  rows = [
    ('samples in', str(d.samples_in)),
    ('dropped by beam filter', str(d.samples_beam_filtered)),
    ('outside buffer', str(d.samples_outside_buffer)),
    ('outside raster', str(d.samples_outside_raster)),
    ('on no-data', str(d.samples_on_nodata)),
    ('duplicates merged', str(d.duplicates_merged)),
    ('samples used', str(d.samples_used)),
    ('neighborhood', d.neighborhood.value if d.neighborhood else ''),
    ('model', model.kind.value),
    ('nugget', f'{model.nugget:.4g}'),
    ('sill', f'{model.sill:.4g}'),
    ('range', f'{model.range:.1f}'),
    ('fit r2', f'{output.fit.r_squared:.4f}' if output.fit else '-'),
    ('pure-nugget fallback', 'yes' if d.fit_degenerate else 'no'),
    ('no-data propagated cells', str(d.nodata_propagated_cells)),
    ('empty-neighborhood cells', str(d.empty_neighborhood_cells)),
    ('seconds', f'{d.seconds:.2f}'),
  ]
  return rows
