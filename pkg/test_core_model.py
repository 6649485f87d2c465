"""Tests for the geometry models and shared raster operations."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from rkmap.errors import EmptyResultError, InvalidArgumentError
from rkmap.models.geometry_models import (
  Aabb,
  BeamClass,
  Point2D,
  Raster,
  Sample,
  TrackAzimuthClass,
)
from rkmap.services.raster_service import (
  add_rasters,
  buffer_extent,
  crop,
  residuals,
  residuals_with_summary,
)
from rkmap.services.synthetic_service import raster_field


def test_point_rejects_non_finite_coordinates():
  with pytest.raises(ValidationError):
    Point2D(x=math.nan, y=0.0)
  with pytest.raises(ValidationError):
    Point2D(x=0.0, y=math.inf)


def test_sample_rejects_non_finite_value():
  with pytest.raises(ValidationError):
    Sample.at(0.0, 0.0, math.nan)


def test_aabb_rejects_inverted_corners():
  with pytest.raises(ValidationError):
    Aabb.from_bounds(10.0, 0.0, 0.0, 10.0)


def test_enumerations_have_two_variants():
  assert [b.value for b in BeamClass] == ['power', 'coverage']
  assert [a.value for a in TrackAzimuthClass] == ['nwd', 'swd']


def test_raster_rejects_nan_cells(make_raster):
  with pytest.raises(ValidationError):
    make_raster([[1.0, math.nan]])


def test_raster_values_are_read_only(make_raster):
  raster = make_raster([[1.0, 2.0]])
  with pytest.raises(ValueError):
    raster.values[0, 0] = 5.0


def test_locate_is_half_open_on_max_edges(make_raster):
  raster = make_raster(np.zeros((2, 2)))
  rows, cols, inside = raster.locate(np.array([[10.0, 0.0], [20.0, 5.0], [0.0, 19.999]]))
  assert cols[0] == 1 and rows[0] == 1
  assert not inside[1]
  assert inside[2] and rows[2] == 0 and cols[2] == 0


def test_outer_max_edge_is_outside_but_field_lookup_clips(make_raster):
  raster = make_raster([[1.0, 2.0], [3.0, 4.0]])
  on_edge = Sample.at(20.0, 20.0, 9.0)
  result, summary = residuals_with_summary([on_edge], raster)
  assert result == [] and summary.outside_raster == 1
  assert raster.value_at(20.0, 20.0) is None
  assert raster_field(raster)(np.array([[20.0, 20.0]]))[0] == 2.0


class TestResiduals:
  def test_direct_subtraction(self, make_raster):
    raster = make_raster(np.full((10, 10), 27.5))
    observed = [Sample.at(5.0, 5.0, 30.0), Sample.at(55.0, 55.0, 27.5)]
    result = residuals(observed, raster)
    assert [r.value for r in result] == [2.5, 0.0]

  def test_metadata_is_preserved(self, make_raster):
    raster = make_raster(np.full((2, 2), 1.0))
    sample = Sample.at(
      5.0, 5.0, 3.0, beam=BeamClass.COVERAGE, azimuth_class=TrackAzimuthClass.SWD, track_id='a'
    )
    (result,) = residuals([sample], raster)
    assert result.beam == BeamClass.COVERAGE
    assert result.azimuth_class == TrackAzimuthClass.SWD
    assert result.track_id == 'a'
    assert result.position == sample.position

  def test_empty_input(self, make_raster):
    result, summary = residuals_with_summary([], make_raster([[1.0]]))
    assert result == [] and summary.total == 0

  def test_outside_and_nodata_samples_are_counted(self, make_raster):
    raster = make_raster([[1.0, -9999.0], [1.0, 1.0]])
    observed = [
      Sample.at(5.0, 5.0, 2.0),
      Sample.at(15.0, 15.0, 2.0),  # no-data cell
      Sample.at(-5.0, 5.0, 2.0),
      Sample.at(5.0, 25.0, 2.0),
    ]
    result, summary = residuals_with_summary(observed, raster)
    assert len(result) == 1
    assert summary.on_nodata == 1
    assert summary.outside_raster == 2

  def test_matches_brute_force_lookup(self, make_raster, rng):
    values = rng.normal(20.0, 5.0, (40, 30))
    raster = make_raster(values, origin=(100.0, 200.0), cell_size=25.0)
    xs = rng.uniform(100.0, 100.0 + 30 * 25.0, 1000)
    ys = rng.uniform(200.0, 200.0 + 40 * 25.0, 1000)
    observed = [Sample.at(float(x), float(y), float(v)) for x, y, v in zip(xs, ys, xs * 0.01)]

    result = residuals(observed, raster)
    assert len(result) == len(observed)
    for sample, residual in zip(observed, result):
      col = int(math.floor((sample.position.x - 100.0) / 25.0))
      row = 40 - 1 - int(math.floor((sample.position.y - 200.0) / 25.0))
      assert residual.value == sample.value - values[row, col]

  def test_linear_in_observed_values(self, make_raster, rng):
    raster = make_raster(rng.normal(0.0, 1.0, (5, 5)))
    observed = [Sample.at(float(x), float(y), 1.0) for x, y in rng.uniform(0, 50, (20, 2))]
    shifted = [s.with_value(s.value + 4.0) for s in observed]
    base = residuals(observed, raster)
    moved = residuals(shifted, raster)
    for a, b in zip(base, moved):
      assert b.value == pytest.approx(a.value + 4.0, abs=1e-12)


class TestBufferExtent:
  @pytest.mark.parametrize(
    'bounds, margin, expected',
    [
      ((0, 0, 100, 100), 3000, (-3000, -3000, 3100, 3100)),
      ((0, 0, 100, 100), 0, (0, 0, 100, 100)),
      ((10, 20, 30, 40), 5, (5, 15, 35, 45)),
    ],
  )
  def test_grows_all_sides(self, bounds, margin, expected):
    assert buffer_extent(Aabb.from_bounds(*bounds), margin) == Aabb.from_bounds(*expected)

  def test_negative_margin(self):
    with pytest.raises(InvalidArgumentError):
      buffer_extent(Aabb.from_bounds(0, 0, 1, 1), -1.0)


class TestCrop:
  def test_full_extent_is_identity(self, make_raster, rng):
    raster = make_raster(rng.normal(size=(6, 4)))
    cropped = crop(raster, raster.extent)
    assert cropped.same_geometry(raster)
    np.testing.assert_array_equal(cropped.values, raster.values)

  def test_lower_left_block(self, make_raster):
    values = np.arange(100, dtype=float).reshape(10, 10)
    cropped = crop(make_raster(values), Aabb.from_bounds(0, 0, 50, 50))
    assert (cropped.n_rows, cropped.n_cols) == (5, 5)
    assert cropped.origin == Point2D(x=0.0, y=0.0)
    np.testing.assert_array_equal(cropped.values, values[5:, :5])

  def test_no_intersection(self, make_raster):
    with pytest.raises(EmptyResultError):
      crop(make_raster(np.zeros((3, 3))), Aabb.from_bounds(100, 100, 200, 200))

  def test_matches_center_in_box_filter(self, make_raster, rng):
    values = rng.normal(size=(25, 35))
    raster = make_raster(values, origin=(-50.0, 30.0), cell_size=7.0)
    for _ in range(20):
      x0, x1 = np.sort(rng.uniform(-50.0, -50.0 + 35 * 7.0, 2))
      y0, y1 = np.sort(rng.uniform(30.0, 30.0 + 25 * 7.0, 2))
      box = Aabb.from_bounds(x0, y0, x1, y1)
      centers = raster.cell_centers()
      inside = box.contains(centers).reshape(values.shape)
      if not inside.any():
        with pytest.raises(EmptyResultError):
          crop(raster, box)
        continue
      cropped = crop(raster, box)
      np.testing.assert_array_equal(cropped.values.ravel(), values[inside])
      np.testing.assert_allclose(
        np.sort(cropped.cell_centers(), axis=0), np.sort(centers[inside.ravel()], axis=0)
      )

  def test_crop_of_buffered_raster_keeps_site_cells(self, make_raster, rng):
    site = Aabb.from_bounds(100, 100, 200, 200)
    buffered = buffer_extent(site, 50)
    raster = make_raster(rng.normal(size=(20, 20)), origin=(50.0, 50.0), cell_size=10.0)
    assert raster.extent == buffered
    cropped = crop(raster, site)
    assert site.contains(cropped.cell_centers()).all()
    assert cropped.n_rows * cropped.n_cols == int(site.contains(raster.cell_centers()).sum())


def test_add_rasters_propagates_nodata(make_raster):
  base = make_raster([[1.0, -9999.0], [2.0, 3.0]])
  increment = make_raster([[0.5, 0.5], [-9999.0, 1.0]])
  summed, propagated = add_rasters(base, increment)
  np.testing.assert_array_equal(summed.values, [[1.5, -9999.0], [-9999.0, 4.0]])
  assert propagated == 1


def test_add_rasters_requires_same_geometry(make_raster):
  with pytest.raises(InvalidArgumentError):
    add_rasters(make_raster([[1.0]]), make_raster([[1.0]], cell_size=5.0))
