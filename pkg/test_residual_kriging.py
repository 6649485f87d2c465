"""Tests for the residual kriging pipeline and multi-site runs."""

import math

import numpy as np
import pytest

from rkmap.errors import InvalidArgumentError, PipelineError
from rkmap.models.geometry_models import Aabb, BeamClass, Sample
from rkmap.models.kriging_models import KrigingConfig, NeighborhoodKind
from rkmap.models.pipeline_models import (
  FitAlongTrack,
  ProvidedModel,
  RkConfig,
  SiteInput,
  SiteStatus,
)
from rkmap.models.synthetic_models import GediPatternSpec, PassSpec, ScenarioSpec
from rkmap.models.variogram_models import VariogramKind, VariogramModel
from rkmap.services.kriging_service import predict_grid
from rkmap.services.raster_service import crop, sample_raster
from rkmap.services.residual_kriging_service import run_rk, run_rk_multi
from rkmap.services.semivariogram_service import filter_samples
from rkmap.services.synthetic_service import simulate_scenario
from rkmap.services.validation_service import metrics, proximity_analysis

SITE = Aabb.from_bounds(0.0, 0.0, 1000.0, 1000.0)
UNIT_MODEL = VariogramModel(kind=VariogramKind.EXPONENTIAL, nugget=0.0, sill=1.0, range=1000.0)


def small_config(**overrides):
  settings = dict(
    buffer_margin=500.0,
    beam_filter=None,
    semivariogram_source=ProvidedModel(model=UNIT_MODEL),
    kriging=KrigingConfig(),
  )
  settings.update(overrides)
  return RkConfig(**settings)


@pytest.fixture
def prediction(make_raster, rng):
  """20 x 20 cells of 100 m covering the site buffered by 500 m."""
  return make_raster(rng.normal(25.0, 4.0, (20, 20)), origin=(-500.0, -500.0), cell_size=100.0)


def observe_with_offset(prediction, samples, offset):
  values, usable = sample_raster(prediction, samples)
  assert usable.all()
  return [s.with_value(float(v) + offset) for s, v in zip(samples, values)]


class TestRunRk:
  def test_zero_residuals_leave_prediction_unchanged(self, prediction, random_samples):
    samples = random_samples(40, extent=(-400, -400, 1400, 1400))
    observed = observe_with_offset(prediction, samples, 0)
    output = run_rk(observed, prediction, SITE, small_config())
    np.testing.assert_array_equal(output.kriged_residuals.values, 0.0)
    np.testing.assert_array_equal(output.corrected.values, crop(prediction, SITE).values)

  def test_constant_residual_is_added(self, prediction, random_samples):
    observed = observe_with_offset(prediction, random_samples(40, extent=(0, 0, 1000, 1000)), 2.5)
    output = run_rk(observed, prediction, SITE, small_config())
    np.testing.assert_allclose(output.kriged_residuals.values, 2.5, atol=1e-9)
    np.testing.assert_allclose(
      output.corrected.values, crop(prediction, SITE).values + 2.5, atol=1e-9
    )

  def test_corrected_is_prediction_plus_kriged(self, prediction, random_samples):
    samples = random_samples(60, seed=3, extent=(-500, -500, 1500, 1500))
    output = run_rk(samples, prediction, SITE, small_config())
    valid = output.corrected.valid
    base = crop(prediction, SITE)
    assert output.corrected.same_geometry(base)
    np.testing.assert_array_equal(
      output.corrected.values[valid], base.values[valid] + output.kriged_residuals.values[valid]
    )
    assert (output.kriging_variance.values >= 0).all()

  def test_outputs_are_cropped_to_site(self, prediction, random_samples):
    output = run_rk(random_samples(30, extent=(0, 0, 1000, 1000)), prediction, SITE, small_config())
    for raster in (output.corrected, output.kriged_residuals, output.kriging_variance):
      assert (raster.n_rows, raster.n_cols) == (10, 10)
      assert SITE.contains(raster.cell_centers()).all()

  def test_nodata_cells_propagate(self, make_raster, random_samples):
    values = np.full((20, 20), 10.0)
    values[9, 9] = -9999.0
    prediction = make_raster(values, origin=(-500.0, -500.0), cell_size=100.0)
    samples = random_samples(50, extent=(0, 0, 1000, 1000))
    output = run_rk(samples, prediction, SITE, small_config())
    assert output.diagnostics.nodata_propagated_cells == 1
    # row 9 of the buffered grid is row 4 of the site crop
    assert output.corrected.values[4, 4] == -9999.0
    assert output.corrected.valid.sum() == 99

  def test_no_usable_samples(self, prediction):
    far = [Sample.at(9000.0, 9000.0, 1.0), Sample.at(-9000.0, 0.0, 2.0)]
    with pytest.raises(PipelineError) as excinfo:
      run_rk(far, prediction, SITE, small_config(), name='s1')
    assert excinfo.value.detail == '[s1] no usable samples'
    assert excinfo.value.site == 's1'

  def test_sample_accounting(self, prediction, random_samples):
    inside = random_samples(
      40, extent=(0, 0, 1000, 1000), beams=[BeamClass.POWER, BeamClass.COVERAGE]
    )
    outside = [
      Sample.at(5000.0, 5000.0, 1.0, beam=BeamClass.POWER),
      Sample.at(-5000.0, 0.0, 1.0, beam=BeamClass.POWER),
    ]
    output = run_rk(
      inside + outside, prediction, SITE, small_config(beam_filter=BeamClass.POWER)
    )
    diagnostics = output.diagnostics
    assert diagnostics.samples_in == 42
    assert diagnostics.samples_beam_filtered == 20
    assert diagnostics.samples_outside_buffer == 2
    assert diagnostics.samples_used == 20
    assert diagnostics.neighborhood == NeighborhoodKind.GLOBAL
    assert diagnostics.seconds >= 0

  def test_auto_neighborhood_is_reported(self, prediction, random_samples):
    config = small_config(kriging=KrigingConfig(neighborhood=NeighborhoodKind.AUTO))
    output = run_rk(random_samples(20, extent=(0, 0, 1000, 1000)), prediction, SITE, config)
    assert output.diagnostics.neighborhood == NeighborhoodKind.GLOBAL

  def test_flat_residuals_fall_back_to_pure_nugget(self, prediction, random_samples):
    observed = observe_with_offset(prediction, random_samples(200, extent=(0, 0, 1000, 1000)), 1.5)
    source = FitAlongTrack(bin_width=100.0, max_lag=1000.0, tolerance_deg=20.0)
    output = run_rk(observed, prediction, SITE, small_config(semivariogram_source=source))
    assert output.diagnostics.fit_degenerate
    assert output.model.nugget == output.model.sill
    np.testing.assert_allclose(output.kriged_residuals.values, 1.5, atol=1e-9)

  def test_matches_staged_computation(self, prediction, random_samples):
    samples = random_samples(
      80, seed=5, extent=(-900, -900, 1900, 1900), beams=[BeamClass.POWER, BeamClass.COVERAGE]
    )
    model = VariogramModel(kind=VariogramKind.SPHERICAL, nugget=0.5, sill=6.0, range=700.0)
    config = small_config(
      beam_filter=BeamClass.POWER, semivariogram_source=ProvidedModel(model=model)
    )
    output = run_rk(samples, prediction, SITE, config)

    buffered = Aabb.from_bounds(-500.0, -500.0, 1500.0, 1500.0)
    power = filter_samples(samples, beam=BeamClass.POWER)
    inside = buffered.contains(np.array([(s.position.x, s.position.y) for s in power]))
    kept = [s for s, ok in zip(power, inside) if ok]
    cells, usable = sample_raster(prediction, kept)
    residual_samples = [s.with_value(s.value - c) for s, c, ok in zip(kept, cells, usable) if ok]
    work = crop(prediction, buffered)
    kriged, variance = predict_grid(residual_samples, work, model, KrigingConfig())
    corrected = work.with_values(work.values + kriged.values)

    assert output.diagnostics.samples_used == len(residual_samples)
    np.testing.assert_allclose(
      output.kriged_residuals.values, crop(kriged, SITE).values, rtol=1e-12, atol=1e-12
    )
    np.testing.assert_allclose(
      output.corrected.values, crop(corrected, SITE).values, rtol=1e-12, atol=1e-12
    )
    np.testing.assert_allclose(
      output.kriging_variance.values, crop(variance, SITE).values, rtol=1e-12, atol=1e-12
    )

  def test_provided_model_is_used_verbatim(self, prediction, random_samples):
    output = run_rk(random_samples(20, extent=(0, 0, 1000, 1000)), prediction, SITE, small_config())
    assert output.model == UNIT_MODEL
    assert output.fit is None
    assert not output.diagnostics.fit_degenerate


ERROR_MODEL = VariogramModel(kind=VariogramKind.EXPONENTIAL, nugget=2.0, sill=20.0, range=2500.0)
SCENARIO_SITE = Aabb.from_bounds(0.0, 0.0, 3000.0, 3000.0)


def scenario_run(prediction_bias):
  pattern = GediPatternSpec(
    extent=Aabb.from_bounds(-1000.0, -1000.0, 4000.0, 4000.0),
    passes=[
      PassSpec(azimuth_class='nwd', cross_offset=0.0),
      PassSpec(azimuth_class='swd', cross_offset=0.0),
      PassSpec(azimuth_class='nwd', cross_offset=900.0),
      PassSpec(azimuth_class='swd', cross_offset=900.0),
    ],
    seed=7,
  )
  scenario = simulate_scenario(
    ScenarioSpec(pattern=pattern, error_model=ERROR_MODEL, prediction_bias=prediction_bias, seed=7)
  )
  config = RkConfig(
    buffer_margin=1000.0,
    beam_filter=BeamClass.POWER,
    semivariogram_source=ProvidedModel(model=ERROR_MODEL),
  )
  output = run_rk(scenario.observed, scenario.prediction, SCENARIO_SITE, config)
  return scenario, output


@pytest.fixture(scope='module')
def unbiased_scenario():
  return scenario_run(0.0)


class TestSyntheticSite:
  def test_error_grows_with_distance_to_samples(self, unbiased_scenario):
    scenario, output = unbiased_scenario
    truth = crop(scenario.truth, SCENARIO_SITE)
    power = filter_samples(scenario.observed, beam=BeamClass.POWER)
    report = proximity_analysis(
      output.corrected, truth, power, [0.0, 250.0, 750.0, math.inf]
    )
    rmses = [row.metrics.rmse for row in report.rows]
    assert rmses == sorted(rmses)
    assert rmses[0] <= 0.9 * rmses[-1]

  def test_correction_beats_prediction(self, unbiased_scenario):
    scenario, output = unbiased_scenario
    truth = crop(scenario.truth, SCENARIO_SITE)
    before = metrics(crop(scenario.prediction, SCENARIO_SITE), truth)
    after = metrics(output.corrected, truth)
    assert after.rmse < before.rmse

  def test_constant_bias_is_removed_near_samples(self):
    scenario, output = scenario_run(-1.3)
    truth = crop(scenario.truth, SCENARIO_SITE)
    power = filter_samples(scenario.observed, beam=BeamClass.POWER)
    report = proximity_analysis(output.corrected, truth, power, [500.0])
    assert abs(report.rows[0].metrics.bias) < 0.15


class TestMultiSite:
  def make_site(self, name, prediction, samples, offset=1.0):
    reference = prediction.with_values(prediction.values + offset)
    return SiteInput(
      name=name, observed=samples, prediction=prediction, site=SITE, reference=reference
    )

  def test_single_site_matches_run_rk(self, prediction, random_samples):
    samples = random_samples(30, extent=(0, 0, 1000, 1000))
    config = small_config()
    result = run_rk_multi([self.make_site('a', prediction, samples)], config)
    direct = run_rk(samples, prediction, SITE, config, name='a')
    (site,) = result.sites
    assert site.status == SiteStatus.OK
    np.testing.assert_array_equal(site.output.corrected.values, direct.corrected.values)

  def test_identical_sites_agree(self, prediction, random_samples):
    samples = random_samples(30, extent=(0, 0, 1000, 1000))
    sites = [self.make_site(name, prediction, samples) for name in ('a', 'b')]
    result = run_rk_multi(sites, small_config(threads=2))
    assert [s.name for s in result.sites] == ['a', 'b']
    np.testing.assert_array_equal(
      result.sites[0].output.corrected.values, result.sites[1].output.corrected.values
    )
    assert result.sites[0].errors == result.sites[1].errors

  def test_pooled_metrics_use_concatenated_errors(self, prediction, random_samples):
    sites = [
      self.make_site('a', prediction, random_samples(30, seed=1, extent=(0, 0, 1000, 1000)), 1.0),
      self.make_site('b', prediction, random_samples(30, seed=2, extent=(0, 0, 1000, 1000)), -2.0),
    ]
    result = run_rk_multi(sites, small_config())
    errors = np.concatenate([s.errors for s in result.sites])
    assert result.pooled.n == len(errors) == 200
    assert result.pooled.rmse == pytest.approx(math.sqrt(np.mean(errors**2)), rel=1e-12)
    assert result.pooled.bias == pytest.approx(np.mean(errors), rel=1e-12, abs=1e-12)

  def test_failed_site_does_not_stop_others(self, prediction, random_samples):
    sites = [
      self.make_site('good', prediction, random_samples(30, extent=(0, 0, 1000, 1000))),
      self.make_site('empty', prediction, [Sample.at(9000.0, 9000.0, 1.0)]),
    ]
    result = run_rk_multi(sites, small_config())
    assert [s.status for s in result.sites] == [SiteStatus.OK, SiteStatus.FAILED]
    assert result.sites[1].error == '[empty] no usable samples'
    assert result.any_failed and not result.all_failed
    assert result.pooled.n == 100

  def test_needs_a_site(self):
    with pytest.raises(InvalidArgumentError):
      run_rk_multi([])


def test_corrections_concentrate_near_samples(make_raster, random_samples):
  prediction = make_raster(np.zeros((60, 60)), cell_size=100.0)
  samples = random_samples(40, seed=12, extent=(0, 0, 1000, 1000))
  mean = np.mean([s.value for s in samples])
  samples = [s.with_value(s.value - mean) for s in samples]
  model = VariogramModel(kind=VariogramKind.EXPONENTIAL, nugget=0.5, sill=5.0, range=1000.0)
  site = Aabb.from_bounds(0.0, 0.0, 6000.0, 6000.0)
  output = run_rk(
    samples, prediction, site, small_config(semivariogram_source=ProvidedModel(model=model))
  )
  centers = output.kriged_residuals.cell_centers()
  xy = np.array([(s.position.x, s.position.y) for s in samples])
  nearest = np.min(np.hypot(*(centers[:, None, :] - xy[None, :, :]).transpose(2, 0, 1)), axis=1)
  kriged = np.abs(output.kriged_residuals.values.ravel())
  assert kriged[nearest <= 250.0].mean() >= kriged[nearest > 2 * model.range].mean()
