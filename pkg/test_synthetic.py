"""Tests for Gaussian random fields, the GEDI-like pattern and synthetic scenarios."""

import logging
import math

import numpy as np
import pytest
from scipy import stats

from rkmap.errors import InvalidArgumentError
from rkmap.models.geometry_models import Aabb, BeamClass, Point2D, Sample, TrackAzimuthClass
from rkmap.models.synthetic_models import GediPatternSpec, GrfSpec, PassSpec, ScenarioSpec
from rkmap.models.variogram_models import VariogramKind, VariogramModel, Weighting
from rkmap.services.semivariogram_service import (
  empirical,
  empirical_directional,
  filter_samples,
  periodicity_score,
)
from rkmap.services.synthetic_service import (
  generate_pattern,
  grf_field,
  observe,
  raster_field,
  sample_grf_at,
  simulate_scenario,
)
from rkmap.services.variogram_fit_service import fit, merge


def exponential(nugget, sill, range_):
  return VariogramModel(kind=VariogramKind.EXPONENTIAL, nugget=nugget, sill=sill, range=range_)


def north_pattern(**overrides):
  settings = dict(
    extent=Aabb.from_bounds(0.0, 0.0, 10_000.0, 10_000.0),
    azimuth_nwd=0.0,
    passes=[PassSpec(azimuth_class=TrackAzimuthClass.NWD)],
  )
  settings.update(overrides)
  return GediPatternSpec(**settings)


def by_track(samples):
  tracks = {}
  for sample in samples:
    tracks.setdefault(sample.track_id, []).append(sample)
  return tracks


class TestGaussianField:
  def test_pure_nugget_is_white_noise(self):
    xs, ys = np.meshgrid(np.arange(50) * 100.0, np.arange(40) * 100.0)
    points = np.column_stack([xs.ravel(), ys.ravel()])
    values = sample_grf_at(points, GrfSpec(model=exponential(4.0, 4.0, 50.0), mean=10.0, seed=5))
    assert len(values) == 2000
    assert stats.kstest(values, 'norm', args=(10.0, 2.0)).statistic < 0.05
    assert np.var(values) == pytest.approx(4.0, rel=0.15)

  def test_same_seed_same_values(self, rng):
    points = rng.uniform(0.0, 3000.0, (50, 2))
    spec = GrfSpec(model=exponential(1.0, 5.0, 800.0), seed=11)
    np.testing.assert_array_equal(sample_grf_at(points, spec), sample_grf_at(points, spec))

  def test_single_point(self):
    spec = GrfSpec(model=exponential(0.0, 9.0, 500.0), mean=2.0, seed=3)
    first = sample_grf_at([Point2D(x=1.0, y=2.0)], spec)
    second = sample_grf_at([Point2D(x=1.0, y=2.0)], spec)
    assert first.shape == (1,)
    assert first[0] == second[0]

  def test_zero_sill_returns_mean(self, rng):
    spec = GrfSpec(model=exponential(0.0, 0.0, 500.0), mean=7.0)
    np.testing.assert_array_equal(sample_grf_at(rng.uniform(0, 10, (5, 2)), spec), 7.0)

  def test_point_cap(self):
    with pytest.raises(InvalidArgumentError):
      sample_grf_at(np.zeros((4001, 2)), GrfSpec(model=exponential(0.0, 1.0, 100.0)))

  def test_parameters_are_recovered(self):
    # three independent realizations pooled on one bin grid
    model = exponential(2.0, 20.0, 2500.0)
    pooled = None
    for offset in range(3):
      points = np.random.default_rng(100 + offset).uniform(0.0, 30_000.0, (2000, 2))
      values = sample_grf_at(points, GrfSpec(model=model, seed=17 + offset))
      samples = [Sample.at(float(x), float(y), float(v)) for (x, y), v in zip(points, values)]
      sv = empirical(samples, bin_width=250.0, max_lag=7500.0)
      pooled = sv if pooled is None else merge(pooled, sv)
    result = fit(pooled, VariogramKind.EXPONENTIAL, Weighting.UNIFORM)
    assert result.model.range == pytest.approx(2500.0, rel=0.25)
    assert result.model.sill == pytest.approx(20.0, rel=0.15)

  def test_field_on_grid(self, make_raster):
    grid = make_raster(np.zeros((4, 5)), cell_size=100.0)
    spec = GrfSpec(model=exponential(0.0, 1.0, 300.0), mean=5.0, seed=2)
    field = grf_field(grid, spec)
    assert field.same_geometry(grid)
    expected = sample_grf_at(grid.cell_centers(), spec)
    np.testing.assert_array_equal(field.values.ravel(), expected)


class TestPattern:
  def test_northward_tracks(self):
    samples = generate_pattern(north_pattern())
    tracks = by_track(samples)
    assert sorted(tracks) == [f'p0b{j}' for j in range(8)]
    xs = []
    for track_id in sorted(tracks):
      track = tracks[track_id]
      x = {s.position.x for s in track}
      assert len(x) == 1
      xs.append(x.pop())
      ys = np.sort([s.position.y for s in track])
      np.testing.assert_allclose(np.diff(ys), 60.0)
    np.testing.assert_allclose(np.diff(xs), 600.0)
    assert xs[-1] - xs[0] == pytest.approx(4200.0)

  def test_beams_alternate_in_pairs(self):
    tracks = by_track(generate_pattern(north_pattern()))
    beams = [tracks[f'p0b{j}'][0].beam for j in range(8)]
    power, coverage = BeamClass.POWER, BeamClass.COVERAGE
    assert beams == [power, power, coverage, coverage] * 2
    assert all(len({s.beam for s in track}) == 1 for track in tracks.values())

  def test_tracks_follow_azimuth(self):
    spec = north_pattern(azimuth_nwd=36.0)
    track = by_track(generate_pattern(spec))['p0b3']
    first, second = track[0].position, track[1].position
    azimuth = math.degrees(math.atan2(second.x - first.x, second.y - first.y)) % 180.0
    assert azimuth == pytest.approx(36.0)

  def test_passes_get_their_class(self):
    spec = north_pattern(
      passes=[
        PassSpec(azimuth_class=TrackAzimuthClass.NWD),
        PassSpec(azimuth_class=TrackAzimuthClass.SWD, cross_offset=300.0),
      ]
    )
    samples = generate_pattern(spec)
    tracks = by_track(samples)
    assert {t[0].azimuth_class for tid, t in tracks.items() if tid.startswith('p1')} == {
      TrackAzimuthClass.SWD
    }
    assert len(tracks) == 16
    assert all(spec.extent.contains(np.array([[s.position.x, s.position.y]]))[0] for s in samples)

  def test_values_start_at_zero(self):
    assert all(s.value == 0.0 for s in generate_pattern(north_pattern()))

  def test_empty_extent_warns(self, caplog):
    spec = north_pattern(extent=Aabb.from_bounds(0.0, 0.0, 10.0, 10.0), azimuth_nwd=36.0)
    with caplog.at_level(logging.WARNING):
      assert generate_pattern(spec) == []
    assert 'no footprint' in caplog.text

  def test_seeded_track_jitter(self):
    spec = north_pattern(per_track_offset_sd=25.0, seed=4)
    assert generate_pattern(spec) == generate_pattern(spec)
    xs = {s.position.x for s in by_track(generate_pattern(spec))['p0b0']}
    assert len(xs) == 1
    assert xs.pop() != pytest.approx(5000.0 - 3.5 * 600.0)


class TestObserve:
  def test_identity_without_effects(self):
    spec = north_pattern(coverage_bias=0.0)
    pattern = generate_pattern(spec)
    observed = observe(pattern, lambda xy: xy[:, 0] * 0.001 + xy[:, 1] * 0.002, spec)
    for sample in observed:
      assert sample.value == pytest.approx(
        sample.position.x * 0.001 + sample.position.y * 0.002, abs=1e-12
      )

  def test_coverage_bias(self):
    spec = north_pattern()
    observed = observe(generate_pattern(spec), lambda xy: np.full(len(xy), 30.0), spec)
    assert {s.value for s in observed if s.beam == BeamClass.POWER} == {30.0}
    assert {s.value for s in observed if s.beam == BeamClass.COVERAGE} == {27.0}

  def test_track_offsets_are_constant_per_track(self):
    spec = north_pattern(coverage_bias=0.0, track_value_offset_sd=2.0, seed=9)
    observed = observe(generate_pattern(spec), lambda xy: np.zeros(len(xy)), spec)
    offsets = {tid: {s.value for s in track} for tid, track in by_track(observed).items()}
    assert all(len(values) == 1 for values in offsets.values())
    assert len({values.pop() for values in offsets.values()}) == 8

  def test_coverage_track_bias_spares_power_beams(self):
    spec = north_pattern(coverage_track_bias_sd=5.0, seed=9)
    observed = observe(generate_pattern(spec), lambda xy: np.full(len(xy), 30.0), spec)
    tracks = by_track(observed)
    levels = {tid: {s.value for s in track} for tid, track in tracks.items()}
    assert all(len(values) == 1 for values in levels.values())
    power = {tid for tid, track in tracks.items() if track[0].beam == BeamClass.POWER}
    assert all(levels[tid] == {30.0} for tid in power)
    coverage = {levels[tid].pop() for tid in tracks if tid not in power}
    assert len(coverage) == 4
    assert 27.0 not in coverage

  def test_noise_is_seeded(self):
    spec = north_pattern(observation_noise_sd=1.0, seed=3)
    pattern = generate_pattern(spec)
    truth = lambda xy: np.zeros(len(xy))  # noqa: E731
    assert observe(pattern, truth, spec) == observe(pattern, truth, spec)

  def test_empty_pattern(self):
    assert observe([], lambda xy: xy, north_pattern()) == []


class TestRasterField:
  def test_cell_lookup(self, make_raster):
    query = raster_field(make_raster([[1.0, 2.0], [3.0, 4.0]]))
    values = query(np.array([[5.0, 5.0], [15.0, 15.0], [20.0, 20.0]]))
    np.testing.assert_array_equal(values, [3.0, 2.0, 2.0])

  def test_outside_raises(self, make_raster):
    query = raster_field(make_raster([[1.0]]))
    with pytest.raises(InvalidArgumentError):
      query(np.array([[50.0, 50.0]]))


class TestScenario:
  def spec(self, **overrides):
    pattern = GediPatternSpec(extent=Aabb.from_bounds(0.0, 0.0, 2000.0, 2000.0), seed=1)
    settings = dict(pattern=pattern, seed=1)
    settings.update(overrides)
    return ScenarioSpec(**settings)

  def test_deterministic(self):
    first, second = simulate_scenario(self.spec()), simulate_scenario(self.spec())
    np.testing.assert_array_equal(first.truth.values, second.truth.values)
    np.testing.assert_array_equal(first.prediction.values, second.prediction.values)
    assert first.observed == second.observed

  def test_grid_covers_extent(self):
    scenario = simulate_scenario(self.spec())
    assert (scenario.truth.n_rows, scenario.truth.n_cols) == (20, 20)
    assert scenario.prediction.same_geometry(scenario.truth)

  def test_prediction_without_error_field(self):
    spec = self.spec(error_model=exponential(0.0, 0.0, 100.0), prediction_bias=-1.5)
    scenario = simulate_scenario(spec)
    np.testing.assert_array_equal(scenario.prediction.values, scenario.truth.values - 1.5)

  def test_grid_above_the_field_limit(self):
    pattern = GediPatternSpec(extent=Aabb.from_bounds(0.0, 0.0, 10_000.0, 10_000.0), seed=1)
    with pytest.raises(InvalidArgumentError, match='cell size above 158 m'):
      simulate_scenario(ScenarioSpec(pattern=pattern, seed=1))

  def test_coarser_cells_fit_the_limit(self):
    pattern = GediPatternSpec(extent=Aabb.from_bounds(0.0, 0.0, 10_000.0, 10_000.0), seed=1)
    scenario = simulate_scenario(ScenarioSpec(pattern=pattern, cell_size=200.0, seed=1))
    assert (scenario.truth.n_rows, scenario.truth.n_cols) == (50, 50)

  @pytest.mark.parametrize('kind', [VariogramKind.SPHERICAL, VariogramKind.GAUSSIAN])
  def test_any_model_kind(self, kind):
    model = VariogramModel(kind=kind, nugget=0.5, sill=10.0, range=1500.0)
    scenario = simulate_scenario(self.spec(truth_model=model, error_model=model))
    assert np.std(scenario.truth.values) > 0
    assert not np.array_equal(scenario.truth.values, scenario.prediction.values)

  def test_power_beams_observe_truth(self):
    scenario = simulate_scenario(self.spec())
    truth_at = raster_field(scenario.truth)
    power = filter_samples(scenario.observed, beam=BeamClass.POWER)
    assert power
    xy = np.array([(s.position.x, s.position.y) for s in power])
    np.testing.assert_array_equal([s.value for s in power], truth_at(xy))


class TestBeamBiasSignature:
  """A coverage-beam bias shows up as excess cross-track semivariance."""

  BIN = 250.0
  MAX_LAG = 3000.0

  @pytest.fixture(scope='class')
  def observed(self):
    spec = GediPatternSpec(
      extent=Aabb.from_bounds(0.0, 0.0, 5000.0, 5000.0),
      passes=[PassSpec(azimuth_class=TrackAzimuthClass.NWD)],
      seed=2,
    )
    truth = GrfSpec(model=exponential(0.02, 0.2, 2500.0), mean=30.0, seed=2)
    return observe(generate_pattern(spec), lambda xy: sample_grf_at(xy, truth), spec)

  def gamma(self, samples, azimuth, lag):
    sv = empirical_directional(samples, self.BIN, self.MAX_LAG, azimuth, tolerance_deg=5.0)
    return sv.bins[sv.bin_index(lag)].semivariance

  def test_cross_track_exceeds_along_track(self, observed):
    assert self.gamma(observed, 126.0, 600.0) > self.gamma(observed, 36.0, 600.0) + 1.0

  def test_cross_track_pattern_follows_beam_layout(self, observed):
    # tracks two apart always pair a power with a coverage beam, four apart never
    near, two, four = (self.gamma(observed, 126.0, lag) for lag in (600.0, 1200.0, 2400.0))
    assert two > near
    assert four < two - 2.0

  def test_power_beams_alone_lose_the_signature(self, observed):
    power = filter_samples(observed, beam=BeamClass.POWER)
    assert self.gamma(power, 126.0, 600.0) < self.gamma(observed, 126.0, 600.0) - 1.0

  def test_bias_inflates_the_omnidirectional_semivariogram(self, observed):
    power = filter_samples(observed, beam=BeamClass.POWER)
    every = empirical(observed, self.BIN, self.MAX_LAG)
    only_power = empirical(power, self.BIN, self.MAX_LAG)
    assert np.mean([b.semivariance for b in every.populated]) > np.mean(
      [b.semivariance for b in only_power.populated]
    )

  def test_power_along_track_sill_is_below_all_beam_sill(self, observed):
    power = filter_samples(observed, beam=BeamClass.POWER)
    along = empirical_directional(power, self.BIN, self.MAX_LAG, 36.0, tolerance_deg=5.0)
    every = empirical(observed, self.BIN, self.MAX_LAG)
    assert fit(along).model.sill < fit(every).model.sill


def periodicity_of(samples, period=600.0):
  return periodicity_score(empirical(samples, 100.0, 1600.0), period)


class TestPeriodicitySignature:
  """Three northward passes over a field with the default error structure."""

  @pytest.fixture(scope='class')
  def observed(self):
    spec = GediPatternSpec(
      extent=Aabb.from_bounds(0.0, 0.0, 16_800.0, 6000.0),
      azimuth_nwd=0.0,
      passes=[
        PassSpec(azimuth_class=TrackAzimuthClass.NWD, cross_offset=offset)
        for offset in (-6000.0, 0.0, 6000.0)
      ],
      coverage_track_bias_sd=8.0,
      seed=5,
    )
    truth = GrfSpec(model=exponential(2.0, 20.0, 2500.0), mean=30.0, seed=5)
    return observe(generate_pattern(spec), lambda xy: sample_grf_at(xy, truth), spec)

  def test_all_beams_peak_at_the_track_spacing(self, observed):
    score = periodicity_of(observed)
    assert score.score >= 1.2
    assert 600.0 in score.peak_lags

  def test_power_beams_score_lower(self, observed):
    power = filter_samples(observed, beam=BeamClass.POWER)
    assert periodicity_of(power).score < periodicity_of(observed).score

  def test_power_along_track_sill_is_below_all_beam_sill(self, observed):
    power = filter_samples(observed, beam=BeamClass.POWER)
    along = empirical_directional(power, 250.0, 5000.0, 0.0, tolerance_deg=1.0)
    every = empirical(observed, 250.0, 5000.0)
    assert fit(along).model.sill < fit(every).model.sill

  def test_score_matches_the_bin_table(self, observed):
    sv = empirical(observed, 100.0, 1600.0)
    gamma = {b.lag_center: b.semivariance for b in sv.populated}
    first = gamma[650.0] / np.mean([gamma[250.0], gamma[850.0]])
    second = gamma[1250.0] / np.mean([gamma[850.0], gamma[1450.0]])
    assert periodicity_score(sv, 600.0).ratios == pytest.approx([first, second], rel=1e-12)


def test_coverage_bias_alone_raises_the_periodicity_score():
  spec = GediPatternSpec(extent=Aabb.from_bounds(0.0, 0.0, 5000.0, 5000.0), seed=2)
  truth = GrfSpec(model=exponential(0.1, 1.0, 2500.0), mean=30.0, seed=2)
  observed = observe(generate_pattern(spec), lambda xy: sample_grf_at(xy, truth), spec)
  power = filter_samples(observed, beam=BeamClass.POWER)
  assert periodicity_of(observed).score >= 1.2 * periodicity_of(power).score
