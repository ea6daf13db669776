#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "json.hpp"
#include "oracles.hpp"
#include "papnf/evaluate.hpp"
#include "papnf/metrics.hpp"
#include "papnf/synthetic.hpp"

using namespace papnf;

namespace {

using oracle::Vec;

ForecastEnsemble single_point(Vec samples) {
  const std::size_t s = samples.size();
  return ForecastEnsemble(s, 1, 1, std::move(samples));
}

WindowSample window_from(const Vec& x, std::size_t horizon, const Vec& y = {}) {
  WindowSample w;
  w.lookback = x.size();
  w.horizon = horizon;
  w.channels = 1;
  w.x = x;
  w.y = y.empty() ? Vec(horizon, 0.0) : y;
  w.scaler = fit_scaler(w.x, 1);
  return w;
}

}  // namespace

TEST(PointMetrics, Examples) {
  const Vec y{1, -2, 3, 0.5};
  const PointMetrics exact = point_metrics(y, y);
  EXPECT_EQ(exact.mse, 0.0);
  EXPECT_EQ(exact.mae, 0.0);
  Vec shifted = y;
  for (double& v : shifted) v += 2.0;
  const PointMetrics off = point_metrics(shifted, y);
  EXPECT_EQ(off.mse, 4.0);
  EXPECT_EQ(off.mae, 2.0);
  EXPECT_THROW(point_metrics(Vec{1, 2}, y), ShapeError);
}

TEST(PointMetrics, MatchesScalarOracle) {
  std::mt19937_64 rng(2);
  const Vec f = oracle::uniform_vec(50, rng, -5, 5), y = oracle::uniform_vec(50, rng, -5, 5);
  double se = 0.0, ae = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    se += (f[i] - y[i]) * (f[i] - y[i]);
    ae += std::abs(f[i] - y[i]);
  }
  const PointMetrics m = point_metrics(f, y);
  EXPECT_NEAR(m.mse, se / 50, 1e-13);
  EXPECT_NEAR(m.mae, ae / 50, 1e-13);
}

TEST(Crps, Examples) {
  EXPECT_EQ(crps_empirical(Vec{1.5, 1.5, 1.5}, 1.5), 0.0);
  EXPECT_DOUBLE_EQ(crps_empirical(Vec{0, 2}, 1.0), 0.5);
  EXPECT_THROW(crps_empirical(Vec{1.0}, 1.0), std::invalid_argument);
  EXPECT_DOUBLE_EQ(crps_empirical(Vec{0, 2}, 1.0, true), 0.0);
}

TEST(Crps, StandardNormalMatchesClosedForm) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  Vec s(10000);
  for (double& v : s) v = n(rng);
  const double closed = 2.0 / std::sqrt(2.0 * std::numbers::pi) - 1.0 / std::sqrt(std::numbers::pi);
  EXPECT_NEAR(closed, 0.2337, 1e-4);
  EXPECT_NEAR(oracle::gaussian_crps(0.0, 1.0, 0.0), closed, 1e-15);
  EXPECT_NEAR(crps_empirical(s, 0.0), closed, 0.01);
}

// Property: the sorted O(S) form agrees with the double sum, both estimators.
TEST(Crps, SortedFormMatchesDoubleSum) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t s = 2 + trial % 40;
    Vec x = oracle::uniform_vec(s, rng, -3, 3);
    const double y = oracle::uniform_vec(1, rng, -4, 4)[0];
    const double want = oracle::crps_double_sum(x, y);
    EXPECT_NEAR(crps_empirical(x, y), want, 1e-12);
    std::sort(x.begin(), x.end());
    EXPECT_NEAR(crps_sorted(x, y), want, 1e-12);
    double a = 0.0, b = 0.0;
    for (double xi : x) a += std::abs(xi - y);
    for (double xi : x)
      for (double xj : x) b += std::abs(xi - xj);
    const double fair = a / s - b / (2.0 * s * (s - 1.0));
    EXPECT_NEAR(crps_sorted(x, y, true), fair, 1e-12);
    EXPECT_NEAR(crps_empirical(x, y, true), fair, 1e-12);
  }
}

// Property: non-negative, zero only at a point mass on y, and equivariant
// under shifts and positive scaling.
TEST(Crps, InvariantsHold) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    Vec x = oracle::uniform_vec(17, rng, -2, 2);
    const double y = oracle::uniform_vec(1, rng, -2, 2)[0];
    const double base = crps_empirical(x, y);
    EXPECT_GT(base, 0.0);
    const double k = oracle::uniform_vec(1, rng, -5, 5)[0], a = oracle::uniform_vec(1, rng, 0.1, 4)[0];
    Vec shifted = x, scaled = x;
    for (double& v : shifted) v += k;
    for (double& v : scaled) v *= a;
    EXPECT_NEAR(crps_empirical(shifted, y + k), base, 1e-12);
    EXPECT_NEAR(crps_empirical(scaled, y * a), a * base, 1e-12);
  }
}

TEST(WeightedCrps, ConstantCase) {
  const WeightedCrps w = weighted_crps(Vec{0.1, 0.1, 0.1, 0.1}, Vec{1, 1, 1, 1});
  EXPECT_NEAR(w.value, 0.1, 1e-15);
  EXPECT_TRUE(w.normalized);
}

TEST(WeightedCrps, ThreePointFixture) {
  const std::vector<ForecastEnsemble> ens{single_point({0, 2}), single_point({1, 1}), single_point({-1, 3})};
  const std::vector<Vec> truth{{1}, {2}, {-2}};
  // 0.5, 1.0 and (1 + 5)/2 - 4/4 = 2.0 over |1| + |2| + |-2|.
  const WeightedCrps w = weighted_crps(ens, truth);
  EXPECT_NEAR(w.value, 3.5 / 5.0, 1e-15);
}

TEST(WeightedCrps, ScaleInvariant) {
  std::mt19937_64 rng(11);
  std::vector<ForecastEnsemble> ens, doubled;
  std::vector<Vec> truth, truth2;
  for (int i = 0; i < 5; ++i) {
    Vec v = oracle::uniform_vec(30 * 4, rng, -3, 3), v2 = v;
    for (double& e : v2) e *= 2.0;
    ens.emplace_back(30, 4, 1, v);
    doubled.emplace_back(30, 4, 1, v2);
    Vec t = oracle::uniform_vec(4, rng, -3, 3), t2 = t;
    for (double& e : t2) e *= 2.0;
    truth.push_back(t);
    truth2.push_back(t2);
  }
  EXPECT_NEAR(weighted_crps(ens, truth).value, weighted_crps(doubled, truth2).value, 1e-13);
}

TEST(WeightedCrps, AllZeroTargetsFlagged) {
  const WeightedCrps w = weighted_crps(Vec{0.2, 0.3}, Vec{0, 0});
  EXPECT_FALSE(w.normalized);
  EXPECT_NEAR(w.value, 0.5, 1e-15);
}

TEST(Coverage, MedianTruthAlwaysCovered) {
  std::mt19937_64 rng(12);
  const ForecastEnsemble e(51, 6, 2, oracle::uniform_vec(51 * 12, rng));
  const Vec median = e.quantile(0.5);
  for (double level : {0.1, 0.5, 0.8, 0.95}) EXPECT_EQ(coverage(e, median, level), 1.0);
  Vec high(12, 10.0);
  EXPECT_EQ(coverage(e, high, 0.95), 0.0);
}

TEST(Coverage, CalibratedGaussianNearNominal) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 1.0);
  const std::size_t samples = 1000, per = 100;
  double covered = 0.0;
  for (int block = 0; block < 100; ++block) {
    Vec v(samples * per), t(per);
    for (double& x : v) x = n(rng);
    for (double& x : t) x = n(rng);
    covered += coverage(ForecastEnsemble(samples, per, 1, v), t, 0.9) * per;
  }
  const double frac = covered / 10000.0;
  EXPECT_GE(frac, 0.88);
  EXPECT_LE(frac, 0.92);
}

// Property: nested intervals give monotone coverage.
TEST(Coverage, IntervalsNest) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    Vec s = oracle::uniform_vec(2 + trial, rng, -1, 1);
    std::sort(s.begin(), s.end());
    auto prev = central_interval(s, 0.05);
    for (double level = 0.1; level < 1.0; level += 0.05) {
      const auto cur = central_interval(s, level);
      EXPECT_LE(cur.first, prev.first);
      EXPECT_GE(cur.second, prev.second);
      prev = cur;
    }
  }
}

TEST(Quantile, TypeSevenInterpolation) {
  const Vec s{1, 2, 3, 4, 5};
  EXPECT_EQ(quantile_sorted(s, 0.0), 1.0);
  EXPECT_EQ(quantile_sorted(s, 1.0), 5.0);
  EXPECT_EQ(quantile_sorted(s, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(s, 0.1), 1.4);
  EXPECT_DOUBLE_EQ(quantile_sorted(Vec{10, 20}, 0.25), 12.5);
}

TEST(ExtremeCoverage, HandSelectedSubset) {
  const Vec errors{0.1, 5.0, 0.2, 3.0, 0.3, 0.4, 0.5, 0.6, 0.7, 4.0};
  std::vector<std::uint8_t> inside(10, 1);
  inside[9] = 0;
  EXPECT_EQ(top_error_indices(errors, 0.3), (std::vector<std::size_t>{1, 3, 9}));
  EXPECT_NEAR(extreme_coverage(errors, inside, 0.3), 2.0 / 3.0, 1e-15);
}

TEST(ExtremeCoverage, TiesPickEarliestIndex) {
  const Vec errors(5, 0.0);
  std::vector<std::uint8_t> inside{0, 1, 1, 1, 1};
  EXPECT_EQ(top_error_indices(errors, 0.2), (std::vector<std::size_t>{0}));
  EXPECT_EQ(extreme_coverage(errors, inside, 0.2), 0.0);
  EXPECT_EQ(top_error_indices(Vec{1, 3, 3, 2}, 0.25), (std::vector<std::size_t>{1}));
}

TEST(ExtremeCoverage, FullFractionIsPlainCoverage) {
  std::mt19937_64 rng(15);
  std::vector<ForecastEnsemble> ens;
  std::vector<Vec> truth;
  Vec errors;
  double plain = 0.0;
  for (int i = 0; i < 4; ++i) {
    ens.emplace_back(40, 5, 1, oracle::uniform_vec(200, rng));
    truth.push_back(oracle::uniform_vec(5, rng, -1.3, 1.3));
    plain += coverage(ens.back(), truth.back(), 0.9) / 4.0;
    for (int j = 0; j < 5; ++j) errors.push_back(oracle::uniform_vec(1, rng, 0, 1)[0]);
  }
  EXPECT_NEAR(extreme_coverage(errors, ens, truth, 0.9, 1.0), plain, 1e-15);
  EXPECT_THROW(top_error_indices(Vec{}, 0.5), std::invalid_argument);
}

TEST(Baselines, PersistenceExactOnConstantSeries) {
  const WindowSample w = window_from(Vec(24, 3.5), 6, Vec(6, 3.5));
  EXPECT_EQ(point_metrics(baseline::persistence(w), w.y).mse, 0.0);
}

TEST(Baselines, SeasonalNaiveExactOnSinusoid) {
  const RawSeries s = synthetic::sinusoid(200, 1, 24, 2.0, 1.0);
  for (const auto& w : make_windows(s, 48, 24, 13)) EXPECT_NEAR(point_metrics(baseline::seasonal_naive(w, 24), w.y).mse, 0.0, 1e-24);
  EXPECT_THROW(baseline::seasonal_naive(make_windows(s, 48, 24)[0], 49), ConfigError);
}

TEST(Baselines, SeasonalNaiveRepeatsLastPeriod) {
  const WindowSample w = window_from({1, 2, 3, 4, 5, 6}, 5);
  EXPECT_EQ(baseline::seasonal_naive(w, 3), (Vec{4, 5, 6, 4, 5}));
  EXPECT_EQ(baseline::persistence(w), (Vec(5, 6.0)));
}

TEST(Baselines, ResidualSigmaIsPopulationStdOfDifferences) {
  const WindowSample w = window_from({0, 1, 3, 6}, 2);
  // Differences 1, 2, 3: mean 2, population variance 2/3.
  EXPECT_NEAR(baseline::residual_sigma(w)[0], std::sqrt(2.0 / 3.0), 1e-15);
}

TEST(Baselines, GaussianResidualMatchesClosedFormCrps) {
  const RawSeries s = synthetic::ar1_seasonal({.length = 200, .phi = 0.5, .noise_sigma = 0.7, .seed = 21});
  const WindowSample w = make_windows(s, 96, 8, 50)[1];
  const ForecastEnsemble e = baseline::gaussian_residual(w, 20000, 4);
  const double last = w.x.back(), sigma = baseline::residual_sigma(w)[0];
  for (std::size_t h = 0; h < 8; ++h) {
    const double want = oracle::gaussian_crps(last, sigma * std::sqrt(h + 1.0), w.y[h]);
    EXPECT_NEAR(crps_sorted(e.sorted_point(h, 0), w.y[h]), want, 0.02 * sigma * std::sqrt(h + 1.0)) << h;
  }
}

TEST(Report, MonotoneCoverageAndJensen) {
  const RawSeries s = synthetic::ar1_seasonal({.length = 400, .channels = 2, .seed = 3});
  const auto windows = make_windows(s, 48, 12, 7);
  const EvalResult r = evaluate(windows, [](const WindowSample& w) { return baseline::gaussian_residual(w, 64, 5); });
  EXPECT_LE(r.report.coverage80, r.report.coverage90);
  EXPECT_LE(r.report.coverage90, r.report.coverage95);
  EXPECT_EQ(r.report.windows, windows.size());
  EXPECT_EQ(r.report.points, windows.size() * 12 * 2);
  EXPECT_EQ(r.report.mse_by_step.size(), 12u);
  EXPECT_EQ(r.quantiles.size(), r.report.points);

  double per_sample = 0.0;
  for (const auto& w : windows) {
    const ForecastEnsemble e = baseline::gaussian_residual(w, 64, 5);
    for (std::size_t k = 0; k < 64; ++k)
      for (std::size_t i = 0; i < w.y.size(); ++i) per_sample += std::pow(e.values()[k * w.y.size() + i] - w.y[i], 2);
  }
  per_sample /= 64.0 * static_cast<double>(r.report.points);
  EXPECT_LE(r.report.mse, per_sample);
}

TEST(Report, JsonIsCanonical) {
  MetricsReport r;
  r.mse = 0.25;
  r.mse_by_step = {0.1, 0.2};
  const std::string text = to_json(r);
  EXPECT_EQ(text, to_json(r));
  const auto parsed = nlohmann::json::parse(text);
  EXPECT_EQ(parsed.at("mse").get<double>(), 0.25);
  std::vector<std::string> keys;
  for (const auto& item : parsed.items()) keys.push_back(item.key());
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
}

TEST(Report, EvaluationIsThreadCountInvariant) {
  const RawSeries s = synthetic::ar1_seasonal({.length = 300, .seed = 8});
  const auto windows = make_windows(s, 48, 12, 5);
  auto run = [&] {
    return to_json(evaluate(windows, [](const WindowSample& w) { return baseline::gaussian_residual(w, 32, 1); }).report);
  };
  setenv("PAPNF_THREADS", "1", 1);
  const std::string one = run();
  setenv("PAPNF_THREADS", "3", 1);
  const std::string three = run();
  unsetenv("PAPNF_THREADS");
  EXPECT_EQ(one, three);
}

TEST(Report, PointForecastCrpsIsAbsoluteError) {
  const RawSeries s = synthetic::ar1_seasonal({.length = 200, .seed = 2});
  const auto windows = make_windows(s, 48, 12, 11);
  const EvalResult r = evaluate(windows, [](const WindowSample& w) {
    return ForecastEnsemble(1, w.horizon, w.channels, baseline::persistence(w));
  });
  EXPECT_NEAR(r.report.crps_mean, r.report.mae, 1e-12);
}
