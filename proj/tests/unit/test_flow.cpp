#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "papnf/flow.hpp"
#include "papnf/model.hpp"
#include "papnf/synthetic.hpp"
#include "papnf/trainer.hpp"
#include "toy_model.hpp"

using namespace papnf;

namespace {

using oracle::Vec;

Vec vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Planar step written out from the formula, including its own w_hat.
Vec planar_oracle(const Vec& u, const Vec& a, const Vec& w, double b) {
  const double wa = dot(w, a);
  const double m = -1.0 + 1e-4 + oracle::softplus(wa);
  const double k = (m - wa) / std::max(dot(a, a), 1e-8);
  const double t = std::tanh(dot(a, u) + b);
  Vec out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] + (w[i] + k * a[i]) * t;
  return out;
}

// A hypernet whose output layer is randomized so the maps are far from identity.
ConditionedPlanarLayer random_layer(std::size_t d_h, std::size_t d_u, Rng& rng, double scale = 1.0) {
  ConditionedPlanarLayer layer(d_h, d_u, 16, rng);
  layer.w2 = init_normal({2 * d_u + 1, 16}, scale, rng);
  layer.b2 = init_normal({2 * d_u + 1}, scale, rng);
  return layer;
}

double energy_distance(const Vec& x, const Vec& y, std::size_t dim) {
  auto mean_dist = [dim](const Vec& p, const Vec& q) {
    const std::size_t np = p.size() / dim, nq = q.size() / dim;
    double s = 0.0;
    for (std::size_t i = 0; i < np; ++i)
      for (std::size_t j = 0; j < nq; ++j) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < dim; ++k) d2 += std::pow(p[i * dim + k] - q[j * dim + k], 2);
        s += std::sqrt(d2);
      }
    return s / static_cast<double>(np * nq);
  };
  return 2.0 * mean_dist(x, y) - mean_dist(x, x) - mean_dist(y, y);
}

}  // namespace

TEST(Fuse, ZeroWeightGivesBias) {
  Rng rng(1);
  FusionLayer f(3, 2, 4, rng);
  f.weight = Tensor::zeros({4, 5});
  f.bias = Tensor::vector({1, 2, 3, 4});
  EXPECT_EQ(vec(f.fuse(Tensor::vector({5, 6, 7}), Tensor::vector({8, 9}))), (Vec{1, 2, 3, 4}));
}

TEST(Fuse, BlockIdentityPassesZ) {
  Rng rng(1);
  FusionLayer f(3, 2, 3, rng);
  f.weight = Tensor::matrix(3, 5, {1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0});
  f.bias = Tensor::zeros({3});
  EXPECT_EQ(vec(f.fuse(Tensor::vector({5, 6, 7}), Tensor::vector({8, 9}))), (Vec{5, 6, 7}));
}

TEST(Fuse, MatchesConcatAffineOracle) {
  Rng rng(2);
  FusionLayer f(3, 2, 4, rng);
  const Vec z{0.1, -0.3, 0.8}, c{1.2, -0.4};
  const Vec want = oracle::affine(oracle::to_mat(vec(f.weight), 4, 5), {0.1, -0.3, 0.8, 1.2, -0.4}, vec(f.bias));
  const Vec got = vec(f.fuse(Tensor::vector(z), Tensor::vector(c)));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(got[i], want[i], 1e-14);
  EXPECT_THROW(f.fuse(Tensor::vector({1, 2}), Tensor::vector(c)), ShapeError);
}

TEST(SampleBase, DeterministicPerSeed) {
  Rng a(5), b(5), c(6);
  const Vec x = vec(sample_base(a, 8));
  EXPECT_EQ(x, vec(sample_base(b, 8)));
  EXPECT_NE(x, vec(sample_base(c, 8)));
}

TEST(SampleBase, StandardNormalMoments) {
  Rng rng(12);
  const std::size_t n = 10000, d = 4;
  const Vec draws = vec(sample_base(rng, n, d));
  for (std::size_t k = 0; k < d; ++k) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += draws[i * d + k];
    m /= n;
    for (std::size_t i = 0; i < n; ++i) v += std::pow(draws[i * d + k] - m, 2);
    v /= n;
    EXPECT_LT(std::abs(m), 0.05);
    EXPECT_GT(v, 0.9);
    EXPECT_LT(v, 1.1);
  }
}

TEST(Planar, ZeroDirectionLeavesLatentUnchanged) {
  PlanarParams p;
  p.a = Tensor::zeros({3});
  p.w = Tensor::vector({0.5, -1.0, 2.0});
  p.w_hat = reparameterize(p.w, p.a);
  p.b = Tensor::vector({0.0});
  for (double v : vec(p.w_hat)) EXPECT_TRUE(std::isfinite(v));
  const Vec u{0.3, -0.2, 1.0};
  EXPECT_EQ(vec(planar_step(Tensor::vector(u), p)), u);
}

TEST(Planar, FreshLayerIsIdentity) {
  Rng rng(3);
  const ConditionedPlanarLayer layer(6, 4, 8, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const PlanarParams p = layer.parameters_for(init_normal({6}, 1.0, rng, false));
    for (double v : vec(p.w_hat)) EXPECT_LT(std::abs(v), 1e-12);
    const Vec u = vec(sample_base(rng, 4));
    const Vec out = vec(planar_step(Tensor::vector(u), p));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out[i], u[i], 1e-12);
  }
}

TEST(Planar, MarginHoldsOnRandomConditioning) {
  Rng rng(4);
  const ConditionedPlanarLayer layer = random_layer(5, 3, rng, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const PlanarParams p = layer.parameters_for(init_normal({5}, 2.0, rng, false));
    EXPECT_GE(dot(vec(p.w_hat), vec(p.a)), -1.0 + kPlanarMargin - 1e-12);
  }
}

TEST(Planar, StepMatchesFormula) {
  Rng rng(5);
  const ConditionedPlanarLayer layer = random_layer(5, 3, rng);
  const PlanarParams p = layer.parameters_for(init_normal({5}, 1.0, rng, false));
  const Vec u{0.4, -1.1, 0.7};
  const Vec want = planar_oracle(u, vec(p.a), vec(p.w), p.b.item());
  const Vec got = vec(planar_step(Tensor::vector(u), p));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(got[i], want[i], 1e-13);
}

TEST(Planar, StackComposition) {
  Rng rng(6);
  std::vector<PlanarParams> stack;
  const Tensor h = init_normal({5}, 1.0, rng, false);
  for (int t = 0; t < 3; ++t) stack.push_back(random_layer(5, 3, rng).parameters_for(h));
  const Vec u0{0.2, 0.9, -0.6};
  EXPECT_EQ(vec(flow_forward(Tensor::vector(u0), {})), u0);
  EXPECT_EQ(vec(flow_forward(Tensor::vector(u0), {stack[0]})), vec(planar_step(Tensor::vector(u0), stack[0])));
  Vec want = u0;
  for (const auto& p : stack) want = planar_oracle(want, vec(p.a), vec(p.w), p.b.item());
  const Vec got = vec(flow_forward(Tensor::vector(u0), stack));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(got[i], want[i], 1e-13);
}

TEST(Planar, BatchMatchesRows) {
  Rng rng(7);
  const PlanarParams p = random_layer(5, 3, rng).parameters_for(init_normal({5}, 1.0, rng, false));
  const Tensor batch = sample_base(rng, 4, 3);
  const Tensor out = planar_step(batch, p);
  for (std::size_t r = 0; r < 4; ++r) {
    const Vec single = vec(planar_step(slice_cols(reshape(slice_rows(batch, r, r + 1), {3}), 0, 3), p));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(out.at(r, i), single[i]);
  }
}

// Property: every conditioned map inverts back to its input.
TEST(Planar, InverseRecoversInput) {
  Rng rng(8);
  const std::size_t d_u = 6;
  std::vector<ConditionedPlanarLayer> layers;
  for (int t = 0; t < 3; ++t) layers.push_back(random_layer(10, d_u, rng, 2.0));
  double worst = 0.0;
  for (const auto& layer : layers)
    for (int trial = 0; trial < 1000; ++trial) {
      const PlanarParams p = layer.parameters_for(init_normal({10}, 1.5, rng, false));
      const Vec u = vec(init_normal({d_u}, 2.0, rng, false));
      const Vec back = planar_inverse(vec(planar_step(Tensor::vector(u), p)), p);
      for (std::size_t i = 0; i < d_u; ++i) worst = std::max(worst, std::abs(back[i] - u[i]));
    }
  EXPECT_LT(worst, 1e-8);
}

TEST(Planar, LogDetMatchesDeterminantFormula) {
  Rng rng(9);
  const PlanarParams p = random_layer(5, 2, rng).parameters_for(init_normal({5}, 1.0, rng, false));
  const Vec u{0.3, -0.8};
  // Explicit 2x2 Jacobian I + w_hat (1 - tanh^2) a^T.
  const Vec a = vec(p.a), w = vec(p.w_hat);
  const double t = std::tanh(dot(a, u) + p.b.item());
  const double s = 1.0 - t * t;
  const double det = (1 + w[0] * s * a[0]) * (1 + w[1] * s * a[1]) - (w[0] * s * a[1]) * (w[1] * s * a[0]);
  EXPECT_NEAR(planar_log_det(u, p), std::log(std::abs(det)), 1e-12);
}

TEST(Reconstruct, ZeroWeightsGiveBias) {
  Rng rng(1);
  ReconstructionHead head(3, 4, 5, 6, rng);
  head.w2 = Tensor::zeros({6, 5});
  head.b2 = Tensor::full({6}, 0.75);
  const Tensor y = head.reconstruct(Tensor::vector({1, 2, 3}), Tensor::vector({4, 5, 6, 7}));
  EXPECT_EQ(y.shape(), (Shape{1, 6}));
  for (double v : vec(y)) EXPECT_EQ(v, 0.75);
}

TEST(Reconstruct, OutputWidthIsHorizonTimesChannels) {
  Rng rng(1);
  ReconstructionHead head(4, 8, 16, 12 * 7, rng);
  EXPECT_EQ(head.reconstruct(sample_base(rng, 3, 4), Tensor::zeros({8})).shape(), (Shape{3, 84}));
  EXPECT_THROW(head.reconstruct(sample_base(rng, 3, 5), Tensor::zeros({8})), ShapeError);
}

TEST(Reconstruct, MatchesPerceptronOracle) {
  Rng rng(2);
  ReconstructionHead head(3, 2, 4, 5, rng);
  head.b1 = init_normal({4}, 0.5, rng);
  const Vec u{0.5, -1.0, 0.25}, h{1.5, -0.5};
  Vec hidden = oracle::affine(oracle::to_mat(vec(head.w1), 4, 5), {0.5, -1.0, 0.25, 1.5, -0.5}, vec(head.b1));
  for (double& v : hidden) v = oracle::tanh_exp(v);
  const Vec want = oracle::affine(oracle::to_mat(vec(head.w2), 5, 4), hidden, vec(head.b2));
  const Vec got = vec(head.reconstruct(Tensor::vector(u), Tensor::vector(h)));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(got[i], want[i], 1e-14);
}

class SamplingTest : public ::testing::Test {
 protected:
  PapNfModel model = PapNfModel::create(toy_config(32, 8, 2));
  std::vector<WindowSample> windows =
      make_windows(synthetic::ar1_seasonal({.length = 120, .channels = 2, .seed = 5}), 32, 8, 20);
};

TEST_F(SamplingTest, SingleSample) {
  const ForecastEnsemble e = sample_forecasts(model, windows[0], 1, 3);
  EXPECT_EQ(e.samples(), 1u);
  EXPECT_EQ(e.values().size(), 8u * 2);
  EXPECT_THROW(sample_forecasts(model, windows[0], 0, 3), ConfigError);
}

TEST_F(SamplingTest, ReproducibleForFixedSeed) {
  const ForecastEnsemble a = sample_forecasts(model, windows[1], 100, 42);
  const ForecastEnsemble b = sample_forecasts(model, windows[1], 100, 42);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  const ForecastEnsemble c = sample_forecasts(model, windows[1], 100, 43);
  EXPECT_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
}

TEST_F(SamplingTest, QuantilesMonotoneAndMedianInsideRange) {
  const ForecastEnsemble e = sample_forecasts(model, windows[2], 100, 7);
  EXPECT_EQ(e.samples() * e.horizon() * e.channels(), e.values().size());
  std::vector<double> prev = e.quantile(0.0);
  for (double level = 0.05; level <= 1.0 + 1e-12; level += 0.05) {
    const auto q = e.quantile(std::min(level, 1.0));
    for (std::size_t i = 0; i < q.size(); ++i) EXPECT_GE(q[i], prev[i]);
    prev = q;
  }
  const auto median = e.quantile(0.5);
  for (std::size_t h = 0; h < 8; ++h)
    for (std::size_t c = 0; c < 2; ++c) {
      const auto pts = e.sorted_point(h, c);
      EXPECT_GE(median[h * 2 + c], pts.front());
      EXPECT_LE(median[h * 2 + c], pts.back());
    }
}

// Conditioning: a model trained on sinusoids gives distinguishable ensembles
// for opposite phases. Both windows share identical look-back statistics, so
// any difference comes from h. The null is the distance between two
// independent ensembles of the same window.
TEST(Conditioning, OppositePhasesGiveDifferentEnsembles) {
  ModelConfig cfg = toy_config(32, 8);
  PapNfModel model = PapNfModel::create(cfg);
  RawSeries series = synthetic::sinusoid(600, 1, 16, 1.0, 0.0);
  Rng noise(3);
  for (double& v : series.values) v += 0.1 * noise.normal();
  const auto parts = split(series, {450, 75, 75});
  TrainConfig tc;
  tc.epochs = 3;
  fit(model, make_windows(parts.train, 32, 8), make_windows(parts.val, 32, 8, 8), tc);

  const RawSeries clean = synthetic::sinusoid(200, 1, 16, 1.0, 0.0);
  const auto w = make_windows(clean, 32, 8);
  const WindowSample& a = w[0];
  const WindowSample& b = w[8];
  ASSERT_NEAR(a.scaler.mean[0], b.scaler.mean[0], 1e-9);
  ASSERT_NEAR(a.scaler.std[0], b.scaler.std[0], 1e-9);
  auto draws = [&](const WindowSample& win, std::uint64_t seed) {
    const auto e = sample_forecasts(model, win, 200, seed);
    return Vec(e.values().begin(), e.values().end());
  };
  const double across = energy_distance(draws(a, 1), draws(b, 2), 8);
  const double null = std::max(energy_distance(draws(a, 1), draws(a, 3), 8), energy_distance(draws(b, 2), draws(b, 4), 8));
  EXPECT_GT(across, 10.0 * null) << "across " << across << " null " << null;
}
