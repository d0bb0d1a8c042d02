#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "rtn/error.hpp"
#include "rtn/losses.hpp"

using namespace rtn;

namespace {

double naive_mmd2(const Tensor& zs, const Tensor& zt, double b) {
  auto mean_k = [b](const Tensor& a, const Tensor& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < c.rows(); ++j) s += std::exp(-sq_dist(a.row(i), c.row(j)) / b);
    return s / static_cast<double>(a.rows() * c.rows());
  };
  return mean_k(zs, zs) + mean_k(zt, zt) - 2.0 * mean_k(zs, zt);
}

double rel_err(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-4}); }

template <typename F>
void expect_fd_match(Tensor x, const Tensor& analytic, F f, double tol) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i], h = 1e-5 * std::max(1.0, std::abs(v));
    // Fourth-order central stencil.
    auto at = [&](double d) {
      x[i] = v + d;
      const double r = f(x);
      x[i] = v;
      return r;
    };
    const double n = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
    EXPECT_LE(rel_err(analytic[i], n), tol) << "index " << i;
  }
}

}  // namespace

TEST(Fuse, SingleLayerPassesThrough) {
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  const std::vector<Tensor> one = {a};
  EXPECT_EQ(fuse(one), a);
}

TEST(Fuse, RowsAreKroneckerProducts) {
  Rng rng(1);
  const Tensor a = fixtures::random_matrix(3, 2, rng), b = fixtures::random_matrix(3, 3, rng),
               c = fixtures::random_matrix(3, 2, rng);
  const std::vector<Tensor> layers = {a, b, c};
  const Tensor f = fuse(layers);
  ASSERT_EQ(f.cols(), 12u);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(f(r, (i * 3 + j) * 2 + k), a(r, i) * b(r, j) * c(r, k));
  const std::vector<Tensor> bad = {a, fixtures::random_matrix(2, 2, rng)};
  EXPECT_THROW(fuse(bad), ShapeError);
}

TEST(Fuse, BackwardMatchesFiniteDifferences) {
  Rng rng(2);
  std::vector<Tensor> layers = {fixtures::random_matrix(2, 3, rng), fixtures::random_matrix(2, 2, rng)};
  const Tensor w = fixtures::random_matrix(2, 6, rng);
  const auto grads = fuse_backward(layers, w);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    expect_fd_match(layers[l], grads[l], [&](const Tensor& x) {
      auto tmp = layers;
      tmp[l] = x;
      const Tensor f = fuse(tmp);
      double s = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * w[i];
      return s;
    }, 1e-7);
  }
}

TEST(Kernel, GaussianValues) {
  const std::vector<double> a = {0, 0}, b = {1, 1};
  EXPECT_EQ(gaussian_kernel(a, a, 2.0), 1.0);
  EXPECT_NEAR(gaussian_kernel(a, b, 2.0), std::exp(-1.0), 1e-15);
  EXPECT_THROW(gaussian_kernel(a, b, 0.0), ParameterError);
}

TEST(Kernel, MedianHeuristic) {
  // Pairwise squared distances of 0, 1, 3 on a line: 1, 9, 4 -> median 4.
  EXPECT_EQ(median_heuristic(Tensor::matrix({{0}, {1}, {3}})), 4.0);
  // Four points: 6 distances 1,4,9,1,4,1 -> sorted 1,1,1,4,4,9 -> (1 + 4) / 2.
  EXPECT_EQ(median_heuristic(Tensor::matrix({{0}, {1}, {2}, {3}})), 2.5);
  EXPECT_THROW(median_heuristic(Tensor::matrix({{1, 2}})), InsufficientDataError);
  EXPECT_THROW(median_heuristic(Tensor::matrix({{1}, {1}, {1}})), DegenerateDataError);
}

TEST(Kernel, DegenerateMedianFallsBackToFixedBandwidth) {
  KernelConfig cfg;
  cfg.bandwidth = 0.7;
  const Tensor same = Tensor::matrix({{1, 1}, {1, 1}});
  const BandwidthChoice c = resolve_bandwidth(cfg, same, same);
  EXPECT_TRUE(c.fell_back);
  EXPECT_EQ(c.bandwidth, 0.7);
  cfg.policy = BandwidthPolicy::fixed;
  const BandwidthChoice f = resolve_bandwidth(cfg, Tensor::matrix({{0}}), Tensor::matrix({{5}}));
  EXPECT_FALSE(f.fell_back);
  EXPECT_EQ(f.bandwidth, 0.7);
}

TEST(Mmd, QuadraticMatchesDoubleLoop) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t ns = 1 + rng.uniform_index(8), nt = 1 + rng.uniform_index(8), d = 1 + rng.uniform_index(6);
    const Tensor zs = fixtures::random_matrix(ns, d, rng), zt = fixtures::random_matrix(nt, d, rng, 1.0, 0.5);
    const double b = rng.uniform(0.5, 4.0);
    EXPECT_NEAR(mmd2_quadratic(zs, zt, b), naive_mmd2(zs, zt, b), 1e-12);
  }
}

TEST(Mmd, IdenticalSamplesAndSingletons) {
  Rng rng(4);
  const Tensor z = fixtures::random_matrix(6, 3, rng);
  EXPECT_LE(std::abs(mmd2_quadratic(z, z, 1.3)), 1e-12);
  const Tensor a = Tensor::matrix({{0.2, -1.0}}), b = Tensor::matrix({{1.0, 0.5}});
  const double k = gaussian_kernel(a.row(0), b.row(0), 2.0);
  EXPECT_NEAR(mmd2_quadratic(a, b, 2.0), 2.0 * (1.0 - k), 1e-14);
  EXPECT_THROW(mmd2_quadratic(a, Tensor::matrix({{1, 2, 3}}), 1.0), ShapeError);
}

TEST(Mmd, LinearEstimatorShapeRules) {
  Rng rng(5);
  EXPECT_THROW(mmd2_linear(fixtures::random_matrix(4, 2, rng), fixtures::random_matrix(6, 2, rng), 1.0), ShapeError);
  EXPECT_THROW(mmd2_linear(fixtures::random_matrix(3, 2, rng), fixtures::random_matrix(3, 2, rng), 1.0), ShapeError);
}

TEST(Mmd, LinearEstimatorHitsClosedFormExpectation) {
  // For N(mu_s, I) vs N(mu_t, I) in d dims and k = exp(-|x - y|^2 / b):
  //   MMD^2 = 2 (1 + 4/b)^(-d/2) (1 - exp(-|mu_s - mu_t|^2 / (b + 4))).
  const double b = 1.0;
  const double truth = 2.0 * std::pow(1.0 + 4.0 / b, -1.0) * (1.0 - std::exp(-1.0 / (b + 4.0)));
  Rng rng(6);
  double lin = 0.0;
  const int reps = 500;
  for (int r = 0; r < reps; ++r) {
    Tensor zs = fixtures::random_matrix(200, 2, rng), zt = fixtures::random_matrix(200, 2, rng);
    for (std::size_t i = 0; i < zt.rows(); ++i) zt(i, 0) += 1.0;
    lin += mmd2_linear(zs, zt, b);
  }
  lin /= reps;
  EXPECT_NEAR(lin, truth, 0.1 * truth);
  // The quadratic estimate on a large sample converges to the same value.
  Tensor zs = fixtures::random_matrix(1500, 2, rng), zt = fixtures::random_matrix(1500, 2, rng);
  for (std::size_t i = 0; i < zt.rows(); ++i) zt(i, 0) += 1.0;
  EXPECT_NEAR(mmd2_quadratic(zs, zt, b), truth, 0.1 * truth);
}

TEST(Mmd, GradientsMatchFiniteDifferences) {
  Rng rng(7);
  for (auto est : {MmdEstimator::quadratic, MmdEstimator::linear}) {
    for (int trial = 0; trial < 5; ++trial) {
      const Tensor zs = fixtures::random_matrix(4, 3, rng), zt = fixtures::random_matrix(4, 3, rng, 1.0, 0.3);
      const double b = rng.uniform(1.0, 5.0);
      const MmdGradient g = mmd2_grad(zs, zt, b, est);
      expect_fd_match(zs, g.d_zs, [&](const Tensor& x) { return mmd2(x, zt, b, est); }, 1e-6);
      expect_fd_match(zt, g.d_zt, [&](const Tensor& x) { return mmd2(zs, x, b, est); }, 1e-6);
    }
  }
}

TEST(Entropy, KnownValues) {
  EXPECT_NEAR(entropy_penalty(Tensor::matrix({{0.5, 0.25, 0.25}})), 1.5 * std::numbers::ln2, 1e-15);
  EXPECT_EQ(entropy_penalty(Tensor::matrix({{0, 1, 0, 0}})), 0.0);
  EXPECT_NEAR(entropy_penalty(Tensor::filled({2, 5}, 0.2)), std::log(5.0), 1e-12);
  EXPECT_THROW(entropy_penalty(Tensor::matrix({{0.5, 0.6}})), ValidationError);
}

TEST(Entropy, BoundedOnRandomSimplexRows) {
  Rng rng(8);
  for (std::size_t c : {2u, 3u, 4u, 10u}) {
    const Tensor p = fixtures::random_simplex(1000, c, rng);
    for (std::size_t r = 0; r < p.rows(); ++r) {
      const double h = entropy_penalty(p.slice_rows(r, r + 1));
      EXPECT_GE(h, 0.0);
      EXPECT_LE(h, std::log(static_cast<double>(c)) + 1e-15);
    }
  }
}

TEST(Entropy, GradientMatchesFiniteDifferences) {
  // Perturbing single entries leaves the simplex, so check the unconstrained
  // formula -(1/n) sum p log p directly.
  Rng rng(9);
  const Tensor p = fixtures::random_simplex(3, 4, rng);
  const Tensor g = entropy_grad(p);
  expect_fd_match(p, g, [](const Tensor& q) {
    double s = 0.0;
    for (double v : q.data()) s -= v * std::log(v);
    return s / 3.0;
  }, 1e-6);
}

TEST(Sketch, IdentityIsExact) {
  Rng rng(10);
  const Tensor x = fixtures::random_matrix(3, 5, rng);
  EXPECT_EQ(CountSketch::identity(5).apply(x), x);
}

TEST(Sketch, TransposeIsAdjoint) {
  Rng rng(11);
  const CountSketch s = CountSketch::random(7, 3, rng);
  const Tensor x = fixtures::random_matrix(2, 7, rng), y = fixtures::random_matrix(2, 3, rng);
  const Tensor sx = s.apply(x), sty = s.apply_transpose(y);
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < sx.size(); ++i) a += sx[i] * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) b += x[i] * sty[i];
  EXPECT_NEAR(a, b, 1e-12);
}

TEST(Sketch, InnerProductPreservedInExpectation) {
  Rng rng(12);
  const Tensor a = fixtures::random_matrix(1, 64, rng);
  Tensor b = a;
  for (double& v : b.data()) v += rng.normal(0.0, 0.5);
  double truth = 0.0;
  for (std::size_t i = 0; i < 64; ++i) truth += a[i] * b[i];
  double mean = 0.0;
  for (int k = 0; k < 500; ++k) {
    const CountSketch s = CountSketch::random(64, 16, rng);
    const Tensor sa = s.apply(a), sb = s.apply(b);
    for (std::size_t i = 0; i < 16; ++i) mean += sa[i] * sb[i];
  }
  mean /= 500.0;
  EXPECT_NEAR(mean, truth, 0.05 * std::abs(truth));
}

TEST(Sketch, TensorSketchEqualsComposedCountSketchOfFusion) {
  Rng rng(13);
  const Tensor a = fixtures::random_matrix(3, 4, rng), b = fixtures::random_matrix(3, 5, rng);
  const CountSketch sa = CountSketch::random(4, 6, rng), sb = CountSketch::random(5, 6, rng);
  const std::vector<Tensor> layers = {a, b};
  const Tensor direct = CountSketch::composed(sa, sb).apply(fuse(layers));
  const Tensor fast = tensor_sketch(a, b, sa, sb);
  ASSERT_EQ(direct.shape(), fast.shape());
  for (std::size_t i = 0; i < direct.size(); ++i) EXPECT_NEAR(direct[i], fast[i], 1e-12);
}

TEST(Sketch, CompressRejectsZeroWidth) {
  Rng rng(14);
  EXPECT_THROW(sketch_compress(fixtures::random_matrix(2, 4, rng), 0, rng), ParameterError);
  EXPECT_EQ(sketch_compress(fixtures::random_matrix(2, 4, rng), 3, rng).cols(), 3u);
}
