#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hbt/correlator.hpp"
#include "hbt/theory.hpp"
#include "oracles.hpp"

using namespace hbt;

namespace {

ProbabilitySeries series(const std::vector<double>& v, double bin = 0.1) {
  return {bin, Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()))};
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

ProbabilitySeries geometric_p1(Index n, double p) {
  ProbabilitySeries s = zero_series(0.1, n);
  for (Index k = 1; k < n; ++k) s.values[k] = p * std::pow(1.0 - p, static_cast<double>(k - 1));
  return s;
}

// Random P1 with entries in [0, 0.5], total mass <= 1, whose renewal sum stays
// in the per-bin probability range.
std::vector<double> random_valid_p1(std::mt19937_64& rng, std::size_t n) {
  for (;;) {
    auto p = oracle::random_p1(rng, n, 0.5, 1.0);
    const auto g = oracle::forward_series(p);
    if (*std::max_element(g.begin(), g.end()) < 0.95) return p;
  }
}

}  // namespace

TEST_CASE("convolve examples") {
  const auto x = series({0.2, 0.3, 0.1, 0.4});
  const auto delta = series({1.0, 0.0, 0.0, 0.0});
  CHECK(convolve(series({1.0}), x).values.size() == 1);
  CHECK(convolve(series({1.0}), x).values[0] == 0.2);
  CHECK(convolve(delta, x).values == x.values);
  CHECK(convolve(x, delta).values == x.values);

  const auto half = series({0.5, 0.5});
  const auto full = convolve_full(half, half);
  REQUIRE(full.size() == 3);
  CHECK(full.values[0] == 0.25);
  CHECK(full.values[1] == 0.5);
  CHECK(full.values[2] == 0.25);

  const std::vector<double> a = {0.0, 0.3, 0.7};
  const std::vector<double> b = {0.0, 0.5, 0.5};
  const auto expected = oracle::convolve_full(a, b);  // [0, 0, 0.15, 0.50, 0.35]
  const auto got = convolve_full(series(a), series(b));
  REQUIRE(got.size() == 5);
  for (Index k = 0; k < 5; ++k) CHECK(std::abs(got.values[k] - expected[static_cast<std::size_t>(k)]) <= 1e-15);
  CHECK(got.values[2] == doctest::Approx(0.15));
  CHECK(got.values[3] == doctest::Approx(0.50));
  CHECK(got.values[4] == doctest::Approx(0.35));

  CHECK_THROWS_AS(convolve(series({0.1}, 0.1), series({0.1}, 0.2)), InvalidArgument);
}

TEST_CASE("convolve is bilinear and commutative") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = series(oracle::random_p1(rng, 40, 0.3, 1.0));
    const auto b = series(oracle::random_p1(rng, 40, 0.3, 1.0));
    const auto c = series(oracle::random_p1(rng, 40, 0.3, 1.0));
    const double s = u(rng);
    const auto ab = convolve(a, b);
    CHECK((ab.values - convolve(b, a).values).cwiseAbs().maxCoeff() <= 1e-15);
    const ProbabilitySeries sum{0.1, s * a.values + c.values};
    const auto lhs = convolve(sum, b).values;
    const Eigen::VectorXd rhs = s * ab.values + convolve(c, b).values;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-14);
    const auto ref = oracle::convolve_window(to_vec(a.values), to_vec(b.values));
    for (Index k = 0; k < ab.size(); ++k) CHECK(std::abs(ab.values[k] - ref[static_cast<std::size_t>(k)]) <= 1e-15);
  }
}

TEST_CASE("self_convolution_series") {
  const auto p1 = series({0.2, 0.1, 0.3});
  const auto one = self_convolution_series(p1, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].values == p1.values);

  const auto two = self_convolution_series(series({0.5, 0.5}), 2);
  REQUIRE(two.size() == 2);
  CHECK(two[1].values[0] == 0.25);
  CHECK(two[1].values[1] == 0.5);

  CHECK_THROWS_AS(self_convolution_series(p1, 0), InvalidArgument);

  // Bernoulli renewal identity: with P1[0] = 0 only the first k terms reach
  // bin k, so 60 terms are the full series on a 60-bin window.
  const auto geo = geometric_p1(60, 0.1);
  const auto terms = self_convolution_series(geo, 60);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(60);
  for (const auto& t : terms) sum += t.values;
  CHECK(sum[0] == 0.0);
  for (Index k = 1; k < 60; ++k) CHECK(sum[k] == doctest::Approx(0.1).scale(0).epsilon(1e-12));
  CHECK((partial_series_sum(geo, 60).values - sum).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("renewal_invert examples") {
  const auto zero = renewal_invert(zero_series(0.1, Index(25)));
  CHECK(zero.values.isZero(0.0));

  ProbabilitySeries flat = zero_series(0.1, Index(80));
  flat.values.tail(79).setConstant(0.1);
  const auto p1 = renewal_invert(flat);
  CHECK(p1.values[0] == 0.0);
  for (Index k = 1; k < 80; ++k) {
    CHECK(p1.values[k] == doctest::Approx(0.1 * std::pow(0.9, static_cast<double>(k - 1))).scale(0).epsilon(1e-12));
  }
  const auto rebuilt = oracle::forward_series(to_vec(p1.values));
  for (Index k = 0; k < 80; ++k) CHECK(std::abs(rebuilt[static_cast<std::size_t>(k)] - flat.values[k]) <= 1e-9);

  const auto g = g_theoretical(SourceModel::chaotic(0.04, 0.5), 0.1, 1000);
  const auto chaotic_p1 = renewal_invert(g);
  CHECK(chaotic_p1.values.minCoeff() >= 0.0);
  CHECK(chaotic_p1.values[0] == doctest::Approx(g.values[0] / (1.0 + g.values[0])).scale(0).epsilon(1e-15));
  const auto chaotic_rebuilt = oracle::forward_series(to_vec(chaotic_p1.values));
  double worst = 0.0;
  for (Index k = 0; k < g.size(); ++k) worst = std::max(worst, std::abs(chaotic_rebuilt[static_cast<std::size_t>(k)] - g.values[k]));
  CHECK(worst <= 1e-9);
}

TEST_CASE("renewal_invert rejects non-physical input") {
  CHECK_THROWS_AS(renewal_invert(series({0.0, 0.5, 0.0})), NumericalError);
  CHECK_THROWS_AS(renewal_invert(series({0.0, 1.0})), InvalidArgument);
  CHECK_THROWS_AS(renewal_invert(series({-0.1, 0.1})), InvalidArgument);
}

TEST_CASE("renewal roundtrip property") {
  std::mt19937_64 rng(20240501);
  for (int trial = 0; trial < 40; ++trial) {
    const auto p = random_valid_p1(rng, 48);
    const auto g = oracle::forward_series(p);
    const auto back = renewal_invert(series(g));
    for (std::size_t k = 0; k < p.size(); ++k) CHECK(std::abs(back.values[static_cast<Index>(k)] - p[k]) <= 1e-9);
  }
}

TEST_CASE("renewal_invert is non-negative on modelled G") {
  for (double rate : {0.03, 0.04, 0.05}) {
    for (double tau_c : {0.3, 0.5, 0.7, 1.0}) {
      for (double m : {0.3, 0.7}) {
        CHECK(renewal_invert(g_theoretical(SourceModel::mixed(rate, tau_c, m), 0.1, 1000)).values.minCoeff() >= 0.0);
      }
      CHECK(renewal_invert(g_theoretical(SourceModel::chaotic(rate, tau_c), 0.1, 1000)).values.minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("correction_from_g") {
  SUBCASE("coherent fixed point") {
    ProbabilitySeries flat{0.1, Eigen::VectorXd::Constant(1000, 0.004)};
    const auto curve = correction_from_g(flat, 0.004, 80);
    CHECK((curve.values.array() - 1.0).abs().maxCoeff() <= 1e-6);

    ProbabilitySeries shifted = flat;
    shifted.values[0] = 0.0;
    const auto curve2 = correction_from_g(shifted, 0.004, 80);
    CHECK((curve2.values.tail(999).array() - 1.0).abs().maxCoeff() <= 1e-6);
  }
  SUBCASE("ninth order chaotic within 5 percent up to 50 ns") {
    const auto model = SourceModel::chaotic(0.04, 0.5);
    const auto g = g_theoretical(model, 0.1, 1001);
    const auto curve = correction_from_g(g, 0.004, 9);
    const auto truth = g2_curve(model, 0.1, 1001);
    for (Index k = 0; k <= 500; ++k) {
      CHECK(std::abs(curve.values[k] - truth.values[k]) / truth.values[k] <= 0.05);
    }
  }
  SUBCASE("first order at zero delay") {
    const auto g = g_theoretical(SourceModel::chaotic(0.04, 0.5), 0.1, 100);
    const auto curve = correction_from_g(g, 0.004, 1);
    CHECK(curve.values[0] == doctest::Approx(0.008 / 1.008 / 0.004));
    CHECK(std::abs(curve.values[0] - 2.0) <= 2.0 * 2.0 * g.values[0]);
  }
  SUBCASE("monotone in order and bounded by the converged value") {
    const auto g = g_theoretical(SourceModel::chaotic(0.04, 0.5), 0.065, 1539);
    const auto limit = correction_from_g(g, 0.04 * 0.065, 200);
    Eigen::VectorXd previous = Eigen::VectorXd::Zero(g.size());
    for (int order = 1; order <= 12; ++order) {
      const auto c = correction_from_g(g, 0.04 * 0.065, order);
      CHECK((c.values - previous).minCoeff() >= 0.0);
      CHECK((limit.values - c.values).minCoeff() >= -1e-12);
      previous = c.values;
    }
  }
  CHECK_THROWS_AS(correction_from_g(series({0.1}), 0.0, 9), InvalidArgument);
  CHECK_THROWS_AS(correction_from_g(series({0.1}), 0.1, 0), InvalidArgument);
}

TEST_CASE("histogram_to_d1") {
  IntervalHistogram h{1.0, {2, 3, 5}, 100, 3.0};
  const auto d1 = histogram_to_d1(h);
  CHECK(d1.values[0] == 0.02);
  CHECK(d1.values[1] == 0.03);
  CHECK(d1.values[2] == 0.05);

  h.counts = {0, 0, 0};
  CHECK(histogram_to_d1(h).values.isZero(0.0));

  h.counts = {50, 30, 20};
  CHECK(histogram_to_d1(h).values.sum() == 1.0);

  h.start_count = 0;
  h.counts = {0, 0, 0};
  CHECK_THROWS_AS(histogram_to_d1(h), InvalidArgument);
  h.start_count = 5;
  h.counts = {3, 3, 0};
  CHECK_THROWS_AS(histogram_to_d1(h), InvalidArgument);
}

TEST_CASE("histogram validation and merge") {
  IntervalHistogram a{0.5, {1, 2, 3, 4}, 20, 2.0};
  IntervalHistogram b{0.5, {4, 3, 2, 1}, 15, 2.0};
  CHECK_NOTHROW(validate(a));
  const auto ab = merge(a, b);
  const auto ba = merge(b, a);
  CHECK(ab.counts == ba.counts);
  CHECK(ab.start_count == 35);
  CHECK(ab.counts == std::vector<std::uint64_t>{5, 5, 5, 5});
  IntervalHistogram c{0.5, {7, 0, 0, 1}, 9, 2.0};
  CHECK(merge(merge(a, b), c).counts == merge(a, merge(b, c)).counts);
  IntervalHistogram wrong{0.25, {1, 2, 3, 4}, 20, 1.0};
  CHECK_THROWS_AS(merge(a, wrong), InvalidArgument);
  IntervalHistogram bad_window{0.5, {1, 2, 3, 4}, 20, 10.0};
  CHECK_THROWS_AS(validate(bad_window), InvalidArgument);
}

TEST_CASE("d1_from_p1") {
  const double q = 0.3;
  ProbabilitySeries delta = zero_series(1.0, Index(12));
  delta.values[3] = q;
  const auto d1 = d1_from_p1(delta);
  CHECK(d1.values[3] == doctest::Approx(q / 2));
  CHECK(d1.values[6] == doctest::Approx(q * q / 4));
  CHECK(d1.values[9] == doctest::Approx(q * q * q / 8));
  CHECK(d1.values[4] == 0.0);

  CHECK(d1_from_p1(zero_series(0.1, Index(30))).values.isZero(0.0));

  // 2 * sum Dn reproduces the flat renewal density of a geometric P1.
  const auto geo = geometric_p1(200, 0.1);
  const auto dsum = partial_series_sum(d1_from_p1(geo), 200);
  for (Index k = 1; k < 200; ++k) CHECK(std::abs(2.0 * dsum.values[k] - 0.1) <= 1e-9);

  ProbabilitySeries heavy = zero_series(0.1, Index(5));
  heavy.values[0] = 0.99;
  CHECK_THROWS_AS(d1_from_p1(heavy, 3), NumericalError);
}

TEST_CASE("D/P identity on randomised inputs") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = random_valid_p1(rng, 40);
    const auto d1 = d1_from_p1(series(p));
    const auto d_sum = oracle::forward_series(to_vec(d1.values));
    const auto p_sum = oracle::forward_series(p);
    for (std::size_t k = 0; k < p.size(); ++k) CHECK(std::abs(2.0 * d_sum[k] - p_sum[k]) <= 1e-9);
  }
}

TEST_CASE("correction_from_d1") {
  const auto model = SourceModel::chaotic(0.04, 0.5);
  const auto g = g_theoretical(model, 0.1, 1000);
  const auto p1 = renewal_invert(g);
  const auto d1 = d1_from_p1(p1);

  SUBCASE("matches the G route once both series converge") {
    CorrectionConfig config{60, MeanRateMode::given, 0.04};
    const auto from_d = correction_from_d1(d1, config, 0.0);
    const auto from_g = correction_from_g(g, 0.004, 60);
    CHECK((from_d.values - from_g.values).cwiseAbs().maxCoeff() <= 1e-9);
  }
  SUBCASE("from_counts uses the supplied rate") {
    CorrectionConfig config{9, MeanRateMode::from_counts, 0.0};
    const auto a = correction_from_d1(d1, config, 0.004);
    const auto b = correction_from_d1(d1, CorrectionConfig{9, MeanRateMode::given, 0.04}, 0.0);
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK_THROWS_AS(correction_from_d1(d1, config, 0.0), InvalidArgument);
  }
  SUBCASE("tail normalisation") {
    CorrectionConfig config{9, MeanRateMode::tail_normalized, 0.0};
    const auto curve = correction_from_d1(d1, config, 123.0);
    const Index tail = curve.size() / 10;
    CHECK(curve.values.tail(tail).mean() == doctest::Approx(1.0).scale(0).epsilon(1e-12));
    CHECK(curve.values[0] == doctest::Approx(2.0).scale(0).epsilon(0.01));

    const auto long_model = SourceModel::chaotic(0.04, 10.0);
    const auto long_d1 = d1_from_p1(renewal_invert(g_theoretical(long_model, 0.1, 1000)));
    CHECK_THROWS_AS(correction_from_d1(long_d1, config, 1.0), InvalidArgument);
  }
  SUBCASE("all-zero D1") {
    const auto curve = correction_from_d1(zero_series(0.1, Index(100)), CorrectionConfig{}, 0.004);
    CHECK(curve.values.isZero(0.0));
  }
  CHECK_THROWS_AS(correction_from_d1(d1, CorrectionConfig{0, MeanRateMode::from_counts, 0.0}, 0.004),
                  InvalidArgument);
  CHECK_THROWS_AS(correction_from_d1(d1, CorrectionConfig{9, MeanRateMode::given, 0.0}, 0.004),
                  InvalidArgument);
}

TEST_CASE("estimate_mean_rate") {
  PhotonStream s;
  s.duration = 10'000'000'000ULL;  // 10 ms
  s.timestamps.resize(400'000);
  for (std::size_t i = 0; i < s.timestamps.size(); ++i) s.timestamps[i] = i * 25'000;
  const std::vector<PhotonStream> one = {s};
  const auto r = estimate_mean_rate(one, 0.1);
  CHECK(r.per_bin == doctest::Approx(0.004).scale(0).epsilon(1e-12));
  CHECK_FALSE(r.degenerate);

  const std::vector<PhotonStream> empty = {PhotonStream{{}, 1000}};
  const auto z = estimate_mean_rate(empty, 0.1);
  CHECK(z.per_bin == 0.0);
  CHECK(z.degenerate);

  PhotonStream arm;
  arm.duration = 1'000'000'000'000ULL;  // 1 s
  arm.timestamps.resize(135'000);
  const std::vector<PhotonStream> two = {arm, arm};
  CHECK(estimate_mean_rate(two, 0.065).per_bin == doctest::Approx(1.755e-5).scale(0).epsilon(1e-12));

  const std::vector<PhotonStream> zero_duration = {PhotonStream{}};
  CHECK_THROWS_AS(estimate_mean_rate(zero_duration, 0.1), InvalidArgument);
}
