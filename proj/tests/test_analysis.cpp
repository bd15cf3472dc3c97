#include <doctest.h>

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "hbt/analysis.hpp"
#include "oracles.hpp"

using namespace hbt;

namespace {

constexpr double kTan04Pi = 3.077683537175253;  // tan(0.4 pi)

CorrelationCurve model_curve(double b, double tau_c, double bin, Index n) {
  CorrelationCurve c{bin, Eigen::VectorXd(n)};
  for (Index k = 0; k < n; ++k) c.values[k] = 1.0 + b * std::exp(-2.0 * k * bin / tau_c);
  return c;
}

double max_up_to(const Eigen::VectorXd& delta, double bin, double limit) {
  const auto n = static_cast<Index>(std::llround(limit / bin)) + 1;
  return delta.head(n).maxCoeff();
}

PowerSpectrum synthetic_spectrum(double f_max, Index bins, double (*shape)(double, double), double param) {
  PowerSpectrum s;
  s.frequency = Eigen::VectorXd::LinSpaced(bins + 1, 0.0, f_max);
  s.power.resize(bins + 1);
  for (Index k = 0; k <= bins; ++k) s.power[k] = shape(s.frequency[k], param);
  s.power[0] = 1e9;  // DC must be ignored
  return s;
}

double flat(double, double) { return 1.0; }
double lorentzian(double f, double gamma) { return 1.0 / (1.0 + (f / gamma) * (f / gamma)); }

}  // namespace

TEST_CASE("relative_error") {
  const CorrelationCurve truth{0.1, Eigen::VectorXd::Ones(3)};
  const CorrelationCurve est{0.1, Eigen::VectorXd::Constant(3, 1.05)};
  CHECK(relative_error(est, truth)[0] == doctest::Approx(5.0));
  CHECK(relative_error(truth, truth).isZero(0.0));
  const CorrelationCurve other{0.2, Eigen::VectorXd::Ones(3)};
  CHECK_THROWS_AS(relative_error(est, other), InvalidArgument);
  const CorrelationCurve zero{0.1, Eigen::VectorXd::Zero(3)};
  CHECK_THROWS_AS(relative_error(est, zero), InvalidArgument);

  const Eigen::VectorXd delta = model_relative_error(SourceModel::chaotic(0.04, 0.5), 9, 0.1, 1001);
  CHECK(max_up_to(delta, 0.1, 50.0) <= 5.0);
  CHECK((delta.array() >= 0.0).all());
}

TEST_CASE("sweep specification") {
  CHECK(SweepSpec{SweepAxis::intensity, 0.03, 0.05, 3}.values().isApprox(Eigen::Vector3d(0.03, 0.04, 0.05)));
  CHECK(SweepSpec{SweepAxis::intensity, 0.03, 0.05, 1}.values().size() == 1);
  CHECK_THROWS_AS(SweepSpec({SweepAxis::intensity, 0.03, 0.05, 0}).values(), InvalidArgument);
  CHECK(sweep_axis_from_string("coherence_time") == SweepAxis::coherence_time);
  CHECK(to_string(SweepAxis::intensity) == "intensity");
  CHECK_THROWS_AS(sweep_axis_from_string("colour"), InvalidArgument);
}

TEST_CASE("error_surface") {
  const double bin = 0.1;
  const Index n = 1001;
  const auto by_rate = error_surface({SweepAxis::intensity, 0.03, 0.05, 3}, SourceModel::chaotic(0.04, 1.0), 9, bin, n);
  CHECK(by_rate.delta.rows() == 3);
  CHECK(by_rate.delta.cols() == n);
  CHECK(by_rate.delays[n - 1] == doctest::Approx(100.0));
  CHECK((by_rate.delta.array() >= 0.0).all());
  const Eigen::VectorXd row_max = by_rate.delta.rowwise().maxCoeff();
  CHECK(row_max[1] >= row_max[0]);
  CHECK(row_max[2] >= row_max[1]);

  SUBCASE("coherence time matters less than intensity") {
    const auto by_tau = error_surface({SweepAxis::coherence_time, 0.3, 0.7, 5}, SourceModel::chaotic(0.04, 0.5), 9, bin, n);
    const auto by_rate5 = error_surface({SweepAxis::intensity, 0.03, 0.05, 5}, SourceModel::chaotic(0.04, 1.0), 9, bin, n);
    const Eigen::VectorXd s_tau = spread(by_tau);
    const Eigen::VectorXd s_rate = spread(by_rate5);
    for (double tau : {50.0, 80.0, 100.0}) {
      const auto k = static_cast<Index>(std::llround(tau / bin));
      CHECK(s_tau[k] <= s_rate[k]);
    }
  }

  SUBCASE("single point equals relative_error") {
    const auto model = SourceModel::chaotic(0.04, 0.5);
    const auto one = error_surface({SweepAxis::intensity, 0.04, 0.04, 1}, model, 9, bin, 201);
    const auto g = g_theoretical(model, bin, 201);
    const auto expected = relative_error(correction_from_g(g, 0.04 * bin, 9), g2_curve(model, bin, 201));
    CHECK(one.delta.rows() == 1);
    CHECK(one.delta.row(0).transpose() == expected);
  }

  SUBCASE("deterministic") {
    const auto again = error_surface({SweepAxis::intensity, 0.03, 0.05, 3}, SourceModel::chaotic(0.04, 1.0), 9, bin, n);
    CHECK(again.delta == by_rate.delta);
  }

  SUBCASE("order refinement") {
    double previous = std::numeric_limits<double>::infinity();
    for (int order : {1, 3, 5, 7, 9, 11}) {
      const double m = max_up_to(model_relative_error(SourceModel::chaotic(0.04, 0.5), order, bin, n), bin, 50.0);
      CHECK(m <= previous);
      previous = m;
    }
  }

  CHECK_THROWS_AS(error_surface({SweepAxis::intensity, 3.0, 6.0, 2}, SourceModel::chaotic(0.04, 1.0), 9, bin, n),
                  InvalidArgument);
}

TEST_CASE("fit_bunching on noiseless model curves") {
  struct Case {
    double b, tau_c;
  };
  for (const Case c : {Case{0.626, 0.535}, Case{0.479, 0.768}, Case{0.524, 0.651}, Case{1.0, 0.5}}) {
    CAPTURE(c.b);
    const auto curve = model_curve(c.b, c.tau_c, 0.05, 400);
    const auto fit = fit_bunching(curve);
    CHECK(fit.converged);
    CHECK(std::abs(fit.b - c.b) <= 1e-6);
    CHECK(std::abs(fit.tau_c - c.tau_c) <= 1e-6);
    CHECK(fit.residual_rms <= 1e-10);
    CHECK(fit.iterations <= 200);

    FitOptions weighted;
    weighted.weighting = FitWeighting::poisson;
    const auto wfit = fit_bunching(curve, weighted);
    CHECK(std::abs(wfit.b - c.b) <= 1e-6);
    CHECK(std::abs(wfit.tau_c - c.tau_c) <= 1e-6);
  }

  SUBCASE("mixture model reproduces the amplitude") {
    const auto model = SourceModel::with_bunching(0.04, 0.535, 0.626);
    const auto fit = fit_bunching(g2_curve(model, 0.05, 400));
    CHECK(std::abs(fit.b - 0.626) <= 1e-6);
    CHECK(std::abs(fit.tau_c - 0.535) <= 1e-6);
  }

  SUBCASE("bin-averaged curves") {
    const double bin = 0.1;
    CorrelationCurve curve{bin, Eigen::VectorXd(200)};
    for (Index k = 0; k < 200; ++k) {
      const double a = k * bin;
      const double avg = oracle::trapezoid([](double t) { return 1.0 + 0.9 * std::exp(-2.0 * t / 0.5); }, a, a + bin, 20000) / bin;
      curve.values[k] = avg;
      CHECK(bunching_model_bin_average(a, bin, 0.9, 0.5) == doctest::Approx(avg).scale(0).epsilon(1e-10));
    }
    FitOptions options;
    options.sampling = FitSampling::bin_average;
    const auto fit = fit_bunching(curve, options);
    CHECK(fit.b == doctest::Approx(0.9).scale(0).epsilon(1e-6));
    CHECK(fit.tau_c == doctest::Approx(0.5).scale(0).epsilon(1e-6));
    const auto naive = fit_bunching(curve);
    CHECK(naive.b < 0.8);
  }

  SUBCASE("fit range limit") {
    FitOptions options;
    options.max_delay = 5.0;
    const auto fit = fit_bunching(model_curve(0.5, 0.5, 0.05, 2000), options);
    CHECK(fit.b == doctest::Approx(0.5).scale(0).epsilon(1e-6));
  }
}

TEST_CASE("fit_bunching errors") {
  CHECK_THROWS_AS(fit_bunching(CorrelationCurve{0.1, Eigen::VectorXd::Ones(100)}), InvalidArgument);
  CHECK_THROWS_AS(fit_bunching(model_curve(1.0, 0.5, 0.1, 5)), InvalidArgument);
  // Ten bins covering much less than three coherence times.
  CHECK_THROWS_AS(fit_bunching(model_curve(1.0, 50.0, 0.1, 12)), InvalidArgument);
  FitOptions starved;
  starved.max_iterations = 1;
  starved.b0 = 5.0;
  starved.tau_c0 = 20.0;
  CHECK_THROWS_AS(fit_bunching(model_curve(1.0, 0.5, 0.05, 400), starved), NumericalError);
}

TEST_CASE("bandwidth of synthetic spectra") {
  SUBCASE("flat") {
    const auto s = synthetic_spectrum(10.0, 1000, flat, 0.0);
    CHECK(std::abs(bandwidth_from_spectrum(s) - 8.0) <= 0.01 + 1e-12);
  }
  SUBCASE("lorentzian") {
    const double gamma = 0.5;
    const double f_max = 2000.0 * gamma;
    const auto s = synthetic_spectrum(f_max, 2'000'000, lorentzian, gamma);
    const double bw = bandwidth_from_spectrum(s);
    CHECK(std::abs(bw / (kTan04Pi * gamma) - 1.0) <= 0.03);

    // Independent oracle on the same truncated band: bisect the trapezoid
    // cumulative energy.
    auto energy = [&](double f) {
      return oracle::trapezoid([&](double x) { return lorentzian(x, gamma); }, 0.0, f, 200000);
    };
    const double target = 0.8 * energy(f_max);
    double lo = 0.0, hi = f_max;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      (energy(mid) < target ? lo : hi) = mid;
    }
    CHECK(std::abs(bw - lo) <= 2.0 * (f_max / 2'000'000));
  }
  SUBCASE("errors") {
    PowerSpectrum dc_only = synthetic_spectrum(1.0, 10, flat, 0.0);
    dc_only.power.tail(10).setZero();
    CHECK_THROWS_AS(bandwidth_from_spectrum(dc_only), InvalidArgument);
    CHECK_THROWS_AS(effective_bandwidth(IntensityTrace{0.01, Eigen::VectorXd::Constant(8192, 3.0)}), InvalidArgument);
    CHECK_THROWS_AS(effective_bandwidth(IntensityTrace{0.01, Eigen::VectorXd::Ones(100)}), InvalidArgument);
  }
}

TEST_CASE("bandwidth of simulated chaotic light") {
  const double tau_c = 0.5;
  const auto trace = simulate_intensity(SourceModel::chaotic(0.04, tau_c), tau_c / 100.0, tau_c / 100.0 * (1 << 20), 11);
  const double bw = effective_bandwidth(trace);
  CHECK(effective_bandwidth(IntensityTrace{trace.dt, trace.samples * 37.5}) == doctest::Approx(bw).scale(0).epsilon(1e-12));

  // Half-width from the Lorentzian linearisation 1/P = (1 + f^2/gamma^2)/P0,
  // relative least squares over bins 2 .. 2 GHz (bin 1 is skipped: the
  // per-segment mean removal leaks into it).
  const auto spectrum = welch_spectrum(trace);
  Index m = 2;
  while (spectrum.frequency[m] < 2.0) ++m;
  Eigen::MatrixXd design(m - 2, 2);
  Eigen::VectorXd inverse(m - 2);
  for (Index k = 2; k < m; ++k) {
    const double p = spectrum.power[k];
    design(k - 2, 0) = p;
    design(k - 2, 1) = p * spectrum.frequency[k] * spectrum.frequency[k];
    inverse[k - 2] = 1.0;
  }
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(inverse);
  const double half_width = std::sqrt(coef[0] / coef[1]);
  REQUIRE(half_width > 0.0);
  MESSAGE("bandwidth " << bw << " GHz, half-width " << half_width << " GHz");
  CHECK(bw / (kTan04Pi * half_width) == doctest::Approx(1.0).scale(0).epsilon(0.10));
  // Intensity spectrum of a Lorentzian line has half-width 1 / (pi tau_c).
  CHECK(half_width == doctest::Approx(1.0 / (std::numbers::pi * tau_c)).scale(0).epsilon(0.10));
}
