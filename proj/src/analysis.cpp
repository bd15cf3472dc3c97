#include "hbt/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <future>
#include <string>
#include <vector>

namespace hbt {

Eigen::VectorXd relative_error(const CorrelationCurve& estimate, const CorrelationCurve& truth) {
  require(estimate.size() == truth.size() && same_bin_width(estimate.bin_width, truth.bin_width),
          "relative_error: curves on different grids");
  require(truth.size() == 0 || truth.values.minCoeff() > 0.0,
          "relative_error: reference curve must be strictly positive");
  return ((estimate.values - truth.values).array().abs() / truth.values.array() * 100.0).matrix();
}

std::string_view to_string(SweepAxis axis) {
  return axis == SweepAxis::intensity ? "intensity" : "coherence_time";
}

SweepAxis sweep_axis_from_string(std::string_view name) {
  if (name == "intensity") return SweepAxis::intensity;
  if (name == "coherence_time" || name == "coherence-time" || name == "tau_c") {
    return SweepAxis::coherence_time;
  }
  throw InvalidArgument("unknown sweep axis '" + std::string(name) + "'");
}

Eigen::VectorXd SweepSpec::values() const {
  require(steps >= 1, "sweep steps must be >= 1");
  if (steps == 1) return Eigen::VectorXd::Constant(1, from);
  return Eigen::VectorXd::LinSpaced(steps, from, to);
}

Eigen::VectorXd model_relative_error(const SourceModel& model, int order, double bin_width,
                                     Index num_bins) {
  const ProbabilitySeries g = g_theoretical(model, bin_width, num_bins);
  const CorrelationCurve corrected = correction_from_g(g, model.mean_rate * bin_width, order);
  return relative_error(corrected, g2_curve(model, bin_width, num_bins));
}

ErrorSurface error_surface(const SweepSpec& sweep, const SourceModel& fixed, int order,
                           double bin_width, Index num_bins) {
  validate(fixed);
  require(order >= 1, "order must be >= 1");
  require(num_bins >= 1, "num_bins must be >= 1");

  ErrorSurface surface;
  surface.axis = sweep.axis;
  surface.axis_values = sweep.values();
  surface.delays = Eigen::VectorXd::LinSpaced(num_bins, 0.0, static_cast<double>(num_bins - 1) * bin_width);
  surface.delta.resize(surface.axis_values.size(), num_bins);

  std::vector<SourceModel> models;
  for (Index i = 0; i < surface.axis_values.size(); ++i) {
    SourceModel m = fixed;
    if (sweep.axis == SweepAxis::intensity) {
      m.mean_rate = surface.axis_values[i];
    } else {
      m.coherence_time = surface.axis_values[i];
    }
    validate(m);
    require(2.0 * m.mean_rate * bin_width < 1.0,
            "sweep leaves the per-bin probability regime (mean_rate * bin_width * 2 >= 1)");
    models.push_back(m);
  }

  std::vector<std::future<Eigen::VectorXd>> rows;
  rows.reserve(models.size());
  for (const auto& m : models) {
    rows.push_back(std::async(std::launch::async, model_relative_error, m, order, bin_width, num_bins));
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    surface.delta.row(static_cast<Index>(i)) = rows[i].get().transpose();
  }
  return surface;
}

Eigen::VectorXd spread(const ErrorSurface& surface) {
  require(surface.delta.rows() >= 1, "empty surface");
  return (surface.delta.colwise().maxCoeff() - surface.delta.colwise().minCoeff()).transpose();
}

// ---------------------------------------------------------------------------

double bunching_model(double tau, double b, double tau_c) {
  return 1.0 + b * std::exp(-2.0 * std::abs(tau) / tau_c);
}

namespace {

// Bin-average factor of exp(-2t/tau_c) over a bin of the given width, and its
// derivative with respect to tau_c. Width 0 means point sampling.
struct AverageFactor {
  double value = 1.0;
  double derivative = 0.0;
};

AverageFactor average_factor(double width, double tau_c) {
  if (width <= 0.0) return {};
  const double x = 2.0 * width / tau_c;
  const double decay = std::exp(-x);
  const double one_minus = -std::expm1(-x);
  return {one_minus / x, one_minus / (2.0 * width) - decay / tau_c};
}

}  // namespace

double bunching_model_bin_average(double tau, double width, double b, double tau_c) {
  require(width >= 0.0, "bin width must be non-negative");
  return 1.0 + b * std::exp(-2.0 * std::abs(tau) / tau_c) * average_factor(width, tau_c).value;
}

namespace {

struct FitProblem {
  Eigen::VectorXd tau;
  Eigen::VectorXd y;
  Eigen::VectorXd sqrt_w;
  double width = 0.0;

  double model(double t, const Eigen::Vector2d& p) const {
    return 1.0 + p[0] * std::exp(-2.0 * t / p[1]) * average_factor(width, p[1]).value;
  }

  double cost(const Eigen::Vector2d& p) const {
    double c = 0.0;
    for (Index k = 0; k < tau.size(); ++k) {
      const double r = sqrt_w[k] * (y[k] - model(tau[k], p));
      c += r * r;
    }
    return c;
  }
};

}  // namespace

FitResult fit_bunching(const CorrelationCurve& curve, const FitOptions& options) {
  require(curve.bin_width > 0.0, "curve bin_width must be positive");
  require(options.max_iterations >= 1, "max_iterations must be >= 1");

  Index n = 0;
  while (n < curve.size() && curve.delay(n) <= options.max_delay * (1.0 + 1e-12)) ++n;
  require(n >= 10, "fit needs at least 10 bins");
  const CorrelationCurve range{curve.bin_width, curve.values.head(n)};
  const double peak = range.values.maxCoeff();
  require(peak >= 1.0 + 1e-3, "no bunching to fit (curve maximum below 1 + 1e-3)");

  const double span = range.delay(n - 1);
  const double tau_est = estimate_coherence_time(range);
  require(span >= 3.0 * tau_est,
          "fit range (" + std::to_string(span) + " ns) shorter than 3 estimated coherence times (" +
              std::to_string(tau_est) + " ns)");

  double b0 = options.b0.value_or(range.values[0] - 1.0);
  if (!(b0 > 0.0)) b0 = peak - 1.0;
  double tau0 = 0.0;
  if (options.tau_c0) {
    tau0 = *options.tau_c0;
  } else {
    const double target = b0 * std::exp(-2.0);
    tau0 = span / 3.0;
    for (Index k = 1; k < n; ++k) {
      const double e = range.values[k] - 1.0;
      if (e <= target) {
        const double prev = range.values[k - 1] - 1.0;
        const double frac = prev > e ? (prev - target) / (prev - e) : 0.0;
        tau0 = range.delay(k - 1) + frac * range.bin_width;
        break;
      }
    }
  }
  const double tau_floor = 1e-3 * curve.bin_width;
  if (!options.tau_c0) tau0 = std::max(tau0, tau_floor);
  require(b0 > 0.0 && tau0 > 0.0, "initial guesses must be positive");
  tau0 = std::max(tau0, tau_floor);

  FitProblem problem;
  problem.tau = Eigen::VectorXd::LinSpaced(n, 0.0, span);
  problem.y = range.values;
  problem.sqrt_w = Eigen::VectorXd::Ones(n);
  if (options.sampling == FitSampling::bin_average) problem.width = curve.bin_width;
  if (options.weighting == FitWeighting::poisson) {
    problem.sqrt_w = range.values.array().max(1e-12).rsqrt().matrix();
  }

  Eigen::Vector2d p(b0, tau0);
  double cost = problem.cost(p);
  double lambda = 1e-3;
  FitResult result;

  for (int it = 1; it <= options.max_iterations; ++it) {
    result.iterations = it;
    Eigen::MatrixXd jac(n, 2);
    Eigen::VectorXd r(n);
    const AverageFactor avg = average_factor(problem.width, p[1]);
    for (Index k = 0; k < n; ++k) {
      const double e = std::exp(-2.0 * problem.tau[k] / p[1]);
      const double w = problem.sqrt_w[k];
      jac(k, 0) = w * e * avg.value;
      jac(k, 1) = w * p[0] * e * (avg.value * 2.0 * problem.tau[k] / (p[1] * p[1]) + avg.derivative);
      r[k] = w * (problem.y[k] - (1.0 + p[0] * e * avg.value));
    }
    const Eigen::Matrix2d normal = jac.transpose() * jac;
    const Eigen::Vector2d gradient = jac.transpose() * r;
    const double diag_floor = 1e-12 * std::max(normal(0, 0), normal(1, 1));

    bool accepted = false;
    while (!accepted && lambda < 1e20) {
      Eigen::Matrix2d damped = normal;
      damped(0, 0) += lambda * std::max(normal(0, 0), diag_floor);
      damped(1, 1) += lambda * std::max(normal(1, 1), diag_floor);
      Eigen::Vector2d candidate = p + damped.ldlt().solve(gradient);
      candidate[0] = std::max(candidate[0], 0.0);
      candidate[1] = std::max(candidate[1], tau_floor);
      const Eigen::Vector2d step = candidate - p;
      const bool small = std::abs(step[0]) <= options.step_tolerance * (std::abs(p[0]) + options.step_tolerance) &&
                         std::abs(step[1]) <= options.step_tolerance * std::abs(p[1]);
      const double candidate_cost = problem.cost(candidate);
      if (candidate_cost <= cost) {
        p = candidate;
        cost = candidate_cost;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
      } else {
        lambda *= 10.0;
      }
      if (small) {
        result.converged = true;
        break;
      }
    }
    if (result.converged) break;
    if (!accepted) {
      // No descent direction remains at any damping: stationary point.
      result.converged = true;
      break;
    }
  }

  if (!result.converged) {
    throw NumericalError("fit_bunching: no convergence after " +
                         std::to_string(options.max_iterations) + " iterations");
  }
  result.b = p[0];
  result.tau_c = p[1];
  double sq = 0.0;
  for (Index k = 0; k < n; ++k) {
    const double d = problem.y[k] - problem.model(problem.tau[k], p);
    sq += d * d;
  }
  result.residual_rms = std::sqrt(sq / static_cast<double>(n));
  return result;
}

}  // namespace hbt
