#pragma once

#include <limits>
#include <optional>
#include <string_view>

#include <Eigen/Core>

#include "hbt/correlator.hpp"
#include "hbt/series.hpp"
#include "hbt/simulator.hpp"
#include "hbt/theory.hpp"

namespace hbt {

// ---------------------------------------------------------------------------
// Relative error of a corrected curve against the analytic model.

/// delta[k] = |estimate[k] - truth[k]| / truth[k] * 100.
Eigen::VectorXd relative_error(const CorrelationCurve& estimate, const CorrelationCurve& truth);

enum class SweepAxis { intensity, coherence_time };

std::string_view to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(std::string_view name);

/// Evenly spaced values from..to inclusive (steps >= 1; steps == 1 gives {from}).
struct SweepSpec {
  SweepAxis axis = SweepAxis::intensity;
  double from = 0.03;
  double to = 0.05;
  int steps = 5;

  Eigen::VectorXd values() const;
};

/// delta(i, k): relative error in percent at axis value i and delay k*bin_width.
struct ErrorSurface {
  SweepAxis axis = SweepAxis::intensity;
  Eigen::VectorXd axis_values;
  Eigen::VectorXd delays;
  Eigen::MatrixXd delta;
};

/// One row per sweep value: the order-N correction of the model's per-bin G,
/// compared against g2_model. Rows are computed independently and placed by
/// index.
ErrorSurface error_surface(const SweepSpec& sweep, const SourceModel& fixed, int order,
                           double bin_width, Index num_bins);

/// Relative-error row for a single model.
Eigen::VectorXd model_relative_error(const SourceModel& model, int order, double bin_width,
                                     Index num_bins);

/// Per-delay spread (max - min over rows) of a surface.
Eigen::VectorXd spread(const ErrorSurface& surface);

// ---------------------------------------------------------------------------
// Bunching fit g2 = 1 + b exp(-2 tau / tau_c).

enum class FitWeighting { unweighted, poisson };

/// How curve samples relate to the model: `point` evaluates g2 at k*bin,
/// `bin_average` averages it over [k*bin, (k+1)*bin) as a histogram does.
enum class FitSampling { point, bin_average };

struct FitOptions {
  std::optional<double> b0;
  std::optional<double> tau_c0;
  double max_delay = std::numeric_limits<double>::infinity();  // ns, fit range upper bound
  FitWeighting weighting = FitWeighting::unweighted;
  FitSampling sampling = FitSampling::point;
  int max_iterations = 200;
  double step_tolerance = 1e-10;
};

struct FitResult {
  double b = 0.0;
  double tau_c = 0.0;
  double residual_rms = 0.0;
  bool converged = false;
  int iterations = 0;
};

double bunching_model(double tau, double b, double tau_c);

/// Mean of bunching_model over [tau, tau + width).
double bunching_model_bin_average(double tau, double width, double b, double tau_c);

/// Levenberg-Marquardt fit with the analytic Jacobian. Poisson weighting uses
/// 1/curve[k] as the per-bin weight (curve values are proportional to counts).
/// Throws InvalidArgument for curves without bunching (max < 1 + 1e-3) or a
/// range shorter than 10 bins / 3 estimated coherence times, and
/// NumericalError when the iteration does not converge.
FitResult fit_bunching(const CorrelationCurve& curve, const FitOptions& options = {});

// ---------------------------------------------------------------------------
// Spectral utilities.

/// One-sided power spectrum; frequency in GHz (trace dt in ns).
struct PowerSpectrum {
  Eigen::VectorXd frequency;
  Eigen::VectorXd power;
};

/// Averaged periodogram (Welch): mean-removed segments, Hann taper, 50 %
/// overlap. Bin 0 is DC.
PowerSpectrum welch_spectrum(const IntensityTrace& trace, Index segment_length = Index(1) << 12);

/// Smallest frequency F such that the energy in bins (0, F] reaches `fraction`
/// of the total energy excluding DC.
double bandwidth_from_spectrum(const PowerSpectrum& spectrum, double fraction = 0.8);

/// 80 % effective bandwidth (GHz) of an intensity trace.
double effective_bandwidth(const IntensityTrace& trace, Index segment_length = Index(1) << 12);

}  // namespace hbt
