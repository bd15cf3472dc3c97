#pragma once

#include <cmath>
#include <string_view>

#include "hbt/error.hpp"
#include "hbt/series.hpp"

namespace hbt {

enum class SourceKind { chaotic, coherent, mixed };

std::string_view to_string(SourceKind kind);
SourceKind source_kind_from_string(std::string_view name);

/// Analytic light source. A mixed source has intensity
/// I(t) = mean_rate * [(1 - m) + m * u(t)] where u is a unit-mean chaotic
/// intensity, so the bunching amplitude is m^2.
struct SourceModel {
  SourceKind kind = SourceKind::chaotic;
  double mean_rate = 0.04;       // photons per ns
  double coherence_time = 0.5;   // ns
  double chaotic_fraction = 1.0; // m

  static SourceModel chaotic(double mean_rate, double coherence_time) {
    return {SourceKind::chaotic, mean_rate, coherence_time, 1.0};
  }
  static SourceModel coherent(double mean_rate) {
    return {SourceKind::coherent, mean_rate, 0.0, 0.0};
  }
  static SourceModel mixed(double mean_rate, double coherence_time, double chaotic_fraction) {
    return {SourceKind::mixed, mean_rate, coherence_time, chaotic_fraction};
  }
  /// Mixed source with bunching amplitude b = m^2.
  static SourceModel with_bunching(double mean_rate, double coherence_time, double bunching) {
    return mixed(mean_rate, coherence_time, std::sqrt(bunching));
  }

  double bunching_amplitude() const { return chaotic_fraction * chaotic_fraction; }
};

void validate(const SourceModel& model);

/// First-order coherence of Lorentzian light, exp(-|tau|/tau_c).
template <typename Scalar>
Scalar g1_lorentzian(Scalar tau, Scalar tau_c) {
  using std::abs;
  using std::exp;
  require(tau_c > Scalar(0), "coherence time must be positive");
  return exp(-abs(tau) / tau_c);
}

/// 1 + m^2 exp(-2|tau|/tau_c); exactly 1 for coherent light.
double g2_model(double tau, const SourceModel& model);

/// g2_model sampled on tau = k*bin_width, k = 0..num_bins-1.
CorrelationCurve g2_curve(const SourceModel& model, double bin_width, Index num_bins);

/// Per-bin pair probability G[k] = (mean_rate * bin_width) * g2(k*bin_width).
ProbabilitySeries g_theoretical(const SourceModel& model, double bin_width, Index num_bins);

/// Lorentzian coherence time (ns) from the FWHM field linewidth (Hz):
/// tau_c = 1 / (pi * linewidth).
double coherence_time_from_linewidth(double fwhm_linewidth_hz);

/// Inverse of coherence_time_from_linewidth.
double linewidth_from_coherence_time(double coherence_time_ns);

}  // namespace hbt
