#include "hbt/theory.hpp"

#include <numbers>
#include <string>

namespace hbt {

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::chaotic: return "chaotic";
    case SourceKind::coherent: return "coherent";
    case SourceKind::mixed: return "mixed";
  }
  return "unknown";
}

SourceKind source_kind_from_string(std::string_view name) {
  if (name == "chaotic") return SourceKind::chaotic;
  if (name == "coherent") return SourceKind::coherent;
  if (name == "mixed") return SourceKind::mixed;
  throw InvalidArgument("unknown source kind '" + std::string(name) + "'");
}

void validate(const SourceModel& model) {
  require(std::isfinite(model.mean_rate) && model.mean_rate > 0.0,
          "source mean_rate must be > 0 photons/ns");
  const double m = model.chaotic_fraction;
  require(m >= 0.0 && m <= 1.0, "chaotic_fraction must lie in [0, 1]");
  if (m > 0.0) {
    require(std::isfinite(model.coherence_time) && model.coherence_time > 0.0,
            "coherence_time must be > 0 when chaotic_fraction > 0");
  }
  switch (model.kind) {
    case SourceKind::chaotic:
      require(m == 1.0, "chaotic source requires chaotic_fraction = 1");
      break;
    case SourceKind::coherent:
      require(m == 0.0, "coherent source requires chaotic_fraction = 0");
      break;
    case SourceKind::mixed:
      require(m > 0.0 && m < 1.0, "mixed source requires 0 < chaotic_fraction < 1");
      break;
  }
}

double g2_model(double tau, const SourceModel& model) {
  validate(model);
  if (model.chaotic_fraction == 0.0) return 1.0;
  const double g1 = g1_lorentzian(tau, model.coherence_time);
  return 1.0 + model.bunching_amplitude() * g1 * g1;
}

CorrelationCurve g2_curve(const SourceModel& model, double bin_width, Index num_bins) {
  validate(model);
  require(bin_width > 0.0, "bin_width must be positive");
  require(num_bins >= 1, "num_bins must be >= 1");
  CorrelationCurve curve{bin_width, Vector<double>(num_bins)};
  for (Index k = 0; k < num_bins; ++k) curve.values[k] = g2_model(curve.delay(k), model);
  return curve;
}

ProbabilitySeries g_theoretical(const SourceModel& model, double bin_width, Index num_bins) {
  validate(model);
  require(bin_width > 0.0, "bin_width must be positive");
  require(num_bins >= 1, "num_bins must be >= 1");
  const double per_bin = model.mean_rate * bin_width;
  require(2.0 * per_bin < 1.0,
          "mean_rate * bin_width * 2 must be < 1 for a per-bin probability");
  const CorrelationCurve g2 = g2_curve(model, bin_width, num_bins);
  return {bin_width, per_bin * g2.values};
}

double coherence_time_from_linewidth(double fwhm_linewidth_hz) {
  require(std::isfinite(fwhm_linewidth_hz) && fwhm_linewidth_hz > 0.0,
          "linewidth must be positive");
  return 1e9 / (std::numbers::pi * fwhm_linewidth_hz);
}

double linewidth_from_coherence_time(double coherence_time_ns) {
  require(std::isfinite(coherence_time_ns) && coherence_time_ns > 0.0,
          "coherence time must be positive");
  return 1e9 / (std::numbers::pi * coherence_time_ns);
}

}  // namespace hbt
