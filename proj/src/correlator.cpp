#include "hbt/correlator.hpp"

#include <cmath>
#include <numbers>

namespace hbt {

namespace {

// Relative size of the last retained term below which a bin counts as
// converged for tail normalisation.
constexpr double kConvergedTermFraction = 1e-3;

}  // namespace

std::uint64_t IntervalHistogram::total() const {
  std::uint64_t sum = 0;
  for (auto c : counts) sum += c;
  return sum;
}

void validate(const IntervalHistogram& histogram) {
  require(histogram.bin_width > 0.0, "histogram bin_width must be positive");
  require(histogram.window > 0.0, "histogram window must be positive");
  require(histogram.total() <= histogram.start_count,
          "histogram counts exceed the number of start events");
  const double span = static_cast<double>(histogram.counts.size()) * histogram.bin_width;
  require(std::abs(span - histogram.window) <= histogram.bin_width * (1.0 + 1e-9),
          "histogram length does not match its window");
}

IntervalHistogram merge(const IntervalHistogram& a, const IntervalHistogram& b) {
  require(same_bin_width(a.bin_width, b.bin_width) && a.counts.size() == b.counts.size(),
          "merge: histograms on different grids");
  IntervalHistogram out = a;
  for (std::size_t k = 0; k < out.counts.size(); ++k) out.counts[k] += b.counts[k];
  out.start_count += b.start_count;
  return out;
}

void validate(const CorrectionConfig& config) {
  require(config.order >= 1, "correction order must be >= 1");
  if (config.mean_rate_mode == MeanRateMode::given) {
    require(config.given_rate > 0.0, "given mean rate must be > 0 photons/ns");
  }
}

CorrelationCurve correction_from_g(const ProbabilitySeries& g_series, double mean_rate_per_bin,
                                   int order) {
  require(mean_rate_per_bin > 0.0, "mean_rate_per_bin must be positive");
  require(order >= 1, "order must be >= 1");
  const ProbabilitySeries p1 = renewal_invert(g_series);
  const ProbabilitySeries sum = partial_series_sum(p1, order);
  return {g_series.bin_width, sum.values / mean_rate_per_bin};
}

ProbabilitySeries histogram_to_d1(const IntervalHistogram& histogram) {
  require(histogram.start_count > 0, "histogram has zero start events");
  require(histogram.bin_width > 0.0, "histogram bin_width must be positive");
  require(histogram.total() <= histogram.start_count,
          "histogram counts exceed the number of start events");
  ProbabilitySeries d1 = zero_series(histogram.bin_width, static_cast<Index>(histogram.counts.size()));
  const double starts = static_cast<double>(histogram.start_count);
  for (std::size_t k = 0; k < histogram.counts.size(); ++k) {
    d1.values[static_cast<Index>(k)] = static_cast<double>(histogram.counts[k]) / starts;
  }
  return d1;
}

double estimate_coherence_time(const CorrelationCurve& curve, double baseline) {
  if (curve.size() == 0) return 0.0;
  const double excess0 = curve.values[0] - baseline;
  if (!(excess0 > 0.0)) return 0.0;
  const double half = 0.5 * excess0;
  double t_half = curve.delay(curve.size() - 1);
  for (Index k = 1; k < curve.size(); ++k) {
    const double e = curve.values[k] - baseline;
    if (e <= half) {
      const double prev = curve.values[k - 1] - baseline;
      const double frac = prev > e ? (prev - half) / (prev - e) : 0.0;
      t_half = curve.delay(k - 1) + frac * curve.bin_width;
      break;
    }
  }
  return 2.0 * t_half / std::numbers::ln2;
}

CorrelationCurve correction_from_d1(const ProbabilitySeries& d1, const CorrectionConfig& config,
                                    double mean_rate_per_bin) {
  validate(config);
  for (Index k = 0; k < d1.size(); ++k) {
    require(d1.values[k] >= 0.0 && d1.values[k] <= 1.0, "D1 values must lie in [0, 1]");
  }

  ProbabilitySeries term = d1;
  ProbabilitySeries sum = d1;
  for (int n = 2; n <= config.order; ++n) {
    term = convolve(term, d1);
    sum.values += term.values;
  }
  Vector<double> raw = 2.0 * sum.values;

  switch (config.mean_rate_mode) {
    case MeanRateMode::given:
      return {d1.bin_width, raw / (config.given_rate * d1.bin_width)};
    case MeanRateMode::from_counts:
      require(mean_rate_per_bin > 0.0, "mean_rate_per_bin must be positive");
      return {d1.bin_width, raw / mean_rate_per_bin};
    case MeanRateMode::tail_normalized:
      break;
  }

  // Converged prefix: bins where the last retained term is a negligible part
  // of the partial sum.
  const Vector<double> last = 2.0 * term.values;
  Index converged = raw.size();
  if (config.order > 1) {
    converged = 0;
    while (converged < raw.size() && last[converged] <= kConvergedTermFraction * raw[converged]) {
      ++converged;
    }
  }
  require(converged >= 1, "tail normalisation: no converged bins");
  const Index tail = std::max<Index>(1, converged / 10);
  const double tail_mean = raw.segment(converged - tail, tail).mean();
  if (!(tail_mean > 0.0)) throw NumericalError("tail normalisation: empty tail");

  CorrelationCurve curve{d1.bin_width, raw / tail_mean};
  const double tau_c = estimate_coherence_time(curve);
  const double window = static_cast<double>(d1.size()) * d1.bin_width;
  require(window >= 20.0 * tau_c,
          "tail normalisation needs a window of at least 20 coherence times (estimated tau_c = " +
              std::to_string(tau_c) + " ns)");
  return curve;
}

ProbabilitySeries d1_from_p1(const ProbabilitySeries& p1, int max_terms) {
  require(max_terms >= 1, "max_terms must be >= 1");
  for (Index k = 0; k < p1.size(); ++k) {
    require(p1.values[k] >= 0.0 && p1.values[k] <= 1.0, "P1 values must lie in [0, 1]");
  }
  ProbabilitySeries d1 = zero_series(p1.bin_width, p1.size());
  if (p1.size() == 0) return d1;

  ProbabilitySeries power = p1;  // Pn
  double scale = 0.5;            // 1 / 2^n
  for (int n = 1; n <= max_terms; ++n) {
    const double largest = scale * power.values.maxCoeff();
    d1.values += scale * power.values;
    if (largest < 1e-15) return d1;
    power = convolve(power, p1);
    scale *= 0.5;
  }
  if (scale * power.values.maxCoeff() >= 1e-12) {
    throw NumericalError("d1_from_p1: series did not converge within " +
                         std::to_string(max_terms) + " terms");
  }
  return d1;
}

MeanRateEstimate estimate_mean_rate(std::span<const PhotonStream> streams, double bin_width) {
  require(bin_width > 0.0, "bin_width must be positive");
  require(!streams.empty(), "estimate_mean_rate needs at least one stream");
  const Picoseconds duration = streams.front().duration;
  require(duration > 0, "stream duration must be positive");
  std::uint64_t total = 0;
  for (const auto& s : streams) {
    require(s.duration == duration, "streams must share the same duration");
    total += s.size();
  }
  const double bins = (static_cast<double>(duration) * 1e-3) / bin_width;
  MeanRateEstimate estimate;
  estimate.per_bin = static_cast<double>(total) / bins;
  estimate.degenerate = total == 0;
  return estimate;
}

}  // namespace hbt
