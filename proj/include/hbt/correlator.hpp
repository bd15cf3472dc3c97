#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hbt/error.hpp"
#include "hbt/photon_stream.hpp"
#include "hbt/series.hpp"

namespace hbt {

/// Raw start-stop interval counts. counts[k] is the number of starts whose
/// first stop fell in [k*bin_width, (k+1)*bin_width).
struct IntervalHistogram {
  double bin_width = 0.0;  // ns
  std::vector<std::uint64_t> counts;
  std::uint64_t start_count = 0;
  double window = 0.0;  // ns

  std::uint64_t total() const;
};

void validate(const IntervalHistogram& histogram);

/// Bin-wise sum of two histograms on the same grid. Exact, associative and
/// commutative.
IntervalHistogram merge(const IntervalHistogram& a, const IntervalHistogram& b);

enum class MeanRateMode { given, from_counts, tail_normalized };

struct CorrectionConfig {
  int order = 9;
  MeanRateMode mean_rate_mode = MeanRateMode::from_counts;
  double given_rate = 0.0;  // photons per ns, used when mean_rate_mode == given
};

void validate(const CorrectionConfig& config);

// ---------------------------------------------------------------------------
// Discrete convolution algebra on the delay grid.

/// Full linear convolution, length a.size() + b.size() - 1.
template <typename Scalar>
BasicProbabilitySeries<Scalar> convolve_full(const BasicProbabilitySeries<Scalar>& a,
                                             const BasicProbabilitySeries<Scalar>& b) {
  require(same_bin_width(a.bin_width, b.bin_width), "convolve: mismatched bin_width");
  if (a.size() == 0 || b.size() == 0) return zero_series(a.bin_width, Index(0));
  const Index n = a.size() + b.size() - 1;
  BasicProbabilitySeries<Scalar> out = zero_series(a.bin_width, n);
  for (Index i = 0; i < a.size(); ++i) {
    if (a.values[i] == Scalar(0)) continue;
    out.values.segment(i, b.size()) += a.values[i] * b.values;
  }
  return out;
}

/// Convolution clipped to the shorter input's window:
/// out[k] = sum_{j=0..k} a[j] b[k-j].
template <typename Scalar>
BasicProbabilitySeries<Scalar> convolve(const BasicProbabilitySeries<Scalar>& a,
                                        const BasicProbabilitySeries<Scalar>& b) {
  require(same_bin_width(a.bin_width, b.bin_width), "convolve: mismatched bin_width");
  const Index n = std::min(a.size(), b.size());
  BasicProbabilitySeries<Scalar> out = zero_series(a.bin_width, n);
  for (Index k = 0; k < n; ++k) {
    out.values[k] = a.values.head(k + 1).dot(b.values.head(k + 1).reverse());
  }
  return out;
}

/// [P1, P2, ..., PN] with Pn = P(n-1) * P1, each clipped to the window.
template <typename Scalar>
std::vector<BasicProbabilitySeries<Scalar>> self_convolution_series(
    const BasicProbabilitySeries<Scalar>& p1, int order) {
  require(order >= 1, "order must be >= 1");
  std::vector<BasicProbabilitySeries<Scalar>> terms;
  terms.reserve(static_cast<std::size_t>(order));
  terms.push_back(p1);
  for (int n = 2; n <= order; ++n) terms.push_back(convolve(terms.back(), p1));
  return terms;
}

/// sum_{n=1..order} Pn, built without keeping the individual terms.
template <typename Scalar>
BasicProbabilitySeries<Scalar> partial_series_sum(const BasicProbabilitySeries<Scalar>& p1,
                                                  int order) {
  require(order >= 1, "order must be >= 1");
  BasicProbabilitySeries<Scalar> term = p1;
  BasicProbabilitySeries<Scalar> sum = p1;
  for (int n = 2; n <= order; ++n) {
    term = convolve(term, p1);
    sum.values += term.values;
  }
  return sum;
}

/// Solves G = P1 + P1 * G for P1 bin by bin (the discrete form of
/// P1 = L^-1[L(G) / (1 + L(G))]). Throws NumericalError when a bin comes out
/// below -tolerance; values in (-tolerance, 0) are clamped to zero.
template <typename Scalar>
BasicProbabilitySeries<Scalar> renewal_invert(const BasicProbabilitySeries<Scalar>& g,
                                              Scalar tolerance = Scalar(1e-12)) {
  const Index n = g.size();
  for (Index k = 0; k < n; ++k) {
    require(g.values[k] >= Scalar(0) && g.values[k] < Scalar(1),
            "renewal_invert: pair probabilities must lie in [0, 1)");
  }
  BasicProbabilitySeries<Scalar> p1 = zero_series(g.bin_width, n);
  if (n == 0) return p1;
  const Scalar denom = Scalar(1) + g.values[0];
  for (Index k = 0; k < n; ++k) {
    const Scalar history =
        k == 0 ? Scalar(0) : p1.values.head(k).dot(g.values.segment(1, k).reverse());
    Scalar value = (g.values[k] - history) / denom;
    if (value < Scalar(0)) {
      if (value < -tolerance) {
        throw NumericalError("renewal_invert: input is not a valid pair-interval generator "
                             "(negative waiting-time mass at bin " + std::to_string(k) + ")");
      }
      value = Scalar(0);
    }
    p1.values[k] = value;
  }
  return p1;
}

// ---------------------------------------------------------------------------
// g2 reconstruction.

/// Truncated order-N correction from per-bin G:
/// g_N[k] = sum_{n=1..N} Pn[k] / mean_rate_per_bin, P1 = renewal_invert(G).
CorrelationCurve correction_from_g(const ProbabilitySeries& g_series, double mean_rate_per_bin,
                                   int order);

/// D1[k] = counts[k] / start_count.
ProbabilitySeries histogram_to_d1(const IntervalHistogram& histogram);

/// g_N[k] = 2 * sum_{n=1..N} Dn[k] / mean_rate_per_bin.
///
/// mean_rate_per_bin is the count-based estimate (combined detectors) used in
/// from_counts mode. In given mode the rate is config.given_rate * bin_width.
/// In tail_normalized mode the curve is rescaled so the mean over the last 10%
/// of converged bins is 1; the argument is then only a provisional scale and
/// may be any positive number.
CorrelationCurve correction_from_d1(const ProbabilitySeries& d1, const CorrectionConfig& config,
                                    double mean_rate_per_bin);

/// D1 = sum_{n=1..max_terms} Pn / 2^n. Throws NumericalError if the first
/// omitted term still has a bin >= 1e-12.
ProbabilitySeries d1_from_p1(const ProbabilitySeries& p1, int max_terms = 200);

struct MeanRateEstimate {
  double per_bin = 0.0;  // photons per bin, all streams combined
  bool degenerate = false;
};

/// Combined detection rate across streams expressed per bin_width.
MeanRateEstimate estimate_mean_rate(std::span<const PhotonStream> streams, double bin_width);

/// Estimate of tau_c from the delay at which (curve - baseline) first decays
/// to half its zero-delay excess: tau_c = 2 * t_half / ln 2. Returns 0 when the
/// curve shows no excess.
double estimate_coherence_time(const CorrelationCurve& curve, double baseline = 1.0);

}  // namespace hbt
