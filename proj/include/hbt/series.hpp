#pragma once

#include <Eigen/Core>

#include <cmath>

#include "hbt/error.hpp"

namespace hbt {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

/// Discrete distribution on a uniform delay grid. values[k] is the probability
/// mass in the bin [k*bin_width, (k+1)*bin_width). Holds waiting-time
/// distributions (P_n, D_n) as well as per-bin pair histograms G.
template <typename Scalar>
struct BasicProbabilitySeries {
  Scalar bin_width{};
  Vector<Scalar> values;

  Index size() const { return values.size(); }
  Scalar delay(Index k) const { return static_cast<Scalar>(k) * bin_width; }
  Scalar operator[](Index k) const { return values[k]; }
};

/// g2(tau) sampled at tau = k*bin_width, k >= 0.
template <typename Scalar>
struct BasicCorrelationCurve {
  Scalar bin_width{};
  Vector<Scalar> values;

  Index size() const { return values.size(); }
  Scalar delay(Index k) const { return static_cast<Scalar>(k) * bin_width; }
  Scalar operator[](Index k) const { return values[k]; }
};

using ProbabilitySeries = BasicProbabilitySeries<double>;
using CorrelationCurve = BasicCorrelationCurve<double>;

template <typename Scalar>
BasicProbabilitySeries<Scalar> zero_series(Scalar bin_width, Index n) {
  return {bin_width, Vector<Scalar>::Zero(n)};
}

/// Number of grid points covering the closed delay range [0, window].
inline Index delay_grid_size(double window, double bin_width) {
  require(bin_width > 0.0, "bin_width must be positive");
  require(window >= 0.0, "window must be non-negative");
  return static_cast<Index>(std::llround(window / bin_width)) + 1;
}

template <typename Scalar>
bool same_bin_width(Scalar a, Scalar b) {
  using std::abs;
  return abs(a - b) <= Scalar(1e-12) * (abs(a) + abs(b));
}

}  // namespace hbt
