#include <unsupported/Eigen/FFT>

#include <cmath>
#include <numbers>
#include <vector>

#include "hbt/analysis.hpp"

namespace hbt {

PowerSpectrum welch_spectrum(const IntensityTrace& trace, Index segment_length) {
  require(trace.dt > 0.0, "trace dt must be positive");
  require(segment_length >= 16 && segment_length % 2 == 0, "segment length must be even and >= 16");
  require(trace.size() >= segment_length, "trace shorter than one spectral segment");

  const Index half = segment_length / 2;
  // Periodic Hann taper.
  Eigen::VectorXd window(segment_length);
  for (Index i = 0; i < segment_length; ++i) {
    window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                      static_cast<double>(segment_length)));
  }
  const double window_energy = window.squaredNorm();
  const double fs = 1.0 / trace.dt;  // GHz

  Eigen::FFT<double> fft;
  std::vector<double> buffer(static_cast<std::size_t>(segment_length));
  std::vector<std::complex<double>> spectrum;
  Eigen::VectorXd power = Eigen::VectorXd::Zero(half + 1);
  Index segments = 0;
  for (Index start = 0; start + segment_length <= trace.size(); start += half) {
    const auto segment = trace.samples.segment(start, segment_length);
    const double mean = segment.mean();
    for (Index i = 0; i < segment_length; ++i) {
      buffer[static_cast<std::size_t>(i)] = (segment[i] - mean) * window[i];
    }
    fft.fwd(spectrum, buffer);
    for (Index k = 0; k <= half; ++k) power[k] += std::norm(spectrum[static_cast<std::size_t>(k)]);
    ++segments;
  }

  power /= static_cast<double>(segments) * fs * window_energy;
  power.segment(1, half - 1) *= 2.0;

  PowerSpectrum out;
  out.frequency = Eigen::VectorXd::LinSpaced(half + 1, 0.0, fs / 2.0);
  out.power = std::move(power);
  return out;
}

double bandwidth_from_spectrum(const PowerSpectrum& spectrum, double fraction) {
  require(spectrum.frequency.size() == spectrum.power.size() && spectrum.power.size() >= 2,
          "spectrum needs matching frequency and power vectors with at least 2 bins");
  require(fraction > 0.0 && fraction <= 1.0, "energy fraction must lie in (0, 1]");
  const auto ac = spectrum.power.tail(spectrum.power.size() - 1);
  const double total = ac.sum();
  if (!(total > 0.0)) throw InvalidArgument("spectrum has no AC energy (constant trace)");
  const double target = fraction * total;
  double cumulative = 0.0;
  for (Index k = 0; k < ac.size(); ++k) {
    cumulative += ac[k];
    if (cumulative >= target * (1.0 - 1e-12)) return spectrum.frequency[k + 1];
  }
  return spectrum.frequency[spectrum.frequency.size() - 1];
}

double effective_bandwidth(const IntensityTrace& trace, Index segment_length) {
  require(trace.size() >= (Index(1) << 12), "trace must hold at least 4096 samples");
  return bandwidth_from_spectrum(welch_spectrum(trace, segment_length), 0.8);
}

}  // namespace hbt
