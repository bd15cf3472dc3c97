#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hbt/correlator.hpp"
#include "hbt/photon_stream.hpp"
#include "hbt/theory.hpp"

namespace hbt {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser applied to master + stream * golden-ratio increment.
/// Used to fan a single master seed out to independent component streams.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Fixed sub-stream identifiers used by run_hbt.
enum class SeedStream : std::uint64_t {
  intensity = 1,
  photons = 2,
  beam_splitter = 3,
  detector_start = 4,
  detector_stop = 5,
};

inline std::uint64_t derive_seed(std::uint64_t master, SeedStream stream) {
  return derive_seed(master, static_cast<std::uint64_t>(stream));
}

struct DetectorConfig {
  double efficiency = 0.25;
  double dead_time = 4000.0;     // ns
  double dark_rate = 0.0;        // counts per second
  double resolution = 65.0;      // ps
  double afterpulse_prob = 0.0;
  double afterpulse_tau = 50.0;  // ns
  double window = 100.0;         // ns

  /// Unit efficiency, no dead time, no noise, 1 ps timing.
  static DetectorConfig ideal() { return {1.0, 0.0, 0.0, 1.0, 0.0, 50.0, 100.0}; }

  /// Default detector with a 1 kcounts/s dark rate for noise studies.
  static DetectorConfig noisy() {
    DetectorConfig c;
    c.dark_rate = 1000.0;
    return c;
  }
};

void validate(const DetectorConfig& config);

/// Sampled intensity in photons per ns at spacing dt (ns).
struct IntensityTrace {
  double dt = 0.0;
  Eigen::VectorXd samples;

  Index size() const { return samples.size(); }
  double duration() const { return dt * static_cast<double>(samples.size()); }
};

/// Complex mean-reverting Gaussian field with <|E|^2> = 1 and
/// <E*(t) E(t + tau)> = exp(-|tau| / tau_c), advanced by its exact one-step
/// update E' = a E + sqrt(1 - a^2) xi, a = exp(-dt / tau_c). The initial state
/// is drawn from the stationary distribution.
class ChaoticField {
 public:
  ChaoticField(double coherence_time, double dt, std::uint64_t seed);

  Eigen::VectorXcd next(Index n);

 private:
  double decay_;
  double kick_;
  Rng rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::complex<double> state_;
};

/// Streams intensity samples I(t) = mean_rate * [(1 - m) + m |E(t)|^2] in
/// consecutive chunks. Chunking does not change the samples.
class IntensityGenerator {
 public:
  IntensityGenerator(const SourceModel& model, double dt, std::uint64_t seed);

  IntensityTrace next(Index n);
  double dt() const { return dt_; }

 private:
  SourceModel model_;
  double dt_;
  ChaoticField field_;
};

/// Samples are produced on a fixed grid, so dt must resolve the coherence
/// time: dt <= tau_c / 20 whenever the source has a chaotic part.
IntensityTrace simulate_intensity(const SourceModel& model, double dt, double duration,
                                  std::uint64_t seed);

/// Inhomogeneous Poisson sampling of consecutive trace chunks by thinning a
/// homogeneous process at each chunk's peak rate.
class PhotonSampler {
 public:
  explicit PhotonSampler(std::uint64_t seed) : rng_(seed) {}

  /// Appends arrival times (ps) for a trace covering [t0, t0 + trace.duration()) ns.
  void append(const IntensityTrace& trace, double t0, std::vector<Picoseconds>& out);

 private:
  Rng rng_;
};

PhotonStream sample_photons(const IntensityTrace& trace, std::uint64_t seed);

/// Routes each photon to one of two arms with probability 1/2.
std::pair<PhotonStream, PhotonStream> beam_split(const PhotonStream& stream, std::uint64_t seed);

struct Diagnostic {
  enum class Severity { info, warning };
  Severity severity = Severity::warning;
  std::string code;
  std::string message;
  double value = 0.0;
};

struct DetectorOutput {
  PhotonStream stream;
  std::vector<Diagnostic> diagnostics;
};

/// Detector chain: efficiency thinning, dark counts, afterpulses, timestamp
/// quantisation (floor to the resolution) and non-paralyzable dead time.
/// Dead time is evaluated on quantised timestamps so every registered gap is
/// at least dead_time. Emits a "dead_time_saturation" warning when the rate
/// offered to the dead-time stage times dead_time is >= 0.1.
DetectorOutput apply_detector(const PhotonStream& stream, const DetectorConfig& config,
                              std::uint64_t seed);

/// Start-stop histogram: for each start, the first stop strictly later is
/// binned if the interval is shorter than window. Every start contributes to
/// start_count. bin_width and window must be whole picoseconds.
IntervalHistogram start_stop_histogram(const PhotonStream& starts, const PhotonStream& stops,
                                       double bin_width, double window);

struct HbtRun {
  IntervalHistogram histogram;
  PhotonStream start_arm;  // registered detections, start detector
  PhotonStream stop_arm;   // registered detections, stop detector
  std::vector<Diagnostic> diagnostics;

  /// Detections across both arms.
  std::uint64_t total_counts() const { return start_arm.size() + stop_arm.size(); }
};

struct HbtOptions {
  double dt = 0.0;                 // ns; 0 selects tau_c / 20 (or 1 ns for coherent light)
  Index chunk_samples = Index(1) << 20;
};

/// Full HBT chain: intensity -> photons -> 50:50 beam splitter -> two detectors
/// -> start-stop histogram. Deterministic for a given seed.
HbtRun run_hbt(const SourceModel& model, const DetectorConfig& detector, double duration,
               double bin_width, std::uint64_t seed, const HbtOptions& options = {});

}  // namespace hbt
