#include "hbt/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hbt {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + stream * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void validate(const DetectorConfig& config) {
  require(config.efficiency >= 0.0 && config.efficiency <= 1.0, "efficiency must lie in [0, 1]");
  require(config.dead_time >= 0.0, "dead_time must be >= 0");
  require(config.dark_rate >= 0.0, "dark_rate must be >= 0");
  require(config.resolution > 0.0, "resolution must be > 0");
  require(config.afterpulse_prob >= 0.0 && config.afterpulse_prob <= 1.0,
          "afterpulse_prob must lie in [0, 1]");
  if (config.afterpulse_prob > 0.0) {
    require(config.afterpulse_tau > 0.0, "afterpulse_tau must be > 0 when afterpulsing is on");
  }
  require(config.window > 0.0, "window must be > 0");
}

// ---------------------------------------------------------------------------

ChaoticField::ChaoticField(double coherence_time, double dt, std::uint64_t seed)
    : decay_(std::exp(-dt / coherence_time)),
      kick_(std::sqrt(1.0 - decay_ * decay_)),
      rng_(seed) {
  // Each quadrature carries variance 1/2 so that <|E|^2> = 1.
  const double s = std::sqrt(0.5);
  const double re = normal_(rng_);
  const double im = normal_(rng_);
  state_ = {s * re, s * im};
}

Eigen::VectorXcd ChaoticField::next(Index n) {
  Eigen::VectorXcd out(n);
  const double s = std::sqrt(0.5) * kick_;
  for (Index i = 0; i < n; ++i) {
    out[i] = state_;
    const double re = normal_(rng_);
    const double im = normal_(rng_);
    state_ = decay_ * state_ + std::complex<double>(s * re, s * im);
  }
  return out;
}

namespace {

double default_coherence_time(const SourceModel& model) {
  return model.chaotic_fraction > 0.0 ? model.coherence_time : 1.0;
}

void check_resolves_coherence(const SourceModel& model, double dt) {
  require(dt > 0.0, "dt must be positive");
  if (model.chaotic_fraction > 0.0) {
    require(dt <= model.coherence_time / 20.0 * (1.0 + 1e-12),
            "dt must be <= tau_c / 20 to resolve the coherence time");
  }
}

}  // namespace

IntensityGenerator::IntensityGenerator(const SourceModel& model, double dt, std::uint64_t seed)
    : model_(model), dt_(dt), field_(default_coherence_time(model), dt, seed) {
  validate(model);
  check_resolves_coherence(model, dt);
}

IntensityTrace IntensityGenerator::next(Index n) {
  require(n >= 0, "sample count must be non-negative");
  const double m = model_.chaotic_fraction;
  if (m == 0.0) return {dt_, Eigen::VectorXd::Constant(n, model_.mean_rate)};
  const Eigen::VectorXcd field = field_.next(n);
  Eigen::VectorXd samples = model_.mean_rate * ((1.0 - m) + m * field.cwiseAbs2().array()).matrix();
  return {dt_, std::move(samples)};
}

IntensityTrace simulate_intensity(const SourceModel& model, double dt, double duration,
                                  std::uint64_t seed) {
  validate(model);
  check_resolves_coherence(model, dt);
  require(duration >= dt, "duration must be >= dt");
  const auto n = static_cast<Index>(std::floor(duration / dt * (1.0 + 1e-12)));
  IntensityGenerator generator(model, dt, seed);
  return generator.next(n);
}

// ---------------------------------------------------------------------------

void PhotonSampler::append(const IntensityTrace& trace, double t0, std::vector<Picoseconds>& out) {
  require(trace.dt > 0.0, "trace dt must be positive");
  if (trace.size() == 0) return;
  const double peak = trace.samples.maxCoeff();
  require(trace.samples.minCoeff() >= 0.0, "intensity samples must be non-negative");
  if (peak <= 0.0) return;

  std::exponential_distribution<double> gap(peak);
  std::uniform_real_distribution<double> accept(0.0, 1.0);
  const double span = trace.duration();
  const double end_ps = std::floor((t0 + span) * 1e3);
  double t = 0.0;
  for (;;) {
    t += gap(rng_);
    if (t >= span) break;
    const auto idx = std::min<Index>(static_cast<Index>(t / trace.dt), trace.size() - 1);
    if (accept(rng_) * peak < trace.samples[idx]) {
      const double ps = std::min(std::floor((t0 + t) * 1e3), end_ps - 1.0);
      out.push_back(static_cast<Picoseconds>(std::max(ps, 0.0)));
    }
  }
}

PhotonStream sample_photons(const IntensityTrace& trace, std::uint64_t seed) {
  PhotonStream stream;
  stream.duration = static_cast<Picoseconds>(std::floor(trace.duration() * 1e3));
  PhotonSampler sampler(seed);
  sampler.append(trace, 0.0, stream.timestamps);
  return stream;
}

std::pair<PhotonStream, PhotonStream> beam_split(const PhotonStream& stream, std::uint64_t seed) {
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  PhotonStream first{{}, stream.duration};
  PhotonStream second{{}, stream.duration};
  for (auto t : stream.timestamps) (coin(rng) ? first : second).timestamps.push_back(t);
  return {std::move(first), std::move(second)};
}

// ---------------------------------------------------------------------------

DetectorOutput apply_detector(const PhotonStream& stream, const DetectorConfig& config,
                              std::uint64_t seed) {
  validate(config);
  Rng rng(seed);
  const auto duration = static_cast<double>(stream.duration);

  std::vector<Picoseconds> events;
  events.reserve(static_cast<std::size_t>(static_cast<double>(stream.size()) * config.efficiency) + 16);
  std::bernoulli_distribution detected(config.efficiency);
  for (auto t : stream.timestamps) {
    if (detected(rng)) events.push_back(t);
  }

  if (config.dark_rate > 0.0 && stream.duration > 0) {
    std::exponential_distribution<double> gap(config.dark_rate * 1e-12);  // per ps
    const auto photon_end = events.size();
    for (double t = gap(rng); t < duration; t += gap(rng)) {
      events.push_back(static_cast<Picoseconds>(t));
    }
    std::inplace_merge(events.begin(), events.begin() + static_cast<std::ptrdiff_t>(photon_end),
                       events.end());
  }

  if (config.afterpulse_prob > 0.0) {
    std::bernoulli_distribution fires(config.afterpulse_prob);
    std::exponential_distribution<double> delay(1.0 / (config.afterpulse_tau * 1e3));
    std::vector<Picoseconds> after;
    for (auto t : events) {
      if (!fires(rng)) continue;
      const double at = static_cast<double>(t) + delay(rng);
      if (at < duration) after.push_back(static_cast<Picoseconds>(at));
    }
    std::sort(after.begin(), after.end());
    const auto mid = events.size();
    events.insert(events.end(), after.begin(), after.end());
    std::inplace_merge(events.begin(), events.begin() + static_cast<std::ptrdiff_t>(mid), events.end());
  }

  DetectorOutput out;
  out.stream.duration = stream.duration;

  if (stream.duration > 0) {
    const double offered_rate = static_cast<double>(events.size()) / (duration * 1e-3);  // per ns
    const double load = offered_rate * config.dead_time;
    if (load >= 0.1) {
      std::ostringstream msg;
      msg << "rate x dead_time = " << load << " is not << 1; dead time distorts the statistics";
      out.diagnostics.push_back({Diagnostic::Severity::warning, "dead_time_saturation", msg.str(), load});
    }
  }

  const double resolution = config.resolution;
  const double dead_ps = config.dead_time * 1e3;
  bool have_last = false;
  Picoseconds last = 0;
  for (auto t : events) {
    const auto q = static_cast<Picoseconds>(
        std::floor(std::floor(static_cast<double>(t) / resolution) * resolution));
    if (have_last && static_cast<double>(q - last) < dead_ps) continue;
    out.stream.timestamps.push_back(q);
    last = q;
    have_last = true;
  }
  return out;
}

IntervalHistogram start_stop_histogram(const PhotonStream& starts, const PhotonStream& stops,
                                       double bin_width, double window) {
  require(starts.duration == stops.duration, "start and stop streams must share a duration");
  const Picoseconds bin_ps = to_picoseconds(bin_width);
  const Picoseconds window_ps = to_picoseconds(window);
  require(bin_ps > 0, "bin_width must be at least 1 ps");
  require(window_ps > 0, "window must be positive");

  IntervalHistogram h;
  h.bin_width = bin_width;
  h.window = window;
  h.counts.assign(static_cast<std::size_t>((window_ps + bin_ps - 1) / bin_ps), 0);
  h.start_count = starts.size();

  auto stop = stops.timestamps.begin();
  const auto stop_end = stops.timestamps.end();
  for (auto start : starts.timestamps) {
    while (stop != stop_end && *stop <= start) ++stop;
    if (stop == stop_end) break;
    const Picoseconds interval = *stop - start;
    if (interval < window_ps) ++h.counts[static_cast<std::size_t>(interval / bin_ps)];
  }
  return h;
}

HbtRun run_hbt(const SourceModel& model, const DetectorConfig& detector, double duration,
               double bin_width, std::uint64_t seed, const HbtOptions& options) {
  validate(model);
  validate(detector);
  require(duration > 0.0, "duration must be positive");
  require(bin_width * 1e3 >= detector.resolution * (1.0 - 1e-12),
          "bin_width must be >= the detector resolution");
  require(options.chunk_samples > 0, "chunk_samples must be positive");

  const double dt = options.dt > 0.0 ? options.dt
                    : model.chaotic_fraction > 0.0 ? model.coherence_time / 20.0
                                                   : 1.0;
  const Picoseconds duration_ps = to_picoseconds(duration);
  const auto total_samples = static_cast<Index>(std::floor(duration / dt * (1.0 + 1e-12)));
  require(total_samples >= 1, "duration must cover at least one intensity sample");

  IntensityGenerator generator(model, dt, derive_seed(seed, SeedStream::intensity));
  PhotonSampler sampler(derive_seed(seed, SeedStream::photons));
  PhotonStream photons;
  photons.duration = duration_ps;
  photons.timestamps.reserve(static_cast<std::size_t>(model.mean_rate * duration * 1.1) + 16);
  for (Index done = 0; done < total_samples;) {
    const Index n = std::min(options.chunk_samples, total_samples - done);
    sampler.append(generator.next(n), static_cast<double>(done) * dt, photons.timestamps);
    done += n;
  }

  auto [arm_a, arm_b] = beam_split(photons, derive_seed(seed, SeedStream::beam_splitter));
  DetectorOutput start = apply_detector(arm_a, detector, derive_seed(seed, SeedStream::detector_start));
  DetectorOutput stop = apply_detector(arm_b, detector, derive_seed(seed, SeedStream::detector_stop));

  HbtRun run;
  run.histogram = start_stop_histogram(start.stream, stop.stream, bin_width, detector.window);
  for (auto& d : start.diagnostics) {
    d.message = "start detector: " + d.message;
    run.diagnostics.push_back(std::move(d));
  }
  for (auto& d : stop.diagnostics) {
    d.message = "stop detector: " + d.message;
    run.diagnostics.push_back(std::move(d));
  }
  run.start_arm = std::move(start.stream);
  run.stop_arm = std::move(stop.stream);
  return run;
}

}  // namespace hbt
