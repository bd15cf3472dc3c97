#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <json.hpp>

#include "hbt/analysis.hpp"
#include "hbt/correlator.hpp"
#include "hbt/photon_stream.hpp"

namespace hbt::io {

/// Shortest round-trip decimal representation, '.' as decimal point.
std::string format_number(double value);

// Series CSV: header `tau_ns,value`, row k holds k*bin_width.
void write_series_csv(std::ostream& out, double bin_width, const Eigen::VectorXd& values);

template <typename Series>
void write_series_csv(std::ostream& out, const Series& series) {
  write_series_csv(out, series.bin_width, series.values);
}

struct SeriesData {
  double bin_width = 0.0;
  Eigen::VectorXd values;
};

/// Reads a `tau_ns,value` CSV; the delay column must start at 0 and be uniform.
SeriesData read_series_csv(std::istream& in);

// Histogram CSV: header `bin_index,tau_ns,count`.
void write_histogram_csv(std::ostream& out, const IntervalHistogram& histogram);

/// Reads counts and bin width; start_count and window come from the sidecar.
IntervalHistogram read_histogram_csv(std::istream& in);

/// JSON companion of a histogram CSV.
struct HistogramSidecar {
  double bin_width = 0.0;
  double window = 0.0;
  std::uint64_t start_count = 0;
  std::uint64_t total_counts = 0;  // detections over both arms
  double duration = 0.0;           // ns
  std::optional<std::uint64_t> seed;
  nlohmann::json parameters = nlohmann::json::object();
};

nlohmann::json to_json(const HistogramSidecar& sidecar);
HistogramSidecar sidecar_from_json(const nlohmann::json& j);

// Photon streams: text (one decimal ps timestamp per line) or binary `.ttag`
// (little-endian uint64 ps, no header).
void write_timestamps_text(std::ostream& out, const PhotonStream& stream);
void write_timestamps_ttag(std::ostream& out, const PhotonStream& stream);
std::vector<Picoseconds> read_timestamps_text(std::istream& in);
std::vector<Picoseconds> read_timestamps_ttag(std::istream& in);

/// Loads by extension. When duration is absent it is set to last timestamp + 1.
PhotonStream read_photon_stream(const std::filesystem::path& path,
                                std::optional<Picoseconds> duration = std::nullopt);
void write_photon_stream(const std::filesystem::path& path, const PhotonStream& stream);

// Error surface CSV: first row `<axis>,<delays...>`, then `<axis value>,<delta...>`.
void write_surface_csv(std::ostream& out, const ErrorSurface& surface);

nlohmann::json to_json(const FitResult& fit);

/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace hbt::io
