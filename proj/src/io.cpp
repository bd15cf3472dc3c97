#include "hbt/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <system_error>

namespace hbt::io {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) fields.push_back(field);
  return fields;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& text) {
  const std::string t = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw InvalidArgument("malformed number '" + t + "'");
  }
  return value;
}

std::uint64_t parse_u64(const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw InvalidArgument("malformed integer '" + t + "'");
  }
  return value;
}

double uniform_step(const std::vector<double>& tau) {
  require(!tau.empty(), "CSV has no data rows");
  require(std::abs(tau.front()) <= 1e-12, "delay column must start at 0");
  if (tau.size() == 1) return 0.0;
  const double step = tau[1] - tau[0];
  require(step > 0.0, "delay column must increase");
  for (std::size_t k = 1; k < tau.size(); ++k) {
    const double expected = static_cast<double>(k) * step;
    require(std::abs(tau[k] - expected) <= 1e-6 * std::max(step, std::abs(expected)),
            "delay column is not a uniform grid");
  }
  return step;
}

}  // namespace

std::string format_number(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw NumericalError("number formatting failed");
  return std::string(buf.data(), ptr);
}

void write_series_csv(std::ostream& out, double bin_width, const Eigen::VectorXd& values) {
  out << "tau_ns,value\n";
  for (Index k = 0; k < values.size(); ++k) {
    out << format_number(static_cast<double>(k) * bin_width) << ',' << format_number(values[k]) << '\n';
  }
}

SeriesData read_series_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "empty CSV");
  require(trim(line) == "tau_ns,value", "expected CSV header 'tau_ns,value'");
  std::vector<double> tau;
  std::vector<double> value;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    require(fields.size() == 2, "expected two CSV columns");
    tau.push_back(parse_double(fields[0]));
    value.push_back(parse_double(fields[1]));
  }
  SeriesData data;
  data.bin_width = uniform_step(tau);
  data.values = Eigen::Map<const Eigen::VectorXd>(value.data(), static_cast<Index>(value.size()));
  return data;
}

void write_histogram_csv(std::ostream& out, const IntervalHistogram& histogram) {
  out << "bin_index,tau_ns,count\n";
  for (std::size_t k = 0; k < histogram.counts.size(); ++k) {
    out << k << ',' << format_number(static_cast<double>(k) * histogram.bin_width) << ','
        << histogram.counts[k] << '\n';
  }
}

IntervalHistogram read_histogram_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "empty histogram CSV");
  require(trim(line) == "bin_index,tau_ns,count", "expected CSV header 'bin_index,tau_ns,count'");
  std::vector<double> tau;
  IntervalHistogram h;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    require(fields.size() == 3, "expected three CSV columns");
    require(parse_u64(fields[0]) == h.counts.size(), "bin_index column must count up from 0");
    tau.push_back(parse_double(fields[1]));
    h.counts.push_back(parse_u64(fields[2]));
  }
  h.bin_width = uniform_step(tau);
  return h;
}

nlohmann::json to_json(const HistogramSidecar& s) {
  nlohmann::json j;
  j["bin_width_ns"] = s.bin_width;
  j["window_ns"] = s.window;
  j["start_count"] = s.start_count;
  j["total_counts"] = s.total_counts;
  j["duration_ns"] = s.duration;
  j["seed"] = s.seed ? nlohmann::json(*s.seed) : nlohmann::json(nullptr);
  j["parameters"] = s.parameters;
  return j;
}

HistogramSidecar sidecar_from_json(const nlohmann::json& j) {
  try {
    HistogramSidecar s;
    s.bin_width = j.at("bin_width_ns").get<double>();
    s.window = j.at("window_ns").get<double>();
    s.start_count = j.at("start_count").get<std::uint64_t>();
    s.total_counts = j.value("total_counts", std::uint64_t{0});
    s.duration = j.value("duration_ns", 0.0);
    if (j.contains("seed") && !j["seed"].is_null()) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("parameters")) s.parameters = j["parameters"];
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed histogram sidecar: ") + e.what());
  }
}

void write_timestamps_text(std::ostream& out, const PhotonStream& stream) {
  for (auto t : stream.timestamps) out << t << '\n';
}

void write_timestamps_ttag(std::ostream& out, const PhotonStream& stream) {
  std::array<char, 8> bytes{};
  for (auto t : stream.timestamps) {
    for (int i = 0; i < 8; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((t >> (8 * i)) & 0xFF);
    out.write(bytes.data(), 8);
  }
}

std::vector<Picoseconds> read_timestamps_text(std::istream& in) {
  std::vector<Picoseconds> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    out.push_back(parse_u64(line));
  }
  return out;
}

std::vector<Picoseconds> read_timestamps_ttag(std::istream& in) {
  std::vector<Picoseconds> out;
  std::array<unsigned char, 8> bytes{};
  while (in.read(reinterpret_cast<char*>(bytes.data()), 8)) {
    Picoseconds t = 0;
    for (int i = 7; i >= 0; --i) t = (t << 8) | bytes[static_cast<std::size_t>(i)];
    out.push_back(t);
  }
  require(in.gcount() == 0, "ttag file length is not a multiple of 8 bytes");
  return out;
}

PhotonStream read_photon_stream(const std::filesystem::path& path, std::optional<Picoseconds> duration) {
  const bool binary = path.extension() == ".ttag";
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  require(static_cast<bool>(in), "cannot open photon stream '" + path.string() + "'");
  PhotonStream stream;
  stream.timestamps = binary ? read_timestamps_ttag(in) : read_timestamps_text(in);
  stream.duration = duration ? *duration : (stream.empty() ? 0 : stream.timestamps.back() + 1);
  validate(stream);
  return stream;
}

void write_photon_stream(const std::filesystem::path& path, const PhotonStream& stream) {
  std::ostringstream out(std::ios::binary);
  if (path.extension() == ".ttag") {
    write_timestamps_ttag(out, stream);
  } else {
    write_timestamps_text(out, stream);
  }
  write_file_atomic(path, out.str());
}

void write_surface_csv(std::ostream& out, const ErrorSurface& surface) {
  out << to_string(surface.axis);
  for (Index k = 0; k < surface.delays.size(); ++k) out << ',' << format_number(surface.delays[k]);
  out << '\n';
  for (Index i = 0; i < surface.axis_values.size(); ++i) {
    out << format_number(surface.axis_values[i]);
    for (Index k = 0; k < surface.delta.cols(); ++k) out << ',' << format_number(surface.delta(i, k));
    out << '\n';
  }
}

nlohmann::json to_json(const FitResult& fit) {
  return {{"b", fit.b},
          {"tau_c_ns", fit.tau_c},
          {"residual_rms", fit.residual_rms},
          {"converged", fit.converged},
          {"iterations", fit.iterations}};
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error("cannot move output into '" + path.string() + "'");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace hbt::io
