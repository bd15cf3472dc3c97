#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hbt/analysis.hpp"
#include "hbt/correlator.hpp"
#include "hbt/io.hpp"
#include "hbt/simulator.hpp"
#include "hbt/theory.hpp"

namespace hbt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kOutputDirEnv = "HBT_OUTPUT_DIR";

const std::vector<std::string> kCommands = {"theory", "simulate", "correct",
                                            "fit",    "error-surface", "pipeline"};

enum class Kind { text, number, integer, time_ns };

struct Param {
  std::string key;
  std::string flag;
  Kind kind;
  json fallback;
  std::string help;
};

// Every parameter accepted on the command line or in a config file. The key is
// the JSON name; null fallbacks are resolved per command.
const std::vector<Param>& parameters() {
  static const std::vector<Param> table = {
      {"model", "--model", Kind::text, "chaotic", "Source kind: chaotic, coherent or mixed"},
      {"rate", "--rate", Kind::number, 0.04, "Mean photon rate (photons/ns)"},
      {"tau_c", "--tau-c", Kind::time_ns, 0.5, "Coherence time (ns)"},
      {"chaotic_fraction", "--chaotic-fraction", Kind::number, nullptr, "Mixed source m in (0, 1)"},
      {"bunching", "--bunching", Kind::number, nullptr, "Mixed source bunching amplitude b = m^2"},
      {"bin", "--bin", Kind::time_ns, 0.1, "Delay bin width (ns)"},
      {"window", "--window", Kind::time_ns, 100.0, "Delay window (ns)"},
      {"duration", "--duration", Kind::time_ns, nullptr, "Acquisition time (ns, or with unit suffix)"},
      {"dt", "--dt", Kind::time_ns, nullptr, "Intensity sampling step (default tau_c/20)"},
      {"order", "--order", Kind::integer, 9, "Self-convolution correction order N"},
      {"rate_mode", "--rate-mode", Kind::text, "from_counts",
       "Mean-rate normalisation: given, from_counts or tail_normalized"},
      {"given_rate", "--given-rate", Kind::number, nullptr, "Mean rate for --rate-mode given (photons/ns)"},
      {"detector", "--detector", Kind::text, "ideal", "Detector preset: ideal, spad or noisy"},
      {"efficiency", "--efficiency", Kind::number, nullptr, "Detection efficiency override"},
      {"dead_time", "--dead-time", Kind::time_ns, nullptr, "Dead time override (ns)"},
      {"dark_rate", "--dark-rate", Kind::number, nullptr, "Dark count rate override (counts/s)"},
      {"resolution", "--resolution", Kind::number, nullptr, "Timing resolution override (ps)"},
      {"afterpulse_prob", "--afterpulse-prob", Kind::number, nullptr, "Afterpulse probability override"},
      {"afterpulse_tau", "--afterpulse-tau", Kind::time_ns, nullptr, "Afterpulse delay constant (ns)"},
      {"seed", "--seed", Kind::integer, nullptr, "Master seed (required for stochastic commands)"},
      {"write_streams", "--write-streams", Kind::text, "none", "Write detector streams: none, text or ttag"},
      {"input", "--input", Kind::text, nullptr, "Input CSV (histogram for correct, curve for fit)"},
      {"sidecar", "--sidecar", Kind::text, nullptr, "Histogram JSON sidecar (default <input>.json)"},
      {"starts", "--starts", Kind::text, nullptr, "Start-detector photon stream (.ttag or text)"},
      {"stops", "--stops", Kind::text, nullptr, "Stop-detector photon stream (.ttag or text)"},
      {"fit_max", "--fit-max", Kind::time_ns, 10.0, "Largest delay included in the fit (ns)"},
      {"weighting", "--weighting", Kind::text, "unweighted", "Fit weighting: unweighted or poisson"},
      {"sampling", "--sampling", Kind::text, "bin_average",
       "Fit model sampling: bin_average (histogram bins) or point"},
      {"axis", "--axis", Kind::text, "intensity", "Error-surface axis: intensity or coherence_time"},
      {"from", "--from", Kind::number, nullptr, "First sweep value"},
      {"to", "--to", Kind::number, nullptr, "Last sweep value"},
      {"steps", "--steps", Kind::integer, 5, "Number of sweep values"},
  };
  return table;
}

const Param* find_param(const std::string& key) {
  for (const auto& p : parameters()) {
    if (p.key == key) return &p;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return {};
  return s.substr(a, s.find_last_not_of(" \t") - a + 1);
}

double parse_number(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(trim(text), &used);
    if (used != trim(text).size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("invalid number for " + what + ": '" + text + "'");
  }
}

// Converts a flag string or config-file value to the canonical JSON form.
json normalise(const Param& p, const json& value) {
  if (value.is_null()) return value;
  switch (p.kind) {
    case Kind::text:
      require(value.is_string(), p.key + " must be a string");
      return value;
    case Kind::number:
      if (value.is_number()) return value.get<double>();
      require(value.is_string(), p.key + " must be a number");
      return parse_number(value.get<std::string>(), p.key);
    case Kind::integer: {
      if (value.is_number_unsigned()) return value;
      if (value.is_number_integer()) {
        require(value.get<std::int64_t>() >= 0, p.key + " must be non-negative");
        return value.get<std::uint64_t>();
      }
      require(value.is_string(), p.key + " must be an integer");
      const std::string s = trim(value.get<std::string>());
      std::uint64_t v = 0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      require(ec == std::errc() && ptr == s.data() + s.size(),
              "invalid integer for " + p.key + ": '" + s + "'");
      return v;
    }
    case Kind::time_ns:
      if (value.is_number()) return value.get<double>();
      require(value.is_string(), p.key + " must be a time");
      return parse_time_ns(value.get<std::string>());
  }
  return value;
}

struct Invocation {
  std::string command;
  json params;          // canonical parameter set, one entry per table key
  fs::path output_dir;
};

void write_text(const fs::path& path, const std::string& contents) { io::write_file_atomic(path, contents); }

template <typename Series>
std::string series_csv(const Series& s) {
  std::ostringstream out;
  io::write_series_csv(out, s);
  return out.str();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Typed views of the resolved parameter set.

double number(const json& p, const std::string& key) {
  require(!p.at(key).is_null(), "missing parameter '" + key + "'");
  return p.at(key).get<double>();
}

std::uint64_t integer(const json& p, const std::string& key) {
  require(!p.at(key).is_null(), "missing parameter '" + key + "'");
  return p.at(key).get<std::uint64_t>();
}

std::string text(const json& p, const std::string& key) {
  require(!p.at(key).is_null(), "missing parameter '" + key + "'");
  return p.at(key).get<std::string>();
}

int order_of(const json& p) {
  const auto order = integer(p, "order");
  require(order >= 1 && order <= 1000, "order must lie in [1, 1000]");
  return static_cast<int>(order);
}

SourceModel model_of(json& p) {
  const SourceKind kind = source_kind_from_string(text(p, "model"));
  const double rate = number(p, "rate");
  SourceModel model;
  switch (kind) {
    case SourceKind::chaotic:
      model = SourceModel::chaotic(rate, number(p, "tau_c"));
      break;
    case SourceKind::coherent:
      model = SourceModel::coherent(rate);
      break;
    case SourceKind::mixed: {
      const bool has_m = !p["chaotic_fraction"].is_null();
      const bool has_b = !p["bunching"].is_null();
      require(has_m != has_b, "mixed model needs exactly one of --chaotic-fraction or --bunching");
      model = has_m ? SourceModel::mixed(rate, number(p, "tau_c"), number(p, "chaotic_fraction"))
                    : SourceModel::with_bunching(rate, number(p, "tau_c"), number(p, "bunching"));
      break;
    }
  }
  validate(model);
  return model;
}

DetectorConfig detector_of(json& p) {
  const std::string preset = text(p, "detector");
  DetectorConfig d;
  if (preset == "ideal") {
    d = DetectorConfig::ideal();
  } else if (preset == "spad") {
    d = DetectorConfig{};
  } else if (preset == "noisy") {
    d = DetectorConfig::noisy();
  } else {
    throw InvalidArgument("unknown detector preset '" + preset + "'");
  }
  auto override_with = [&](const char* key, double& field) {
    if (p[key].is_null()) {
      p[key] = field;
    } else {
      field = p[key].get<double>();
    }
  };
  override_with("efficiency", d.efficiency);
  override_with("dead_time", d.dead_time);
  override_with("dark_rate", d.dark_rate);
  override_with("resolution", d.resolution);
  override_with("afterpulse_prob", d.afterpulse_prob);
  override_with("afterpulse_tau", d.afterpulse_tau);
  d.window = number(p, "window");
  validate(d);
  return d;
}

CorrectionConfig correction_of(const json& p) {
  CorrectionConfig c;
  c.order = order_of(p);
  const std::string mode = text(p, "rate_mode");
  if (mode == "given") {
    c.mean_rate_mode = MeanRateMode::given;
    c.given_rate = number(p, "given_rate");
  } else if (mode == "from_counts") {
    c.mean_rate_mode = MeanRateMode::from_counts;
  } else if (mode == "tail_normalized") {
    c.mean_rate_mode = MeanRateMode::tail_normalized;
  } else {
    throw InvalidArgument("unknown rate mode '" + mode + "'");
  }
  validate(c);
  return c;
}

FitOptions fit_options_of(const json& p) {
  FitOptions o;
  o.max_delay = number(p, "fit_max");
  const std::string w = text(p, "weighting");
  if (w == "unweighted") {
    o.weighting = FitWeighting::unweighted;
  } else if (w == "poisson") {
    o.weighting = FitWeighting::poisson;
  } else {
    throw InvalidArgument("unknown weighting '" + w + "'");
  }
  const std::string sampling = text(p, "sampling");
  if (sampling == "bin_average") {
    o.sampling = FitSampling::bin_average;
  } else if (sampling == "point") {
    o.sampling = FitSampling::point;
  } else {
    throw InvalidArgument("unknown sampling '" + sampling + "'");
  }
  return o;
}

void report(const std::vector<Diagnostic>& diagnostics, std::ostream& err) {
  for (const auto& d : diagnostics) {
    err << (d.severity == Diagnostic::Severity::warning ? "warning" : "info") << " [" << d.code
        << "]: " << d.message << '\n';
  }
}

json histogram_parameters(const json& p) {
  json subset = json::object();
  for (const char* key : {"model", "rate", "tau_c", "chaotic_fraction", "bunching", "bin", "window",
                          "duration", "dt", "detector", "efficiency", "dead_time", "dark_rate",
                          "resolution", "afterpulse_prob", "afterpulse_tau", "seed"}) {
    subset[key] = p.at(key);
  }
  return subset;
}

// ---------------------------------------------------------------------------
// Commands.

void cmd_theory(Invocation& inv, std::ostream& out) {
  json& p = inv.params;
  const SourceModel model = model_of(p);
  const double bin = number(p, "bin");
  const Index n = delay_grid_size(number(p, "window"), bin);
  const int order = order_of(p);

  const CorrelationCurve g2 = g2_curve(model, bin, n);
  const ProbabilitySeries g = g_theoretical(model, bin, n);
  const CorrelationCurve corrected = correction_from_g(g, model.mean_rate * bin, order);
  const Eigen::VectorXd delta = relative_error(corrected, g2);

  write_text(inv.output_dir / "g2.csv", series_csv(g2));
  write_text(inv.output_dir / "G.csv", series_csv(g));
  write_text(inv.output_dir / "g2_corrected.csv", series_csv(corrected));
  std::ostringstream err_csv;
  io::write_series_csv(err_csv, bin, delta);
  write_text(inv.output_dir / "relative_error.csv", err_csv.str());
  out << "theory: " << n << " delays, g2(0) = " << g2.values[0]
      << ", max relative error at order " << order << " = " << delta.maxCoeff() << " %\n";
}

struct SimulationOutput {
  HbtRun run;
  double duration = 0.0;
};

SimulationOutput simulate(Invocation& inv, std::ostream& out, std::ostream& err) {
  json& p = inv.params;
  require(!p["seed"].is_null(), "a --seed is required for stochastic commands");
  if (p["duration"].is_null()) p["duration"] = 1e7;
  const SourceModel model = model_of(p);
  const DetectorConfig detector = detector_of(p);
  HbtOptions options;
  if (!p["dt"].is_null()) options.dt = number(p, "dt");

  SimulationOutput sim;
  sim.duration = number(p, "duration");
  sim.run = run_hbt(model, detector, sim.duration, number(p, "bin"), integer(p, "seed"), options);
  report(sim.run.diagnostics, err);

  io::HistogramSidecar sidecar;
  sidecar.bin_width = sim.run.histogram.bin_width;
  sidecar.window = sim.run.histogram.window;
  sidecar.start_count = sim.run.histogram.start_count;
  sidecar.total_counts = sim.run.total_counts();
  sidecar.duration = sim.duration;
  sidecar.seed = integer(p, "seed");
  sidecar.parameters = histogram_parameters(p);

  std::ostringstream csv;
  io::write_histogram_csv(csv, sim.run.histogram);
  write_text(inv.output_dir / "histogram.csv", csv.str());
  write_text(inv.output_dir / "histogram.json", dump(io::to_json(sidecar)));

  const std::string streams = text(p, "write_streams");
  if (streams == "text" || streams == "ttag") {
    const std::string ext = streams == "ttag" ? ".ttag" : ".txt";
    io::write_photon_stream(inv.output_dir / ("start" + ext), sim.run.start_arm);
    io::write_photon_stream(inv.output_dir / ("stop" + ext), sim.run.stop_arm);
  } else {
    require(streams == "none", "--write-streams must be none, text or ttag");
  }
  out << "simulate: " << sim.run.histogram.start_count << " starts, " << sim.run.histogram.total()
      << " recorded intervals, " << sim.run.total_counts() << " detections\n";
  return sim;
}

CorrelationCurve correct(Invocation& inv, const IntervalHistogram& histogram, double mean_rate_per_bin,
                         std::ostream& out) {
  const CorrectionConfig config = correction_of(inv.params);
  const ProbabilitySeries d1 = histogram_to_d1(histogram);
  const CorrelationCurve curve = correction_from_d1(d1, config, mean_rate_per_bin);
  write_text(inv.output_dir / "d1.csv", series_csv(d1));
  write_text(inv.output_dir / "g2_corrected.csv", series_csv(curve));
  out << "correct: order " << config.order << ", g2(0) = " << curve.values[0] << '\n';
  return curve;
}

FitResult fit(Invocation& inv, const CorrelationCurve& curve, std::ostream& out) {
  const FitResult result = fit_bunching(curve, fit_options_of(inv.params));
  write_text(inv.output_dir / "fit.json", dump(io::to_json(result)));
  out << "fit: b = " << result.b << ", tau_c = " << result.tau_c << " ns, rms = " << result.residual_rms
      << '\n';
  return result;
}

void cmd_simulate(Invocation& inv, std::ostream& out, std::ostream& err) { simulate(inv, out, err); }

void cmd_pipeline(Invocation& inv, std::ostream& out, std::ostream& err) {
  const SimulationOutput sim = simulate(inv, out, err);
  const double bin = number(inv.params, "bin");
  const std::vector<PhotonStream> arms = {sim.run.start_arm, sim.run.stop_arm};
  const MeanRateEstimate rate = estimate_mean_rate(arms, bin);
  if (correction_of(inv.params).mean_rate_mode == MeanRateMode::from_counts) {
    require(!rate.degenerate, "no detections: cannot estimate the mean rate");
  }
  const CorrelationCurve curve = correct(inv, sim.run.histogram, rate.per_bin, out);
  fit(inv, curve, out);
}

void cmd_correct(Invocation& inv, std::ostream& out, std::ostream& err) {
  json& p = inv.params;
  IntervalHistogram histogram;
  double mean_rate_per_bin = 0.0;
  bool have_rate = false;

  if (!p["input"].is_null()) {
    require(p["starts"].is_null() && p["stops"].is_null(),
            "give either --input or --starts/--stops, not both");
    const fs::path input = text(p, "input");
    std::ifstream csv(input);
    require(static_cast<bool>(csv), "cannot open '" + input.string() + "'");
    histogram = io::read_histogram_csv(csv);
    fs::path sidecar_path = p["sidecar"].is_null() ? fs::path(input).replace_extension(".json")
                                                    : fs::path(text(p, "sidecar"));
    const io::HistogramSidecar sidecar = io::sidecar_from_json(json::parse(io::read_file(sidecar_path)));
    require(same_bin_width(sidecar.bin_width, histogram.bin_width) || histogram.counts.size() <= 1,
            "sidecar bin width does not match the histogram CSV");
    histogram.bin_width = sidecar.bin_width;
    histogram.window = sidecar.window;
    histogram.start_count = sidecar.start_count;
    validate(histogram);
    p["bin"] = histogram.bin_width;
    p["window"] = histogram.window;
    if (sidecar.total_counts > 0 && sidecar.duration > 0.0) {
      mean_rate_per_bin = static_cast<double>(sidecar.total_counts) * histogram.bin_width / sidecar.duration;
      have_rate = true;
    }
  } else {
    require(!p["starts"].is_null() && !p["stops"].is_null(),
            "correct needs --input <histogram.csv> or --starts and --stops");
    std::optional<Picoseconds> duration;
    if (!p["duration"].is_null()) duration = to_picoseconds(number(p, "duration"));
    PhotonStream starts = io::read_photon_stream(text(p, "starts"), duration);
    PhotonStream stops = io::read_photon_stream(text(p, "stops"), duration);
    if (!duration) {
      const Picoseconds common = std::max(starts.duration, stops.duration);
      starts.duration = stops.duration = common;
      p["duration"] = static_cast<double>(common) * 1e-3;
    }
    histogram = start_stop_histogram(starts, stops, number(p, "bin"), number(p, "window"));
    const std::vector<PhotonStream> arms = {starts, stops};
    const MeanRateEstimate rate = estimate_mean_rate(arms, number(p, "bin"));
    mean_rate_per_bin = rate.per_bin;
    have_rate = !rate.degenerate;
  }

  if (correction_of(p).mean_rate_mode == MeanRateMode::from_counts) {
    require(have_rate,
            "from_counts needs total_counts and duration_ns in the sidecar; use --rate-mode given or "
            "tail_normalized");
  }
  (void)err;
  correct(inv, histogram, have_rate ? mean_rate_per_bin : 1.0, out);
}

void cmd_fit(Invocation& inv, std::ostream& out, std::ostream&) {
  const fs::path input = text(inv.params, "input");
  std::ifstream csv(input);
  require(static_cast<bool>(csv), "cannot open '" + input.string() + "'");
  const io::SeriesData data = io::read_series_csv(csv);
  fit(inv, CorrelationCurve{data.bin_width, data.values}, out);
}

void cmd_error_surface(Invocation& inv, std::ostream& out, std::ostream&) {
  json& p = inv.params;
  SweepSpec sweep;
  sweep.axis = sweep_axis_from_string(text(p, "axis"));
  if (p["from"].is_null()) p["from"] = sweep.axis == SweepAxis::intensity ? 0.03 : 0.3;
  if (p["to"].is_null()) p["to"] = sweep.axis == SweepAxis::intensity ? 0.05 : 0.7;
  sweep.from = number(p, "from");
  sweep.to = number(p, "to");
  sweep.steps = static_cast<int>(integer(p, "steps"));
  require(sweep.steps >= 1, "--steps must be >= 1");

  const SourceModel fixed = model_of(p);
  const double bin = number(p, "bin");
  const Index n = delay_grid_size(number(p, "window"), bin);
  const ErrorSurface surface = error_surface(sweep, fixed, order_of(p), bin, n);

  std::ostringstream csv;
  io::write_surface_csv(csv, surface);
  write_text(inv.output_dir / "surface.csv", csv.str());

  json side;
  side["axis"] = std::string(to_string(surface.axis));
  side["axis_values"] = std::vector<double>(surface.axis_values.data(),
                                            surface.axis_values.data() + surface.axis_values.size());
  side["num_delays"] = surface.delays.size();
  side["bin_width_ns"] = bin;
  side["order"] = order_of(p);
  std::vector<double> max_delta;
  for (Index i = 0; i < surface.delta.rows(); ++i) max_delta.push_back(surface.delta.row(i).maxCoeff());
  side["max_delta_percent"] = max_delta;
  side["parameters"] = p;
  write_text(inv.output_dir / "surface.json", dump(side));
  out << "error-surface: " << surface.axis_values.size() << " x " << surface.delays.size() << '\n';
}

// ---------------------------------------------------------------------------

Invocation resolve(CLI::App& app, const std::map<std::string, std::string>& flag_values,
                   const std::string& config_path, const std::string& subcommand, const std::string& out_flag,
                   std::ostream& err) {
  Invocation inv;
  json params = json::object();
  for (const auto& p : parameters()) params[p.key] = p.fallback;

  std::string command = subcommand;
  json file_params = json::object();
  if (!config_path.empty()) {
    json file;
    try {
      file = json::parse(io::read_file(config_path));
    } catch (const json::parse_error& e) {
      throw InvalidArgument("config file is not valid JSON: " + std::string(e.what()));
    }
    require(file.is_object(), "config file must hold a JSON object");
    if (file.contains("parameters")) {
      file_params = file["parameters"];
    } else {
      file_params = file;
      file_params.erase("command");
    }
    require(file_params.is_object(), "config parameters must be a JSON object");
    if (command.empty() && file.contains("command")) command = file["command"].get<std::string>();
    for (const auto& [key, value] : file_params.items()) {
      const Param* param = find_param(key);
      require(param != nullptr, "unknown config key '" + key + "'");
      params[key] = normalise(*param, value);
    }
  }

  for (const auto& p : parameters()) {
    auto* opt = app.get_option_no_throw(p.flag);
    if (opt == nullptr || opt->count() == 0) continue;
    const json value = normalise(p, flag_values.at(p.key));
    if (file_params.contains(p.key) && params[p.key] != value) {
      err << "note: " << p.flag << " overrides the config value " << params[p.key].dump() << '\n';
    }
    params[p.key] = value;
  }

  require(!command.empty(), "no command given (expected one of theory, simulate, correct, fit, "
                            "error-surface, pipeline)");
  require(std::find(kCommands.begin(), kCommands.end(), command) != kCommands.end(),
          "unknown command '" + command + "'");

  inv.command = command;
  inv.params = std::move(params);
  if (!out_flag.empty()) {
    inv.output_dir = out_flag;
  } else if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') {
    inv.output_dir = env;
  } else {
    inv.output_dir = ".";
  }
  return inv;
}

}  // namespace

double parse_time_ns(const std::string& raw) {
  const std::string t = trim(raw);
  static const std::vector<std::pair<std::string, double>> units = {
      {"ps", 1e-3}, {"ns", 1.0}, {"us", 1e3}, {"ms", 1e6}, {"s", 1e9}};
  for (const auto& [suffix, scale] : units) {
    if (t.size() > suffix.size() && t.compare(t.size() - suffix.size(), suffix.size(), suffix) == 0) {
      const std::string number_part = t.substr(0, t.size() - suffix.size());
      // "ns", "ms", "us", "ps" all end in 's'; only accept bare 's' after a digit.
      if (suffix == "s" && !std::isdigit(static_cast<unsigned char>(number_part.back())) &&
          number_part.back() != '.') {
        break;
      }
      return parse_number(number_part, "time") * scale;
    }
  }
  return parse_number(t, "time");
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Photon-correlation (HBT) simulation and self-convolution g2 correction"};
  app.fallthrough();
  app.set_version_flag("--version", std::string("hbt ") + HBT_VERSION);

  std::string config_path;
  std::string out_flag;
  std::map<std::string, std::string> flag_values;
  app.add_option("--config", config_path, "JSON config file (flags override its values)");
  app.add_option("--out", out_flag, std::string("Output directory (default $") + kOutputDirEnv + " or .)");
  for (const auto& p : parameters()) app.add_option(p.flag, flag_values[p.key], p.help);

  std::map<std::string, CLI::App*> subcommands;
  for (const auto& name : kCommands) subcommands[name] = app.add_subcommand(name);
  subcommands["theory"]->description("Analytic g2, per-bin G and its order-N correction");
  subcommands["simulate"]->description("Monte Carlo HBT run producing an interval histogram");
  subcommands["correct"]->description("Order-N correction of a measured interval histogram");
  subcommands["fit"]->description("Fit g2 = 1 + b exp(-2 tau / tau_c) to a curve");
  subcommands["error-surface"]->description("Relative error of the order-N correction over a sweep");
  subcommands["pipeline"]->description("simulate + correct + fit");
  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kValidationError;
  }

  std::string subcommand;
  for (const auto& [name, sub] : subcommands) {
    if (sub->parsed()) subcommand = name;
  }

  try {
    Invocation inv = resolve(app, flag_values, config_path, subcommand, out_flag, err);
    std::error_code ec;
    fs::create_directories(inv.output_dir, ec);
    if (ec || !fs::is_directory(inv.output_dir)) {
      err << "error: cannot create output directory '" << inv.output_dir.string() << "'\n";
      return kRuntimeError;
    }

    if (inv.command == "theory") {
      cmd_theory(inv, out);
    } else if (inv.command == "simulate") {
      cmd_simulate(inv, out, err);
    } else if (inv.command == "correct") {
      cmd_correct(inv, out, err);
    } else if (inv.command == "fit") {
      cmd_fit(inv, out, err);
    } else if (inv.command == "error-surface") {
      cmd_error_surface(inv, out, err);
    } else {
      cmd_pipeline(inv, out, err);
    }

    json provenance;
    provenance["tool"] = "hbt";
    provenance["version"] = HBT_VERSION;
    provenance["command"] = inv.command;
    provenance["parameters"] = inv.params;
    provenance["output_dir"] = inv.output_dir.string();
    write_text(inv.output_dir / "run.json", dump(provenance));
    return kOk;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace hbt::cli
