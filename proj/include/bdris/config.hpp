#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bdris/benchmark.hpp"
#include "bdris/csv.hpp"
#include "bdris/experiments.hpp"

// Experiment configuration: a line-oriented `key = value` text format.
//
//   # comment (also after '#' at the end of a line)
//   experiment = beamforming-bench   # keys before any header are [general]
//   element_counts = 16, 32, 64
//   [channel]
//   exponent_device_ris = 2.2
//
// Section headers are [general], [channel], [optimizer] and [qml]. Keys may
// appear once per section; unknown keys, repeated keys and malformed values
// are errors carrying the line number.

namespace bdris::config {

enum class Experiment { PowerComparison, BeamformingBench, QmlBeam };

inline std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::PowerComparison: return "power-comparison";
    case Experiment::BeamformingBench: return "beamforming-bench";
    case Experiment::QmlBeam: return "qml-beam";
  }
  return "?";
}

inline std::optional<Experiment> parse_experiment(std::string_view s) {
  for (auto e : {Experiment::PowerComparison, Experiment::BeamformingBench, Experiment::QmlBeam})
    if (s == to_string(e)) return e;
  return std::nullopt;
}

struct ExperimentConfig {
  std::optional<Experiment> experiment;
  std::uint64_t seed = 1;
  // Unset counts take the experiment's default in resolve().
  std::optional<int> trials;
  std::optional<std::vector<Index>> element_counts;
  std::vector<optim::Algorithm> algorithms{optim::Algorithm::Rzf, optim::Algorithm::Fp,
                                           optim::Algorithm::Ao, optim::Algorithm::Qnm};
  std::string architecture = "fully-connected";
  bool random_baseline = false;
  std::string output_dir = "results";
  optim::ScenarioConfig scenario;
  optim::OptimizerConfig optimizer;
  experiments::QmlOptions qml;
};

struct ConfigError {
  int line = 0;  // 0: not tied to a line
  std::string key;
  std::string message;
};

// One machine-parsable line.
inline std::string format_error(const ConfigError& e) {
  std::string s = "config-error line=" + std::to_string(e.line);
  if (!e.key.empty()) s += " key=" + e.key;
  return s + " message=\"" + e.message + "\"";
}

/// "fully-connected", "diagonal" or "group-connected:K" (K equal groups).
inline surface::Architecture parse_architecture(const std::string& s, Index n) {
  if (s == "fully-connected") return surface::FullyConnected{};
  if (s == "diagonal") return surface::Diagonal{};
  const std::string prefix = "group-connected:";
  if (s.rfind(prefix, 0) == 0) {
    const Index k = std::stol(s.substr(prefix.size()));
    return surface::GroupConnected{manifold::BlockStructure::uniform(n, k)};
  }
  throw InvalidInput("unknown architecture '" + s + "'");
}

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  for (const auto& f : csv::split_line(v)) {
    std::string t = trim(f);
    if (t.empty()) throw InvalidInput("empty list element");
    out.push_back(std::move(t));
  }
  return out;
}

inline double to_double(const std::string& v) {
  double x = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw InvalidInput("not a real number: '" + v + "'");
  return x;
}

template <typename Int>
Int to_int(const std::string& v) {
  Int x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw InvalidInput("not an integer: '" + v + "'");
  return x;
}

inline bool to_bool(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw InvalidInput("not a boolean (true/false): '" + v + "'");
}

template <typename T>
std::string join(const std::vector<T>& xs, auto&& fmt) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + fmt(xs[i]);
  return s;
}

}  // namespace detail

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

namespace detail {

template <typename Access>
Field real(std::string section, std::string key, Access access) {
  return {std::move(section), std::move(key),
          [access](ExperimentConfig& c, const std::string& v) { access(c) = to_double(v); },
          [access](const ExperimentConfig& c) {
            return csv::shortest_double(access(const_cast<ExperimentConfig&>(c)));
          }};
}

template <typename Access>
Field integer(std::string section, std::string key, Access access) {
  using Int = std::remove_reference_t<decltype(access(std::declval<ExperimentConfig&>()))>;
  return {std::move(section), std::move(key),
          [access](ExperimentConfig& c, const std::string& v) { access(c) = to_int<Int>(v); },
          [access](const ExperimentConfig& c) {
            return std::to_string(access(const_cast<ExperimentConfig&>(c)));
          }};
}

}  // namespace detail

/// Every recognised key, in the order config.resolved lists them.
inline const std::vector<Field>& fields() {
  using detail::integer;
  using detail::real;
  using C = ExperimentConfig;
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    v.push_back({"general", "experiment",
                 [](C& c, const std::string& s) {
                   c.experiment = parse_experiment(s);
                   if (!c.experiment)
                     throw InvalidInput("expected power-comparison, beamforming-bench or qml-beam");
                 },
                 [](const C& c) { return c.experiment ? to_string(*c.experiment) : std::string(); }});
    v.push_back(integer("general", "seed", [](C& c) -> std::uint64_t& { return c.seed; }));
    v.push_back({"general", "trials",
                 [](C& c, const std::string& s) { c.trials = detail::to_int<int>(s); },
                 [](const C& c) { return c.trials ? std::to_string(*c.trials) : std::string(); }});
    v.push_back({"general", "element_counts",
                 [](C& c, const std::string& s) {
                   std::vector<Index> ns;
                   if (!s.empty())
                     for (const auto& x : detail::split_list(s)) ns.push_back(detail::to_int<Index>(x));
                   c.element_counts = ns;
                 },
                 [](const C& c) {
                   return c.element_counts
                              ? detail::join(*c.element_counts, [](Index n) { return std::to_string(n); })
                              : std::string();
                 }});
    v.push_back({"general", "algorithms",
                 [](C& c, const std::string& s) {
                   std::vector<optim::Algorithm> as;
                   for (const auto& x : detail::split_list(s)) {
                     const auto a = optim::parse_algorithm(x);
                     if (!a) throw InvalidInput("unknown algorithm '" + x + "' (rzf, fp, ao, qnm)");
                     if (std::find(as.begin(), as.end(), *a) != as.end())
                       throw InvalidInput("algorithm '" + x + "' listed twice");
                     as.push_back(*a);
                   }
                   c.algorithms = as;
                 },
                 [](const C& c) {
                   return detail::join(c.algorithms, [](optim::Algorithm a) { return optim::to_string(a); });
                 }});
    v.push_back({"general", "architecture",
                 [](C& c, const std::string& s) {
                   if (s.rfind("group-connected:", 0) == 0) {
                     if (detail::to_int<int>(s.substr(16)) < 1)
                       throw InvalidInput("group count must be >= 1");
                   } else if (s != "fully-connected" && s != "diagonal") {
                     throw InvalidInput("expected fully-connected, diagonal or group-connected:K");
                   }
                   c.architecture = s;
                 },
                 [](const C& c) { return c.architecture; }});
    v.push_back({"general", "random_baseline",
                 [](C& c, const std::string& s) { c.random_baseline = detail::to_bool(s); },
                 [](const C& c) { return std::string(c.random_baseline ? "true" : "false"); }});
    v.push_back({"general", "output_dir", [](C& c, const std::string& s) { c.output_dir = s; },
                 [](const C& c) { return c.output_dir; }});

    v.push_back(real("channel", "reference_loss_db", [](C& c) -> double& { return c.scenario.pathloss.reference_loss_db; }));
    v.push_back(real("channel", "reference_distance_m", [](C& c) -> double& { return c.scenario.pathloss.reference_distance_m; }));
    v.push_back(real("channel", "exponent_device_bs", [](C& c) -> double& { return c.scenario.pathloss.exponent_device_bs; }));
    v.push_back(real("channel", "exponent_device_ris", [](C& c) -> double& { return c.scenario.pathloss.exponent_device_ris; }));
    v.push_back(real("channel", "exponent_bs_ris", [](C& c) -> double& { return c.scenario.pathloss.exponent_bs_ris; }));
    // Moves the surface along the x axis so the geometry stays consistent.
    v.push_back({"channel", "bs_ris_distance_m",
                 [](C& c, const std::string& s) {
                   auto& g = c.scenario.geometry;
                   g.bs_ris_distance_m = detail::to_double(s);
                   g.ris_position = g.bs_position + channel::Vec3(g.bs_ris_distance_m, 0.0, 0.0);
                 },
                 [](const C& c) { return csv::shortest_double(c.scenario.geometry.bs_ris_distance_m); }});
    v.push_back(real("channel", "carrier_hz", [](C& c) -> double& { return c.scenario.geometry.carrier_hz; }));
    v.push_back(real("channel", "area_x_min", [](C& c) -> double& { return c.scenario.geometry.device_area.x_min; }));
    v.push_back(real("channel", "area_y_min", [](C& c) -> double& { return c.scenario.geometry.device_area.y_min; }));
    v.push_back(real("channel", "area_x_max", [](C& c) -> double& { return c.scenario.geometry.device_area.x_max; }));
    v.push_back(real("channel", "area_y_max", [](C& c) -> double& { return c.scenario.geometry.device_area.y_max; }));
    v.push_back(real("channel", "bs_ris_rician_k_db", [](C& c) -> double& { return c.scenario.fading.bs_ris_rician_k_db; }));
    v.push_back(real("channel", "device_los_rician_k_db", [](C& c) -> double& { return c.scenario.fading.device_los_rician_k_db; }));
    v.push_back(real("channel", "device_nlos_rician_k_db", [](C& c) -> double& { return c.scenario.fading.device_nlos_rician_k_db; }));
    v.push_back(real("channel", "los_probability", [](C& c) -> double& { return c.scenario.fading.los_probability; }));
    v.push_back(real("channel", "speed_min_mps", [](C& c) -> double& { return c.scenario.speeds.min_mps; }));
    v.push_back(real("channel", "speed_max_mps", [](C& c) -> double& { return c.scenario.speeds.max_mps; }));
    v.push_back(real("channel", "mobility_dt_s", [](C& c) -> double& { return c.scenario.mobility_dt_s; }));
    v.push_back(real("channel", "snapshot_interval_s", [](C& c) -> double& { return c.scenario.snapshot_interval_s; }));
    v.push_back(integer("channel", "snapshots", [](C& c) -> int& { return c.scenario.snapshots; }));
    v.push_back(integer("channel", "num_devices", [](C& c) -> Index& { return c.scenario.num_devices; }));
    v.push_back(integer("channel", "num_bs_antennas", [](C& c) -> Index& { return c.scenario.budget.num_bs_antennas; }));
    v.push_back(real("channel", "noise_power_dbm", [](C& c) -> double& { return c.scenario.budget.noise_power_dbm; }));
    v.push_back(real("channel", "tx_snr_db", [](C& c) -> double& { return c.scenario.budget.tx_snr_db; }));

    v.push_back(integer("optimizer", "max_iterations", [](C& c) -> int& { return c.optimizer.max_iterations; }));
    v.push_back(real("optimizer", "objective_tolerance", [](C& c) -> double& { return c.optimizer.objective_tolerance; }));
    v.push_back(real("optimizer", "armijo_c", [](C& c) -> double& { return c.optimizer.armijo_c; }));
    v.push_back(real("optimizer", "backtrack_factor", [](C& c) -> double& { return c.optimizer.backtrack_factor; }));
    v.push_back(real("optimizer", "initial_step", [](C& c) -> double& { return c.optimizer.initial_step; }));
    v.push_back(integer("optimizer", "lbfgs_memory", [](C& c) -> int& { return c.optimizer.lbfgs_memory; }));
    v.push_back(integer("optimizer", "fp_inner_theta_steps", [](C& c) -> int& { return c.optimizer.fp_inner_theta_steps; }));
    v.push_back(integer("optimizer", "max_backtracks", [](C& c) -> int& { return c.optimizer.max_backtracks; }));
    v.push_back(real("optimizer", "gradient_tolerance", [](C& c) -> double& { return c.optimizer.gradient_tolerance; }));

    v.push_back(integer("qml", "qubits", [](C& c) -> int& { return c.qml.qubits; }));
    v.push_back(integer("qml", "layers", [](C& c) -> int& { return c.qml.layers; }));
    v.push_back(integer("qml", "beams", [](C& c) -> int& { return c.qml.beams; }));
    v.push_back(integer("qml", "samples", [](C& c) -> int& { return c.qml.samples; }));
    v.push_back(real("qml", "noise_sigma", [](C& c) -> double& { return c.qml.noise_sigma; }));
    v.push_back(integer("qml", "epochs", [](C& c) -> int& { return c.qml.epochs; }));
    v.push_back(real("qml", "learning_rate", [](C& c) -> double& { return c.qml.learning_rate; }));
    return v;
  }();
  return f;
}

struct ParseResult {
  ExperimentConfig config;
  std::vector<ConfigError> errors;
  bool ok() const { return errors.empty(); }
};

/// Parses and validates; all errors are collected, none are fatal early.
inline ParseResult parse(std::istream& in);

/// Fills experiment-dependent defaults. Requires `experiment`.
inline ExperimentConfig resolve(ExperimentConfig c) {
  if (!c.experiment) throw InvalidInput("experiment missing");
  switch (*c.experiment) {
    case Experiment::PowerComparison:
      if (!c.trials) c.trials = 200;
      if (!c.element_counts) c.element_counts = std::vector<Index>{8, 16, 32, 64};
      break;
    case Experiment::BeamformingBench:
      if (!c.trials) c.trials = 50;
      if (!c.element_counts) c.element_counts = std::vector<Index>{16, 32, 64, 128};
      break;
    case Experiment::QmlBeam:
      if (!c.trials) c.trials = 1;
      if (!c.element_counts) c.element_counts = std::vector<Index>{};
      break;
  }
  return c;
}

// Semantic checks on a resolved config.
inline std::vector<ConfigError> check(const ExperimentConfig& c) {
  std::vector<ConfigError> errs;
  auto guard = [&](const char* key, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      errs.push_back({0, key, e.what()});
    }
  };
  if (*c.trials < 1) errs.push_back({0, "trials", "trials must be >= 1"});
  const bool ris = *c.experiment != Experiment::QmlBeam;
  if (ris && c.element_counts->empty())
    errs.push_back({0, "element_counts", "element_counts must be non-empty"});
  std::vector<Index> sorted = *c.element_counts;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    errs.push_back({0, "element_counts", "element counts must be distinct"});
  for (Index n : *c.element_counts) {
    if (n < 1) errs.push_back({0, "element_counts", "element counts must be >= 1"});
    else if (*c.experiment == Experiment::BeamformingBench)
      guard("architecture", [&] { parse_architecture(c.architecture, n); });
  }
  if (*c.experiment == Experiment::BeamformingBench && c.algorithms.empty())
    errs.push_back({0, "algorithms", "at least one algorithm required"});
  guard("[channel]", [&] { c.scenario.validate(); });
  guard("[optimizer]", [&] { c.optimizer.validate(); });
  guard("[qml]", [&] { c.qml.validate(); });
  if (c.output_dir.empty()) errs.push_back({0, "output_dir", "output_dir must be non-empty"});
  return errs;
}

inline ParseResult parse(std::istream& in) {
  ParseResult r;
  std::string section = "general";
  std::vector<std::pair<std::string, std::string>> seen;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        r.errors.push_back({line_no, "", "malformed section header"});
        continue;
      }
      section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      if (section != "general" && section != "channel" && section != "optimizer" && section != "qml")
        r.errors.push_back({line_no, "", "unknown section [" + section + "]"});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      r.errors.push_back({line_no, "", "expected 'key = value'"});
      continue;
    }
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    const auto& fs = fields();
    const auto it = std::find_if(fs.begin(), fs.end(),
                                 [&](const Field& f) { return f.section == section && f.key == key; });
    if (it == fs.end()) {
      r.errors.push_back({line_no, key, "unknown key in [" + section + "]"});
      continue;
    }
    if (std::find(seen.begin(), seen.end(), std::pair{section, key}) != seen.end()) {
      r.errors.push_back({line_no, key, "key given more than once"});
      continue;
    }
    seen.emplace_back(section, key);
    try {
      it->set(r.config, value);
    } catch (const std::exception& e) {
      r.errors.push_back({line_no, key, e.what()});
    }
  }
  if (!r.config.experiment) {
    if (std::find(seen.begin(), seen.end(), std::pair<std::string, std::string>{"general", "experiment"}) ==
        seen.end())
      r.errors.push_back({0, "experiment", "experiment missing"});
    return r;
  }
  if (!r.errors.empty()) return r;
  r.config = resolve(std::move(r.config));
  for (auto& e : check(r.config)) r.errors.push_back(std::move(e));
  return r;
}

inline ParseResult parse_string(const std::string& text) {
  std::istringstream is(text);
  return parse(is);
}

/// Every key with its effective value, grouped by section; parses back to the
/// same configuration.
inline void write_resolved(std::ostream& os, const ExperimentConfig& c) {
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      section = f.section;
      os << (section == "general" ? "" : "\n") << '[' << section << "]\n";
    }
    os << f.key << " = " << f.get(c) << '\n';
  }
}

}  // namespace bdris::config
