#pragma once

#include <climits>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "entdist/channel_grid.hpp"
#include "entdist/link.hpp"
#include "entdist/measure.hpp"
#include "entdist/source.hpp"

// Run configuration: a flat key-value text format with dotted section paths.
//
//   # comment
//   grid.channel_count = 44
//   link.dgd_signal = 0.35
//
// Unknown keys are rejected; an empty file yields the defaults.  The rng seed
// is always explicit (default 1) — never wall clock.

namespace entdist {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TomoConfig {
  std::string method = "mle";  // "mle" or "linear"
  int max_evals = 100000;

  void validate() const {
    if (method != "mle" && method != "linear")
      throw std::invalid_argument("method must be 'mle' or 'linear'");
    if (max_evals < 1) throw std::invalid_argument("max_evals must be >= 1");
  }
};

struct RunConfig {
  GridParams grid;
  SourceParams source;
  LinkParams link;
  DetectorParams detector;
  TomoConfig tomo;
  int compensation_every = 16;  // realignment cadence in intervals; 0 = never
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  void validate() const {
    const auto check = [](const char* block, const auto& sub) {
      try {
        sub.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string(block) + "." + e.what());
      }
    };
    check("grid", grid);
    check("source", source);
    check("link", link);
    check("detector", detector);
    check("tomo", tomo);
    if (compensation_every < 0) throw ConfigError("compensation.every must be >= 0");
    if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

template <typename T>
T parse_number(const std::string& value, const std::string& key);

template <>
inline double parse_number<double>(const std::string& value, const std::string& key) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + value + "' is not a number");
  }
  if (pos != value.size()) throw ConfigError(key + ": trailing characters in '" + value + "'");
  return v;
}

template <>
inline int parse_number<int>(const std::string& value, const std::string& key) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + value + "' is not an integer");
  }
  if (pos != value.size()) throw ConfigError(key + ": trailing characters in '" + value + "'");
  if (v < INT_MIN || v > INT_MAX) throw ConfigError(key + ": value out of range");
  return static_cast<int>(v);
}

template <>
inline std::uint64_t parse_number<std::uint64_t>(const std::string& value,
                                                 const std::string& key) {
  if (value.find('-') != std::string::npos)  // stoull would silently wrap negatives
    throw ConfigError(key + ": '" + value + "' is not a non-negative integer");
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + value + "' is not a non-negative integer");
  }
  if (pos != value.size()) throw ConfigError(key + ": trailing characters in '" + value + "'");
  return v;
}

}  // namespace detail

// Parse a config stream.  `origin` names the source in error messages.
inline RunConfig parse_config(std::istream& in, const std::string& origin = "<config>") {
  RunConfig cfg;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  std::map<std::string, Setter> keys;
  const auto dbl = [&keys](const std::string& key, double& target) {
    keys[key] = [&target](const std::string& k, const std::string& v) {
      target = detail::parse_number<double>(v, k);
    };
  };
  dbl("grid.pump_wavelength", cfg.grid.pump_wavelength);
  dbl("grid.signal_start_wavelength", cfg.grid.signal_start_wavelength);
  dbl("grid.spacing", cfg.grid.spacing_ghz);
  keys["grid.channel_count"] = [&cfg](const std::string& k, const std::string& v) {
    cfg.grid.channel_count = detail::parse_number<int>(v, k);
  };
  dbl("grid.bpf_min", cfg.grid.bpf_min);
  dbl("grid.bpf_max", cfg.grid.bpf_max);

  dbl("source.pump_center", cfg.source.pump_center);
  dbl("source.pump_filter_fwhm", cfg.source.pump_filter_fwhm);
  dbl("source.crystal_length", cfg.source.crystal_length);
  dbl("source.temperature", cfg.source.temperature);
  dbl("source.theta0", cfg.source.theta0);
  dbl("source.mean_pairs_per_gate", cfg.source.mean_pairs_per_gate);
  dbl("source.pm_curvature", cfg.source.pm_curvature);
  dbl("source.intrinsic_purity", cfg.source.intrinsic_purity);

  dbl("link.length", cfg.link.length);
  dbl("link.attenuation", cfg.link.attenuation);
  dbl("link.dgd_signal", cfg.link.dgd_signal);
  dbl("link.dgd_idler", cfg.link.dgd_idler);
  dbl("link.drift_step", cfg.link.drift_step);
  dbl("link.depol", cfg.link.depol);
  keys["link.seed"] = [&cfg](const std::string& k, const std::string& v) {
    cfg.link.seed = detail::parse_number<std::uint64_t>(v, k);
  };
  dbl("link.ref_signal_freq", cfg.link.ref_signal_freq);

  dbl("detector.efficiency_signal", cfg.detector.efficiency_signal);
  dbl("detector.efficiency_idler", cfg.detector.efficiency_idler);
  dbl("detector.dark_prob_per_gate", cfg.detector.dark_prob_per_gate);
  dbl("detector.gate_rate", cfg.detector.gate_rate);
  dbl("detector.integration_time", cfg.detector.integration_time);

  keys["tomo.method"] = [&cfg](const std::string&, const std::string& v) {
    cfg.tomo.method = v;
  };
  keys["tomo.max_evals"] = [&cfg](const std::string& k, const std::string& v) {
    cfg.tomo.max_evals = detail::parse_number<int>(v, k);
  };
  keys["compensation.every"] = [&cfg](const std::string& k, const std::string& v) {
    cfg.compensation_every = detail::parse_number<int>(v, k);
  };
  keys["seed"] = [&cfg](const std::string& k, const std::string& v) {
    cfg.seed = detail::parse_number<std::uint64_t>(v, k);
  };
  keys["out_dir"] = [&cfg](const std::string&, const std::string& v) { cfg.out_dir = v; };

  bool link_seed_set = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = detail::trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end())
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (value.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty value for '" + key +
                        "'");
    it->second(key, value);
    if (key == "link.seed") link_seed_set = true;
  }
  // The link's drift streams follow the run seed unless pinned explicitly.
  if (!link_seed_set) cfg.link.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, path);
}

}  // namespace entdist
