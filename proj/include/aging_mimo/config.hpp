#pragma once

// Run configuration: INI file ("[section] key = value" maps to section.key),
// then AGING_MIMO_* environment overrides. Powers are dB in the file and are
// converted to linear scale here.

#include <cctype>
#include <cmath>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <system_error>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "aging_mimo/errors.hpp"
#include "aging_mimo/rng.hpp"
#include "aging_mimo/scenario.hpp"

namespace aging {

enum class FadingMode { uniform, hexagonal };

struct RunConfig {
  ScenarioConfig scenario{};
  double snr_db = 10.0;
  std::optional<double> pilot_snr_db;  // defaults to snr_db (p_p = p)
  FadingMode fading_mode = FadingMode::uniform;
  double beta_cross = 1.0;
  double shadow_db = 0.0;
  double pathloss_exp = 3.8;
  double cell_radius = 1.0;

  /// Applies the dB-valued fields to the scenario powers.
  void resolve_powers() {
    scenario.p = db_to_linear(snr_db);
    scenario.p_p = db_to_linear(pilot_snr_db.value_or(snr_db));
  }

  void validate() const {
    scenario.validate();
    if (!(beta_cross >= 0.0)) throw ConfigError("fading.beta_cross must be >= 0");
    if (!(shadow_db >= 0.0)) throw ConfigError("fading.shadow_db must be >= 0");
    if (fading_mode == FadingMode::hexagonal && !(pathloss_exp > 2.0))
      throw ConfigError("fading.pathloss_exp must exceed 2");
    if (!(cell_radius > 0.0)) throw ConfigError("fading.cell_radius must be positive");
  }
};

inline const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys{
      "cells",        "users",          "antennas",          "snr_db",
      "pilot_snr_db", "pilot_len",      "coherence_len",     "seed",
      "doppler.normalized", "doppler.velocity_mps", "doppler.carrier_hz", "doppler.ts_s",
      "fading.mode",  "fading.beta_cross", "fading.shadow_db", "fading.pathloss_exp",
      "fading.cell_radius"};
  return keys;
}

/// AGING_MIMO_ + upper-cased key with '.' spelled "__", e.g. AGING_MIMO_FADING__BETA_CROSS.
inline std::string env_name(const std::string& key) {
  std::string out = "AGING_MIMO_";
  for (char c : key) {
    if (c == '.') out += "__";
    else out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError("config key '" + key + "': expected a number, got '" + raw + "'");
  return out;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': expected an integer, got '" + raw + "'");
  return out;
}

inline void flatten(const boost::property_tree::ptree& tree, const std::string& prefix,
                    std::map<std::string, std::string>& out) {
  for (const auto& [name, child] : tree) {
    const std::string key = prefix.empty() ? name : prefix + "." + name;
    if (child.empty()) out[key] = child.data();
    else flatten(child, key, out);
  }
}

}  // namespace detail

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

/// Raw key/value pairs from an INI file; unknown keys are rejected.
inline std::map<std::string, std::string> read_config_file(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("cannot read config '" + path + "': " + e.message());
  }
  std::map<std::string, std::string> raw;
  detail::flatten(tree, "", raw);
  for (const auto& [k, v] : raw)
    if (!config_keys().contains(k)) throw ConfigError("unknown config key '" + k + "' in " + path);
  return raw;
}

/// Builds a RunConfig from raw pairs (file values), then environment overrides.
inline RunConfig build_config(std::map<std::string, std::string> raw, const EnvLookup& env = process_env) {
  for (const auto& key : config_keys())
    if (auto v = env(env_name(key))) raw[key] = *v;

  RunConfig rc;
  auto& s = rc.scenario;
  auto get = [&](const std::string& k) -> const std::string* {
    auto it = raw.find(k);
    return it == raw.end() ? nullptr : &it->second;
  };
  if (auto v = get("cells")) s.cells = detail::parse_int<int>("cells", *v);
  if (auto v = get("users")) s.users = detail::parse_int<int>("users", *v);
  if (auto v = get("antennas")) s.antennas = detail::parse_int<int>("antennas", *v);
  if (auto v = get("pilot_len")) s.tau = detail::parse_int<int>("pilot_len", *v);
  if (auto v = get("coherence_len")) s.coherence = detail::parse_int<int>("coherence_len", *v);
  if (auto v = get("seed")) s.seed = detail::parse_int<std::uint64_t>("seed", *v);
  if (auto v = get("snr_db")) rc.snr_db = detail::parse_double("snr_db", *v);
  if (auto v = get("pilot_snr_db")) rc.pilot_snr_db = detail::parse_double("pilot_snr_db", *v);

  const auto* norm = get("doppler.normalized");
  const auto* vel = get("doppler.velocity_mps");
  const auto* fc = get("doppler.carrier_hz");
  const auto* ts = get("doppler.ts_s");
  if (norm && (vel || fc || ts))
    throw ConfigError("give either doppler.normalized or the physical doppler triple, not both");
  try {
    if (norm) {
      s.doppler = DopplerParams::normalized(detail::parse_double("doppler.normalized", *norm));
    } else if (vel || fc || ts) {
      if (!(vel && fc && ts))
        throw ConfigError("doppler.velocity_mps, doppler.carrier_hz and doppler.ts_s go together");
      s.doppler = DopplerParams::physical(detail::parse_double("doppler.velocity_mps", *vel),
                                          detail::parse_double("doppler.carrier_hz", *fc),
                                          detail::parse_double("doppler.ts_s", *ts));
    }
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }

  if (auto v = get("fading.mode")) {
    const std::string m = detail::trim(*v);
    if (m == "uniform") rc.fading_mode = FadingMode::uniform;
    else if (m == "hexagonal") rc.fading_mode = FadingMode::hexagonal;
    else throw ConfigError("fading.mode must be 'uniform' or 'hexagonal', got '" + m + "'");
  }
  if (auto v = get("fading.beta_cross")) rc.beta_cross = detail::parse_double("fading.beta_cross", *v);
  if (auto v = get("fading.shadow_db")) rc.shadow_db = detail::parse_double("fading.shadow_db", *v);
  if (auto v = get("fading.pathloss_exp")) rc.pathloss_exp = detail::parse_double("fading.pathloss_exp", *v);
  if (auto v = get("fading.cell_radius")) rc.cell_radius = detail::parse_double("fading.cell_radius", *v);
  rc.resolve_powers();
  return rc;
}

inline RunConfig load_config(const std::optional<std::string>& path, const EnvLookup& env = process_env) {
  return build_config(path ? read_config_file(*path) : std::map<std::string, std::string>{}, env);
}

/// Large-scale fading for the configured mode; a pure function of the config.
inline LargeScaleFading build_fading(const RunConfig& rc) {
  try {
    if (rc.fading_mode == FadingMode::uniform)
      return uniform_interference_profile(rc.scenario, rc.beta_cross, rc.shadow_db);
    Rng rng(splitmix64(rc.scenario.seed ^ 0x686578616c61796fULL));
    return hexagonal_large_scale(rc.scenario, rc.cell_radius, rc.pathloss_exp, rc.shadow_db, rng).fading;
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace aging
