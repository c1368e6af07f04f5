#pragma once

// CSV tables and run manifests. Numbers are written in shortest round-trip
// form so a fixed (config, seed, version) gives byte-identical files.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "aging_mimo/config.hpp"

namespace aging {

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[std::size_t(i)] = digits[v & 0xf];
  return s;
}

/// Canonical key=value snapshot of everything that determines the results.
inline std::map<std::string, std::string> config_snapshot(const RunConfig& rc) {
  const auto& s = rc.scenario;
  std::map<std::string, std::string> m;
  m["cells"] = std::to_string(s.cells);
  m["users"] = std::to_string(s.users);
  m["antennas"] = std::to_string(s.antennas);
  m["snr_db"] = format_number(rc.snr_db);
  m["pilot_snr_db"] = format_number(rc.pilot_snr_db.value_or(rc.snr_db));
  m["pilot_len"] = std::to_string(s.tau);
  m["coherence_len"] = std::to_string(s.coherence);
  m["seed"] = std::to_string(s.seed);
  m["doppler.normalized"] = format_number(s.doppler.normalized_value());
  m["fading.mode"] = rc.fading_mode == FadingMode::uniform ? "uniform" : "hexagonal";
  m["fading.beta_cross"] = format_number(rc.beta_cross);
  m["fading.shadow_db"] = format_number(rc.shadow_db);
  m["fading.pathloss_exp"] = format_number(rc.pathloss_exp);
  m["fading.cell_radius"] = format_number(rc.cell_radius);
  return m;
}

/// Hash over sorted key=value lines; worker count and timestamps stay out.
inline std::uint64_t manifest_hash(const std::map<std::string, std::string>& entries) {
  std::string text;
  for (const auto& [k, v] : entries) text += k + "=" + v + "\n";
  return fnv1a(text);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void meta(const std::string& key, const std::string& value) { out_ << "# " << key << '=' << value << '\n'; }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << quote(cells[i]);
    }
    out_ << '\n';
  }

 private:
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }

  std::ostream& out_;
};

}  // namespace aging
