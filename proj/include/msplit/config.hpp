#pragma once

/// @file config.hpp
/// Flat key = value experiment configuration, builtin recipes and the seeded
/// channelized permeability generator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "msplit/error.hpp"
#include "msplit/fine_assembly.hpp"
#include "msplit/splitting.hpp"

namespace msplit {

/// Axis-aligned high-permeability channels on a unit background.
struct ChannelSpec {
  std::uint64_t seed = 1;
  int count = 12;
  int width = 2;  ///< fine cells
  double contrast = 1e3;
  double background = 1.0;
  double min_length = 0.3;  ///< fraction of the domain side
  double max_length = 0.9;
};

struct ExperimentConfig {
  std::string name = "custom";

  int coarse_nx = 16, coarse_ny = 16, refinement = 16;

  std::string permeability = "example1";  ///< example1 | constant | channels | raster
  double permeability_value = 1.0;
  std::string permeability_file;
  ChannelSpec channels;

  std::string source = "example1";  ///< example1 | example3 | sine | constant | zero
  double source_value = 1.0;
  std::string initial = "sine";  ///< sine | zero

  int ell = 6;
  std::vector<int> blocks = {1, 5};
  double mu = 1.0, sigma = 1.0, tau = 1e-3, T = 0.25;
  SplitVariant variant = SplitVariant::BlockDiagonal;
  bool orthonormalize = true;
  unsigned threads = 1;

  std::string csv;             ///< error table; empty = stdout
  std::string history;         ///< t,e_a history of the split run
  std::string field_dump;      ///< final split field, raster format
  std::string reference_dump;  ///< final reference field
  std::string basis_file;      ///< load the offline basis instead of building it

  std::vector<double> sweep_tau;
  std::vector<std::pair<double, double>> sweep_params;  ///< (mu, sigma)
  std::vector<std::vector<int>> sweep_blocks;
  double reference_tau = 0.0;  ///< 0: reference uses the split run's tau
  bool fine_reference = false;

  SplitConfig split() const {
    SplitConfig s;
    s.mu = mu;
    s.sigma = sigma;
    s.tau = tau;
    s.T = T;
    s.variant = variant;
    return s;
  }
};

inline std::string blocks_label(const std::vector<int>& blocks) {
  std::string s;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) s += '+';
    s += std::to_string(blocks[i]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Value parsing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  const char* s = v.c_str();
  char* end = nullptr;
  const double x = std::strtod(s, &end);
  if (end == s || *end != '\0' || !std::isfinite(x)) throw ConfigError(key + ": expected a real number, got '" + v + "'");
  return x;
}

inline long parse_int(const std::string& key, const std::string& v) {
  const char* s = v.c_str();
  char* end = nullptr;
  const long x = std::strtol(s, &end, 10);
  if (end == s || *end != '\0') throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<int> parse_blocks(const std::string& key, const std::string& v) {
  std::vector<int> b;
  for (const auto& tok : split_list(v, '+')) b.push_back(static_cast<int>(parse_int(key, tok)));
  if (b.empty()) throw ConfigError(key + ": empty block list");
  return b;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Builtins
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names = {"example1", "example2-synthetic", "example3-synthetic"};
  return names;
}

inline bool is_builtin(const std::string& name) {
  for (const auto& n : builtin_names())
    if (n == name) return true;
  return false;
}

inline ExperimentConfig builtin_config(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  if (name == "example1") return c;
  if (name == "example2-synthetic" || name == "example3-synthetic") {
    c.permeability = "channels";
    c.ell = 10;
    c.blocks = {1, 9};
    c.channels.contrast = 1e3;
    c.channels.background = 1.0;
    if (name == "example2-synthetic") {
      c.source = "example1";
      c.tau = 2e-4;
      c.channels.seed = 2;
      c.channels.count = 16;
    } else {
      c.source = "example3";
      c.tau = 2.5e-4;
      c.channels.seed = 3;
      c.channels.count = 10;
      c.channels.width = 1;
      c.channels.min_length = 0.5;
    }
    return c;
  }
  throw ConfigError("unknown builtin configuration '" + name + "'");
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

inline void apply_key(ExperimentConfig& c, const std::string& key, const std::string& v) {
  auto positive_int = [&](long x) {
    if (x < 1) throw ConfigError(key + ": must be >= 1");
    return static_cast<int>(x);
  };
  if (key == "name") c.name = v;
  else if (key == "coarse_nx") c.coarse_nx = positive_int(parse_int(key, v));
  else if (key == "coarse_ny") c.coarse_ny = positive_int(parse_int(key, v));
  else if (key == "refinement") c.refinement = positive_int(parse_int(key, v));
  else if (key == "permeability") {
    if (v != "example1" && v != "constant" && v != "channels" && v != "raster")
      throw ConfigError("permeability: unknown kind '" + v + "'");
    c.permeability = v;
  } else if (key == "permeability_value") c.permeability_value = parse_real(key, v);
  else if (key == "permeability_file") c.permeability_file = v;
  else if (key == "channel_seed") c.channels.seed = static_cast<std::uint64_t>(parse_int(key, v));
  else if (key == "channel_count") c.channels.count = static_cast<int>(parse_int(key, v));
  else if (key == "channel_width") c.channels.width = positive_int(parse_int(key, v));
  else if (key == "channel_contrast") c.channels.contrast = parse_real(key, v);
  else if (key == "channel_background") c.channels.background = parse_real(key, v);
  else if (key == "channel_min_length") c.channels.min_length = parse_real(key, v);
  else if (key == "channel_max_length") c.channels.max_length = parse_real(key, v);
  else if (key == "source") {
    if (v != "example1" && v != "example3" && v != "sine" && v != "constant" && v != "zero")
      throw ConfigError("source: unknown kind '" + v + "'");
    c.source = v;
  } else if (key == "source_value") c.source_value = parse_real(key, v);
  else if (key == "initial") {
    if (v != "sine" && v != "zero") throw ConfigError("initial: unknown kind '" + v + "'");
    c.initial = v;
  } else if (key == "ell") c.ell = positive_int(parse_int(key, v));
  else if (key == "blocks") c.blocks = parse_blocks(key, v);
  else if (key == "mu") c.mu = parse_real(key, v);
  else if (key == "sigma") c.sigma = parse_real(key, v);
  else if (key == "tau") c.tau = parse_real(key, v);
  else if (key == "T") c.T = parse_real(key, v);
  else if (key == "variant") c.variant = parse_variant(v);
  else if (key == "orthonormalize") c.orthonormalize = parse_bool(key, v);
  else if (key == "threads") c.threads = static_cast<unsigned>(positive_int(parse_int(key, v)));
  else if (key == "csv") c.csv = v;
  else if (key == "history") c.history = v;
  else if (key == "field_dump") c.field_dump = v;
  else if (key == "reference_dump") c.reference_dump = v;
  else if (key == "basis_file") c.basis_file = v;
  else if (key == "sweep_tau") {
    c.sweep_tau.clear();
    for (const auto& t : split_list(v, ',')) c.sweep_tau.push_back(parse_real(key, t));
  } else if (key == "sweep_params") {
    c.sweep_params.clear();
    for (const auto& t : split_list(v, ',')) {
      const auto ms = split_list(t, ':');
      if (ms.size() != 2) throw ConfigError("sweep_params: expected mu:sigma pairs, got '" + t + "'");
      c.sweep_params.emplace_back(parse_real(key, ms[0]), parse_real(key, ms[1]));
    }
  } else if (key == "sweep_blocks") {
    c.sweep_blocks.clear();
    for (const auto& t : split_list(v, ',')) c.sweep_blocks.push_back(parse_blocks(key, t));
  } else if (key == "reference_tau") c.reference_tau = parse_real(key, v);
  else if (key == "fine_reference") c.fine_reference = parse_bool(key, v);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

}  // namespace detail

/// Checks cross-field invariants (block sum, tau divides T, files present).
inline void validate(const ExperimentConfig& c) {
  int sum = 0;
  for (int b : c.blocks) {
    if (b < 1) throw ConfigError("blocks: sizes must be positive");
    sum += b;
  }
  if (sum != c.ell)
    throw ConfigError("blocks " + blocks_label(c.blocks) + " sum to " + std::to_string(sum) + " but ell = " +
                      std::to_string(c.ell));
  for (const auto& bl : c.sweep_blocks) {
    int s = 0;
    for (int b : bl) s += b < 1 ? c.ell + 1 : b;
    if (s != c.ell) throw ConfigError("sweep_blocks: " + blocks_label(bl) + " does not sum to ell");
  }
  c.split().validate();
  for (double t : c.sweep_tau) {
    SplitConfig s = c.split();
    s.tau = t;
    s.validate();
  }
  for (auto [m, s] : c.sweep_params)
    if (!(m > 0.0) || !(s > 0.0)) throw ConfigError("sweep_params: mu and sigma must be positive");
  if (c.reference_tau != 0.0) {
    SplitConfig s = c.split();
    s.tau = c.reference_tau;
    s.validate();
  }
  if (c.permeability == "raster") {
    if (c.permeability_file.empty()) throw ConfigError("permeability = raster requires permeability_file");
    std::ifstream f(c.permeability_file);
    if (!f) throw ConfigError("permeability_file '" + c.permeability_file + "' cannot be opened");
  }
  if (c.permeability == "constant" && !(c.permeability_value > 0.0))
    throw ConfigError("permeability_value must be positive");
  if (c.permeability == "channels") {
    const auto& ch = c.channels;
    if (ch.count < 0 || !(ch.contrast > 0.0) || !(ch.background > 0.0) || !(ch.min_length > 0.0) ||
        ch.max_length < ch.min_length || ch.max_length > 1.0)
      throw ConfigError("channel parameters out of range");
  }
  if (!c.basis_file.empty()) {
    std::ifstream f(c.basis_file);
    if (!f) throw ConfigError("basis_file '" + c.basis_file + "' cannot be opened");
  }
}

/// Parses configuration text. A `base` key (a builtin name) is applied first
/// wherever it appears; every other key may appear once.
inline ExperimentConfig parse_config(std::istream& in, const std::string& origin = "config") {
  std::vector<std::pair<std::string, std::string>> entries;
  std::set<std::string> seen;
  std::string line, base;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": missing key");
    if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    if (key == "base")
      base = value;
    else
      entries.emplace_back(key, value);
  }
  ExperimentConfig c = base.empty() ? ExperimentConfig{} : builtin_config(base);
  for (const auto& [k, v] : entries) {
    try {
      detail::apply_key(c, k, v);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ": " + e.what());
    }
  }
  validate(c);
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "config") {
  std::istringstream in(text);
  return parse_config(in, origin);
}

/// A builtin name or a path to a configuration file.
inline ExperimentConfig load_config(const std::string& name_or_path) {
  std::ifstream f(name_or_path);
  if (f) return parse_config(f, name_or_path);
  if (is_builtin(name_or_path)) {
    ExperimentConfig c = builtin_config(name_or_path);
    validate(c);
    return c;
  }
  throw ConfigError("cannot open configuration '" + name_or_path + "' (and it is not a builtin name)");
}

// ---------------------------------------------------------------------------
// Synthetic channels
// ---------------------------------------------------------------------------

/// Per-fine-cell raster (rows = fine_ny, top row at y = 1) with `count`
/// channels of value `contrast` on `background`. Each channel is horizontal
/// or vertical, `width` cells thick, with random offset and length. Draws use
/// raw mt19937_64 output so the field is identical on every platform.
inline RasterField channel_field(int fine_nx, int fine_ny, const ChannelSpec& spec) {
  RasterField f;
  f.rows = static_cast<std::size_t>(fine_ny);
  f.cols = static_cast<std::size_t>(fine_nx);
  f.values.assign(f.rows * f.cols, spec.background);
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  auto below = [&](std::uint64_t n) { return n == 0 ? 0 : static_cast<int>(rng() % n); };

  for (int k = 0; k < spec.count; ++k) {
    const bool vertical = (rng() & 1u) != 0;
    const int along = vertical ? fine_ny : fine_nx;
    const int across = vertical ? fine_nx : fine_ny;
    const int w = std::min(spec.width, across);
    const int offset = below(static_cast<std::uint64_t>(across - w + 1));
    const double frac = spec.min_length + (spec.max_length - spec.min_length) * uniform();
    const int len = std::clamp(static_cast<int>(std::lround(frac * along)), 1, along);
    const int start = below(static_cast<std::uint64_t>(along - len + 1));
    for (int a = start; a < start + len; ++a)
      for (int c = offset; c < offset + w; ++c) {
        const int col = vertical ? c : a;
        const int row = vertical ? a : c;
        f.values[static_cast<std::size_t>(row) * f.cols + static_cast<std::size_t>(col)] = spec.contrast;
      }
  }
  return f;
}

}  // namespace msplit
