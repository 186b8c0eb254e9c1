#pragma once

#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qprobe/intervals.hpp"
#include "qprobe/model.hpp"
#include "qprobe/types.hpp"

// Flat key=value configuration shared by the CLI subcommands.
//
//   model = ring | dense | tls        (alias: kind)
//   L, gamma, xin, xd                 ring / tls
//   hamiltonian = 2N^2 reals          dense, row-major, real/imag interleaved
//   psi_in, psi_d = 2N reals          dense (optional; default |xin>, |xd>)
//   dist = fixed | exp | gamma, tau, mean, alpha
//   degeneracy_tol, seed, ...

namespace qprobe {

using ConfigMap = std::map<std::string, std::string>;

namespace detail {
inline std::string trim(const std::string& s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}
}  // namespace detail

/// Parses `key = value` lines; '#' starts a comment. Later keys win.
inline ConfigMap parse_config(std::istream& in) {
  ConfigMap cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = detail::trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = detail::trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    }
    cfg[key] = detail::trim(line.substr(eq + 1));
  }
  return cfg;
}

inline ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  return parse_config(in);
}

inline double parse_double(const std::string& text, const std::string& key) {
  const std::string t = detail::trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("'" + key + "': cannot parse '" + text + "' as a real number");
  }
  return v;
}

inline long long parse_integer(const std::string& text, const std::string& key) {
  const std::string t = detail::trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("'" + key + "': cannot parse '" + text + "' as an integer");
  }
  return v;
}

/// Whitespace- and/or comma-separated reals.
inline std::vector<double> parse_reals(const std::string& text, const std::string& key) {
  std::string s = text;
  for (char& ch : s) {
    if (ch == ',' || ch == ';') ch = ' ';
  }
  std::istringstream in(s);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    out.push_back(parse_double(tok, key));
  }
  return out;
}

/// Grid as "start:stop:step" (inclusive of stop within step/1e6) or a list.
/// Must be strictly increasing and positive.
inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ':')) {
      parts.push_back(part);
    }
    if (parts.size() != 3) {
      throw ConfigError("grid range must be start:stop:step");
    }
    const double start = parse_double(parts[0], "grid");
    const double stop = parse_double(parts[1], "grid");
    const double step = parse_double(parts[2], "grid");
    if (!(step > 0.0)) {
      throw ConfigError("grid step must be positive");
    }
    const auto count = static_cast<long long>(std::floor((stop - start) / step + 1e-6)) + 1;
    for (long long i = 0; i < count; ++i) {
      grid.push_back(start + static_cast<double>(i) * step);
    }
  } else {
    grid = parse_reals(text, "grid");
  }
  if (grid.empty()) {
    throw ConfigError("grid is empty");
  }
  for (size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) {
      throw ConfigError("grid values must be positive");
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      throw ConfigError("grid must be strictly increasing");
    }
  }
  return grid;
}

inline bool has(const ConfigMap& cfg, const std::string& key) { return cfg.count(key) > 0; }

inline double get_double(const ConfigMap& cfg, const std::string& key, double fallback) {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : parse_double(it->second, key);
}

inline long long get_integer(const ConfigMap& cfg, const std::string& key, long long fallback) {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : parse_integer(it->second, key);
}

inline std::string get_string(const ConfigMap& cfg, const std::string& key,
                              const std::string& fallback) {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

namespace detail {
inline CVector complex_vector(const std::vector<double>& interleaved, Index n,
                              const std::string& key) {
  if (static_cast<Index>(interleaved.size()) != 2 * n) {
    throw ConfigError("'" + key + "' needs " + std::to_string(2 * n) + " reals (re, im pairs)");
  }
  CVector v(n);
  for (Index i = 0; i < n; ++i) {
    v(i) = cplx(interleaved[static_cast<size_t>(2 * i)],
                interleaved[static_cast<size_t>(2 * i + 1)]);
  }
  return v;
}
}  // namespace detail

/// Builds the model described by `cfg`. Explicit dense states are normalized
/// here; everything else is validated by the model constructors.
inline QuantumModel model_from_config(const ConfigMap& cfg) {
  const std::string kind = get_string(cfg, "model", get_string(cfg, "kind", "ring"));
  try {
    if (kind == "ring") {
      return build_ring(static_cast<int>(get_integer(cfg, "L", 7)), get_double(cfg, "gamma", 1.0),
                        static_cast<int>(get_integer(cfg, "xin", 0)),
                        static_cast<int>(get_integer(cfg, "xd", 0)));
    }
    if (kind == "tls") {
      return build_two_level(get_double(cfg, "gamma", 1.0),
                             static_cast<int>(get_integer(cfg, "xin", 0)),
                             static_cast<int>(get_integer(cfg, "xd", 0)));
    }
    if (kind == "dense") {
      if (!has(cfg, "hamiltonian")) {
        throw ConfigError("dense model needs 'hamiltonian'");
      }
      const auto entries = parse_reals(cfg.at("hamiltonian"), "hamiltonian");
      const auto n = static_cast<Index>(std::llround(std::sqrt(entries.size() / 2.0)));
      if (n < 1 || static_cast<size_t>(2 * n * n) != entries.size()) {
        throw ConfigError("'hamiltonian' must hold 2 N^2 reals");
      }
      CMatrix h(n, n);
      for (Index r = 0; r < n; ++r) {
        for (Index c = 0; c < n; ++c) {
          const size_t k = static_cast<size_t>(2 * (r * n + c));
          h(r, c) = cplx(entries[k], entries[k + 1]);
        }
      }
      auto state = [&](const char* key, const char* site_key) {
        if (has(cfg, key)) {
          CVector v = detail::complex_vector(parse_reals(cfg.at(key), key), n, key);
          if (!(v.norm() > 0.0)) {
            throw ConfigError(std::string("'") + key + "' is the zero vector");
          }
          return CVector(v / v.norm());
        }
        return basis_state(n, static_cast<Index>(get_integer(cfg, site_key, 0)));
      };
      return make_model(std::move(h), state("psi_in", "xin"), state("psi_d", "xd"),
                        get_string(cfg, "label", "dense N=" + std::to_string(n)));
    }
  } catch (const InvalidModel& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown model kind '" + kind + "' (expected ring, dense or tls)");
}

/// fixed uses `tau` (falls back to `mean`); exp and gamma use `mean` (falls back to `tau`).
inline IntervalDistribution dist_from_config(const ConfigMap& cfg) {
  const std::string kind = get_string(cfg, "dist", "exp");
  const double tau = get_double(cfg, "tau", get_double(cfg, "mean", 0.6));
  const double mean = get_double(cfg, "mean", get_double(cfg, "tau", 0.6));
  try {
    if (kind == "fixed") return IntervalDistribution::fixed(tau);
    if (kind == "exp" || kind == "exponential") return IntervalDistribution::exponential(mean);
    if (kind == "gamma") {
      return IntervalDistribution::gamma(get_double(cfg, "alpha", 1.0), mean);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown distribution '" + kind + "' (expected fixed, exp or gamma)");
}

}  // namespace qprobe
