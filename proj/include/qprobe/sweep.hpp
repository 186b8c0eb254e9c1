#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qprobe/config.hpp"
#include "qprobe/csv.hpp"
#include "qprobe/parallel.hpp"
#include "qprobe/superop.hpp"

namespace qprobe {

enum class SweepAxis { mean_tau, alpha };
enum class SweepOutput { p_det, n_mean, n_sq, t_mean, t_sq, lambda_max };

inline const char* to_string(SweepAxis axis) {
  return axis == SweepAxis::mean_tau ? "mean_tau" : "alpha";
}

inline const char* to_string(SweepOutput out) {
  switch (out) {
    case SweepOutput::p_det: return "p_det";
    case SweepOutput::n_mean: return "n_mean";
    case SweepOutput::n_sq: return "n_sq";
    case SweepOutput::t_mean: return "t_mean";
    case SweepOutput::t_sq: return "t_sq";
    case SweepOutput::lambda_max: return "lambda_max";
  }
  return "?";
}

inline SweepAxis parse_sweep_axis(const std::string& text) {
  if (text == "mean_tau" || text == "mean" || text == "tau") return SweepAxis::mean_tau;
  if (text == "alpha") return SweepAxis::alpha;
  throw ConfigError("unknown sweep axis '" + text + "' (expected mean_tau or alpha)");
}

inline std::vector<SweepOutput> parse_sweep_outputs(const std::string& text) {
  std::vector<SweepOutput> outs;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = detail::trim(tok);
    bool found = false;
    for (auto o : {SweepOutput::p_det, SweepOutput::n_mean, SweepOutput::n_sq, SweepOutput::t_mean,
                   SweepOutput::t_sq, SweepOutput::lambda_max}) {
      if (tok == to_string(o)) {
        outs.push_back(o);
        found = true;
      }
    }
    if (!found) {
      throw ConfigError("unknown sweep output '" + tok + "'");
    }
  }
  if (outs.empty()) {
    throw ConfigError("no sweep outputs requested");
  }
  return outs;
}

struct SweepSpec {
  SweepAxis axis = SweepAxis::mean_tau;
  std::vector<double> grid;
  QuantumModel model;
  IntervalKind family = IntervalKind::exponential;
  double alpha = 1.0;      // gamma shape when sweeping the mean
  double mean_tau = 1.0;   // mean when sweeping alpha
  std::vector<SweepOutput> outputs{SweepOutput::n_mean};
  SolveOptions solve;
  double degeneracy_tol = kDefaultDegeneracyTol;
};

struct SweepRow {
  double axis_value = 0.0;
  std::vector<double> values;  // NaN where the point failed
  double j_condition = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
};

inline void validate(const SweepSpec& spec) {
  if (spec.grid.empty()) {
    throw ConfigError("sweep grid is empty");
  }
  for (size_t i = 0; i < spec.grid.size(); ++i) {
    if (!(spec.grid[i] > 0.0) || (i > 0 && !(spec.grid[i] > spec.grid[i - 1]))) {
      throw ConfigError("sweep grid must be positive and strictly increasing");
    }
  }
  if (spec.axis == SweepAxis::alpha && spec.family != IntervalKind::gamma) {
    throw ConfigError("alpha sweeps need the gamma family");
  }
  if (spec.outputs.empty()) {
    throw ConfigError("no sweep outputs requested");
  }
}

inline IntervalDistribution sweep_distribution(const SweepSpec& spec, double x) {
  if (spec.axis == SweepAxis::alpha) {
    return IntervalDistribution::gamma(x, spec.mean_tau);
  }
  switch (spec.family) {
    case IntervalKind::fixed: return IntervalDistribution::fixed(x);
    case IntervalKind::exponential: return IntervalDistribution::exponential(x);
    case IntervalKind::gamma: return IntervalDistribution::gamma(spec.alpha, x);
  }
  throw ConfigError("unknown distribution family");
}

/// Evaluates every grid point independently; rows come back in grid order.
/// Points that fail (ill-conditioned J, divergent moments) keep NaN values
/// and a status string instead of aborting the sweep.
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec, unsigned threads = thread_count()) {
  validate(spec);
  const SpectralData reduced = spectral_reduce(spec.model, spec.degeneracy_tol);
  std::vector<SweepRow> rows(spec.grid.size());
  parallel_for(
      rows.size(),
      [&](size_t i) {
        SweepRow& row = rows[i];
        row.axis_value = spec.grid[i];
        row.values.assign(spec.outputs.size(), std::numeric_limits<double>::quiet_NaN());
        try {
          const SuperoperatorSet s = build_superops(reduced, sweep_distribution(spec, row.axis_value));
          bool need_stats = false;
          for (auto o : spec.outputs) {
            need_stats = need_stats || o != SweepOutput::lambda_max;
          }
          DetectionStatistics st;
          if (need_stats) {
            st = detection_stats(s, spec.solve);
            row.j_condition = st.j_condition;
          }
          for (size_t k = 0; k < spec.outputs.size(); ++k) {
            switch (spec.outputs[k]) {
              case SweepOutput::p_det: row.values[k] = st.p_det; break;
              case SweepOutput::n_mean: row.values[k] = st.n_mean; break;
              case SweepOutput::n_sq: row.values[k] = st.n_sq; break;
              case SweepOutput::t_mean: row.values[k] = st.t_mean; break;
              case SweepOutput::t_sq: row.values[k] = st.t_sq; break;
              case SweepOutput::lambda_max:
                row.values[k] = std::abs(zero_mode_census(s).slowest_decay);
                break;
            }
          }
        } catch (const IllConditioned& e) {
          row.values.assign(spec.outputs.size(), std::numeric_limits<double>::quiet_NaN());
          row.j_condition = e.condition();
          row.status = "ill_conditioned";
        } catch (const std::exception& e) {
          row.values.assign(spec.outputs.size(), std::numeric_limits<double>::quiet_NaN());
          row.status = std::string("error: ") + e.what();
        }
      },
      threads);
  return rows;
}

/// Header: axis, requested outputs, j_condition, status.
inline void write_sweep_csv(std::ostream& out, const SweepSpec& spec,
                            const std::vector<SweepRow>& rows) {
  std::vector<std::string> header{to_string(spec.axis)};
  for (auto o : spec.outputs) {
    header.emplace_back(to_string(o));
  }
  header.emplace_back("j_condition");
  header.emplace_back("status");
  write_csv_row(out, header);
  for (const auto& row : rows) {
    std::vector<std::string> fields{format_real(row.axis_value)};
    for (double v : row.values) {
      fields.push_back(format_real(v));
    }
    fields.push_back(format_real(row.j_condition));
    fields.push_back(row.status);
    write_csv_row(out, fields);
  }
}

/// Largest finite value in column k of a sweep; NaN if none.
inline double column_max(const std::vector<SweepRow>& rows, size_t k) {
  double best = std::numeric_limits<double>::quiet_NaN();
  for (const auto& row : rows) {
    const double v = row.values.at(k);
    if (std::isfinite(v) && !(v <= best)) {
      best = v;
    }
  }
  return best;
}

}  // namespace qprobe
