// qprobe: first-detection statistics for a quantum walker probed at random times.

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qprobe/qprobe.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace qprobe;

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitConfig = 2;

// Command-line values that override the config file. Only options actually
// given on the command line are copied over.
struct Overrides {
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    options.emplace_back(key, app->add_option(flag, values[key], help));
  }

  ConfigMap merge() const {
    ConfigMap cfg;
    if (auto it = values.find("config"); it != values.end() && !it->second.empty()) {
      cfg = load_config_file(it->second);
    }
    for (const auto& [key, opt] : options) {
      if (key != "config" && opt->count() > 0) {
        cfg[key] = values.at(key);
      }
    }
    return cfg;
  }
};

struct Command {
  explicit Command(CLI::App* sub) : app(sub) {}
  CLI::App* app;
  Overrides ov;
  bool pseudo_inverse = false;
};

void add_model_options(Command& cmd) {
  auto* app = cmd.app;
  auto& ov = cmd.ov;
  ov.add(app, "--config", "config", "key = value file; flags override its entries");
  ov.add(app, "--model", "model", "ring | dense | tls");
  ov.add(app, "--L", "L", "ring length");
  ov.add(app, "--gamma", "gamma", "hopping amplitude");
  ov.add(app, "--xin", "xin", "initial site");
  ov.add(app, "--xd", "xd", "detection site");
  ov.add(app, "--hamiltonian", "hamiltonian", "dense H: 2N^2 reals, row-major, re/im interleaved");
  ov.add(app, "--psi-in", "psi_in", "dense initial state: 2N reals");
  ov.add(app, "--psi-d", "psi_d", "dense detection state: 2N reals");
  ov.add(app, "--dist", "dist", "fixed | exp | gamma");
  ov.add(app, "--tau", "tau", "fixed interval");
  ov.add(app, "--mean", "mean", "mean interval");
  ov.add(app, "--alpha", "alpha", "gamma shape");
  ov.add(app, "--degeneracy-tol", "degeneracy_tol", "energy clustering tolerance");
}

void add_solver_options(Command& cmd) {
  cmd.app->add_flag("--pseudo-inverse", cmd.pseudo_inverse,
                    "use the group inverse when I - M is singular or ill-conditioned");
  cmd.ov.add(cmd.app, "--inverse", "inverse", "lu | group | moore-penrose (overrides --pseudo-inverse)");
  cmd.ov.add(cmd.app, "--max-condition", "max_condition", "condition limit for the regular solve");
}

void add_output_options(Command& cmd, bool with_format) {
  cmd.ov.add(cmd.app, "--out", "out", "output file (default stdout)");
  if (with_format) {
    cmd.ov.add(cmd.app, "--format", "format", "csv | json");
  }
}

SolveOptions solve_options(const ConfigMap& cfg, bool pseudo_inverse) {
  SolveOptions opts;
  std::string mode = get_string(cfg, "inverse", pseudo_inverse ? "group" : "lu");
  if (get_string(cfg, "pseudo_inverse", "false") == "true" && !has(cfg, "inverse")) {
    mode = "group";
  }
  if (mode == "lu") {
    opts.mode = InverseMode::lu;
  } else if (mode == "group") {
    opts.mode = InverseMode::group;
  } else if (mode == "moore-penrose" || mode == "moore_penrose") {
    opts.mode = InverseMode::moore_penrose;
  } else {
    throw ConfigError("unknown inverse '" + mode + "' (expected lu, group or moore-penrose)");
  }
  opts.max_condition = get_double(cfg, "max_condition", opts.max_condition);
  return opts;
}

const char* to_string(InverseMode mode) {
  switch (mode) {
    case InverseMode::lu: return "lu";
    case InverseMode::group: return "group";
    case InverseMode::moore_penrose: return "moore-penrose";
  }
  return "?";
}

json echo(const ConfigMap& cfg) {
  json j = json::object();
  for (const auto& [k, v] : cfg) {
    j[k] = v;
  }
  return j;
}

std::string output_format(const ConfigMap& cfg, const std::string& fallback) {
  const std::string f = get_string(cfg, "format", fallback);
  if (f != "csv" && f != "json") {
    throw ConfigError("unknown format '" + f + "' (expected csv or json)");
  }
  return f;
}

// Writes to --out when given, stdout otherwise.
class Sink {
 public:
  Sink(const ConfigMap& cfg, const std::string& key = "out") {
    const std::string path = get_string(cfg, key, "");
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) {
        throw ConfigError("cannot open output file '" + path + "'");
      }
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

SpectralData reduce(const ConfigMap& cfg) {
  return spectral_reduce(model_from_config(cfg), get_double(cfg, "degeneracy_tol", kDefaultDegeneracyTol));
}

int cmd_stats(const Command& cmd) {
  const ConfigMap cfg = cmd.ov.merge();
  const std::string format = output_format(cfg, "json");
  const QuantumModel model = model_from_config(cfg);
  const IntervalDistribution dist = dist_from_config(cfg);
  const SolveOptions opts = solve_options(cfg, cmd.pseudo_inverse);
  const SpectralData reduced =
      spectral_reduce(model, get_double(cfg, "degeneracy_tol", kDefaultDegeneracyTol));
  const SuperoperatorSet s = build_superops(reduced, dist);
  const DetectionStatistics st = detection_stats(s, opts);
  const IdentityReport id = universal_identity_check(st, s);

  Sink sink(cfg);
  if (format == "csv") {
    write_csv_row(sink.stream(), {"p_det", "n_mean", "n_sq", "t_mean", "t_sq", "n_var", "t_var",
                                  "reduced_dim", "j_condition", "inverse"});
    write_csv_row(sink.stream(),
                  {format_real(st.p_det), format_real(st.n_mean), format_real(st.n_sq),
                   format_real(st.t_mean), format_real(st.t_sq), format_real(st.n_var),
                   format_real(st.t_var), std::to_string(st.reduced_dim),
                   format_real(st.j_condition), to_string(st.inverse)});
    return kExitOk;
  }
  const ZeroModeCensus z = zero_mode_census(s);
  json out;
  out["config"] = echo(cfg);
  out["model"] = model.label;
  out["distribution"] = dist.describe();
  out["full_dim"] = reduced.full_dim;
  out["reduced_dim"] = reduced.reduced_dim;
  out["p_det"] = st.p_det;
  out["n_mean"] = st.n_mean;
  out["n_sq"] = st.n_sq;
  out["t_mean"] = st.t_mean;
  out["t_sq"] = st.t_sq;
  out["n_var"] = st.n_var;
  out["t_var"] = st.t_var;
  out["j_condition"] = st.j_condition;
  out["inverse"] = to_string(st.inverse);
  out["zero_modes"] = {{"zero", z.n_zero},
                       {"nonzero", z.n_nonzero},
                       {"lambda_max", std::abs(z.slowest_decay)},
                       {"lambda_max_re", z.slowest_decay.real()},
                       {"lambda_max_im", z.slowest_decay.imag()}};
  json ident = {{"time_residual", id.time_residual}, {"tolerance", id.tolerance}, {"passed", id.passed}};
  if (id.return_residual) {
    ident["return_residual"] = *id.return_residual;
  }
  out["identity"] = ident;
  sink.stream() << out.dump(2) << '\n';
  return kExitOk;
}

int cmd_fn(const Command& cmd) {
  const ConfigMap cfg = cmd.ov.merge();
  const std::string format = output_format(cfg, "csv");
  const auto n_max = get_integer(cfg, "nmax", 100);
  if (n_max < 1) {
    throw ConfigError("nmax must be >= 1");
  }
  const IntervalDistribution dist = dist_from_config(cfg);
  const auto series = fn_series(build_superops(reduce(cfg), dist), static_cast<int>(n_max));
  Sink sink(cfg);
  if (format == "csv") {
    write_csv_row(sink.stream(), {"n", "fn", "cumulative"});
    double cumulative = 0.0;
    for (size_t n = 0; n < series.size(); ++n) {
      cumulative += series[n];
      write_csv_row(sink.stream(),
                    {std::to_string(n + 1), format_real(series[n]), format_real(cumulative)});
    }
    return kExitOk;
  }
  json out;
  out["config"] = echo(cfg);
  out["distribution"] = dist.describe();
  out["fn"] = series;
  sink.stream() << out.dump(2) << '\n';
  return kExitOk;
}

int cmd_sweep(const Command& cmd) {
  const ConfigMap cfg = cmd.ov.merge();
  SweepSpec spec;
  spec.model = model_from_config(cfg);
  spec.axis = parse_sweep_axis(get_string(cfg, "axis", "mean_tau"));
  if (!has(cfg, "grid")) {
    throw ConfigError("sweep needs a grid (--grid start:stop:step or a comma list)");
  }
  spec.grid = parse_grid(cfg.at("grid"));
  spec.outputs = parse_sweep_outputs(get_string(cfg, "outputs", "n_mean"));
  const std::string family = get_string(cfg, "dist", spec.axis == SweepAxis::alpha ? "gamma" : "exp");
  if (family == "fixed") {
    spec.family = IntervalKind::fixed;
  } else if (family == "exp" || family == "exponential") {
    spec.family = IntervalKind::exponential;
  } else if (family == "gamma") {
    spec.family = IntervalKind::gamma;
  } else {
    throw ConfigError("unknown distribution '" + family + "'");
  }
  spec.alpha = get_double(cfg, "alpha", 1.0);
  spec.mean_tau = get_double(cfg, "mean", get_double(cfg, "tau", 1.0));
  spec.solve = solve_options(cfg, cmd.pseudo_inverse);
  spec.degeneracy_tol = get_double(cfg, "degeneracy_tol", kDefaultDegeneracyTol);
  validate(spec);
  const auto rows = run_sweep(spec);
  Sink sink(cfg);
  write_sweep_csv(sink.stream(), spec, rows);
  return kExitOk;
}

int cmd_mc(const Command& cmd) {
  const ConfigMap cfg = cmd.ov.merge();
  const QuantumModel model = model_from_config(cfg);
  const IntervalDistribution dist = dist_from_config(cfg);
  const std::string mode = get_string(cfg, "mode", "bernoulli");
  const auto n_real = get_integer(cfg, "nreal", 100000);
  const auto seed = static_cast<std::uint64_t>(get_integer(cfg, "seed", 1));
  if (n_real < 1) {
    throw ConfigError("nreal must be >= 1");
  }
  json summary;
  summary["config"] = echo(cfg);
  summary["model"] = model.label;
  summary["distribution"] = dist.describe();
  summary["mode"] = mode;
  summary["n_real"] = n_real;
  summary["seed"] = seed;

  Sink records(cfg);
  Sink summary_sink(cfg, "summary");
  if (mode == "bernoulli") {
    BernoulliOptions opts;
    opts.n_real = n_real;
    opts.seed = seed;
    opts.n_abort = get_integer(cfg, "nabort", opts.n_abort);
    if (opts.n_abort < 1) {
      throw ConfigError("nabort must be >= 1");
    }
    const auto ens = run_bernoulli(model, dist, opts);
    write_csv_row(records.stream(), {"realization", "n", "t", "censored"});
    std::vector<double> n_vals, t_vals;
    for (size_t r = 0; r < ens.attempts.size(); ++r) {
      const auto& a = ens.attempts[r];
      write_csv_row(records.stream(), {std::to_string(r), std::to_string(a.n), format_real(a.t),
                                       a.censored ? "1" : "0"});
      if (!a.censored) {
        n_vals.push_back(static_cast<double>(a.n));
        t_vals.push_back(a.t);
      }
    }
    const auto n_sum = summarize(n_vals);
    const auto t_sum = summarize(t_vals);
    summary["n_abort"] = opts.n_abort;
    summary["censored"] = ens.censored;
    summary["dark_locked"] = ens.dark_locked;
    summary["p_det"] = 1.0 - static_cast<double>(ens.censored) / static_cast<double>(n_real);
    summary["n_mean"] = n_sum.mean;
    summary["n_mean_stderr"] = n_sum.stderr_mean;
    summary["n_var"] = n_sum.variance;
    summary["t_mean"] = t_sum.mean;
    summary["t_mean_stderr"] = t_sum.stderr_mean;
    summary["t_var"] = t_sum.variance;
  } else if (mode == "per_realization") {
    PerRealizationOptions opts;
    opts.n_real = n_real;
    opts.seed = seed;
    opts.n_cut = static_cast<int>(get_integer(cfg, "ncut", opts.n_cut));
    if (opts.n_cut < 2) {
      throw ConfigError("ncut must be >= 2");
    }
    const auto ens = run_per_realization(model, dist, opts);
    write_csv_row(records.stream(), {"realization", "n_bar", "p_det", "survival"});
    double max_survival = 0.0;
    for (size_t r = 0; r < ens.realizations.size(); ++r) {
      const auto& rec = ens.realizations[r];
      write_csv_row(records.stream(), {std::to_string(r), format_real(rec.n_bar),
                                       format_real(rec.p_det), format_real(rec.survival)});
      max_survival = std::max(max_survival, rec.survival);
    }
    const auto s = summarize(nbar_values(ens));
    summary["n_cut"] = opts.n_cut;
    summary["n_bar_mean"] = s.mean;
    summary["n_bar_mean_stderr"] = s.stderr_mean;
    summary["n_bar_var"] = s.variance;
    summary["n_bar_var_stderr"] = s.stderr_variance;
    summary["max_survival"] = max_survival;
    summary["fn_mean"] = ens.fn_mean;
    summary["fn_stderr"] = ens.fn_stderr;
    const auto bins = get_integer(cfg, "bins", 0);
    if (bins > 0) {
      const double lo = get_double(cfg, "hist_lo", 1.0);
      const double hi = get_double(cfg, "hist_hi", 6.0);
      if (!(hi > lo)) {
        throw ConfigError("hist_hi must exceed hist_lo");
      }
      summary["histogram"] = {{"lo", lo},
                              {"hi", hi},
                              {"density", nbar_histogram(ens, lo, hi, static_cast<int>(bins))}};
    }
  } else {
    throw ConfigError("unknown mc mode '" + mode + "' (expected bernoulli or per_realization)");
  }
  summary_sink.stream() << summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_verify(const std::string& level) {
  VerifyLevel lv;
  if (level == "quick") {
    lv = VerifyLevel::quick;
  } else if (level == "full") {
    lv = VerifyLevel::full;
  } else {
    throw ConfigError("verify level must be quick or full");
  }
  const VerifyReport rep = run_verify(lv, &std::cout);
  std::cout << (rep.passed() ? "verify: all checks passed" : "verify: FAILED") << '\n';
  return rep.passed() ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"First-detection statistics of a quantum walker under random-time projective probing"};
  app.require_subcommand(1);

  Command stats{app.add_subcommand("stats", "detection probability and moments (JSON)")};
  add_model_options(stats);
  add_solver_options(stats);
  add_output_options(stats, true);

  Command fn{app.add_subcommand("fn", "averaged first-detection probabilities <F_n>")};
  add_model_options(fn);
  add_output_options(fn, true);
  fn.ov.add(fn.app, "--nmax", "nmax", "number of attempts (default 100)");

  Command sweep{app.add_subcommand("sweep", "moments over a grid of mean interval or gamma shape (CSV)")};
  add_model_options(sweep);
  add_solver_options(sweep);
  add_output_options(sweep, false);
  sweep.ov.add(sweep.app, "--axis", "axis", "mean_tau | alpha");
  sweep.ov.add(sweep.app, "--grid", "grid", "start:stop:step or comma list");
  sweep.ov.add(sweep.app, "--outputs", "outputs", "comma list of p_det,n_mean,n_sq,t_mean,t_sq,lambda_max");

  Command mc{app.add_subcommand("mc", "Monte Carlo measurement records (CSV) and summary (JSON)")};
  add_model_options(mc);
  add_output_options(mc, false);
  mc.ov.add(mc.app, "--summary", "summary", "summary JSON file (default stdout)");
  mc.ov.add(mc.app, "--mode", "mode", "bernoulli | per_realization");
  mc.ov.add(mc.app, "--nreal", "nreal", "number of realizations");
  mc.ov.add(mc.app, "--seed", "seed", "RNG seed");
  mc.ov.add(mc.app, "--ncut", "ncut", "attempts per realization (per_realization)");
  mc.ov.add(mc.app, "--nabort", "nabort", "attempt cap (bernoulli)");
  mc.ov.add(mc.app, "--bins", "bins", "n_bar histogram bins (per_realization)");
  mc.ov.add(mc.app, "--hist-lo", "hist_lo", "histogram lower edge");
  mc.ov.add(mc.app, "--hist-hi", "hist_hi", "histogram upper edge");

  auto* verify = app.add_subcommand("verify", "self checks");
  std::string level = "quick";
  verify->add_option("level", level, "quick | full")->check(CLI::IsMember({"quick", "full"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (stats.app->parsed()) return cmd_stats(stats);
    if (fn.app->parsed()) return cmd_fn(fn);
    if (sweep.app->parsed()) return cmd_sweep(sweep);
    if (mc.app->parsed()) return cmd_mc(mc);
    if (verify->parsed()) return cmd_verify(level);
  } catch (const IllConditioned& e) {
    std::cerr << "error: " << e.what() << '\n';
    std::cerr << "hint: the probing interval is at or near an exceptional value; "
                 "--pseudo-inverse sums the series with the group inverse\n";
    return kExitNumerical;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidModel& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitConfig;
}
