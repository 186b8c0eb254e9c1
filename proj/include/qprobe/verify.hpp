#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qprobe/closedform.hpp"
#include "qprobe/superop.hpp"
#include "qprobe/trajectory.hpp"

// Desk-scale self checks. quick runs in seconds, full in a few minutes.

namespace qprobe {

enum class VerifyLevel { quick, full };

struct VerifyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return !checks.empty();
  }
};

namespace detail {

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

inline DetectionStatistics stats_for(const QuantumModel& model, const IntervalDistribution& d) {
  return detection_stats(build_superops(spectral_reduce(model), d));
}

// Each check body returns an empty string on success, otherwise a reason.
using CheckBody = std::function<std::string(std::ostringstream& info)>;

inline VerifyCheck run_check(const std::string& name, const CheckBody& body) {
  VerifyCheck c;
  c.name = name;
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream info;
  try {
    const std::string failure = body(info);
    c.passed = failure.empty();
    c.detail = c.passed ? info.str() : failure;
  } catch (const std::exception& e) {
    c.passed = false;
    c.detail = std::string("exception: ") + e.what();
  }
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return c;
}

inline std::string check_tls_return(std::ostringstream& info) {
  const IntervalDistribution dists[] = {IntervalDistribution::fixed(0.6),
                                        IntervalDistribution::exponential(0.6),
                                        IntervalDistribution::gamma(5.0, 0.6)};
  const QuantumModel tls = build_two_level(1.0, 0, 0);
  double worst = 0.0;
  for (const auto& d : dists) {
    const auto st = stats_for(tls, d);
    const auto cf = tls_stats(TlsProblem::return_problem, d, 1.0);
    worst = std::max({worst, std::abs(st.n_mean - 2.0), std::abs(st.p_det - 1.0),
                      rel_err(st.n_sq, cf.n_sq), rel_err(st.t_sq, cf.t_sq)});
  }
  info << "max deviation " << worst;
  return worst <= 1e-9 ? "" : "TLS return deviates by " + std::to_string(worst);
}

inline std::string check_tls_arrival(std::ostringstream& info) {
  const QuantumModel tls = build_two_level(1.0, 1, 0);
  double worst = 0.0;
  for (const auto& d : {IntervalDistribution::exponential(0.6), IntervalDistribution::gamma(3.0, 0.9),
                        IntervalDistribution::fixed(0.4)}) {
    const auto st = stats_for(tls, d);
    const auto cf = tls_stats(TlsProblem::arrival, d, 1.0);
    worst = std::max({worst, rel_err(st.n_mean, cf.n_mean), rel_err(st.n_sq, cf.n_sq),
                      rel_err(st.t_mean, cf.t_mean), rel_err(st.t_sq, cf.t_sq)});
  }
  info << "max relative deviation " << worst;
  return worst <= 1e-9 ? "" : "TLS arrival deviates by " + std::to_string(worst);
}

inline std::string check_return_quantization(std::ostringstream& info, int max_length,
                                             bool gamma25) {
  std::vector<IntervalDistribution> dists{IntervalDistribution::exponential(0.6),
                                          IntervalDistribution::gamma(5.0, 0.6),
                                          IntervalDistribution::fixed(0.7)};
  if (gamma25) {
    dists.push_back(IntervalDistribution::gamma(25.0, 0.6));
  }
  int cases = 0;
  for (int l = 2; l <= max_length; ++l) {
    for (const auto& d : dists) {
      const auto st = stats_for(build_ring(l, 1.0, 0, 0), d);
      const double want = std::floor(l / 2.0) + 1.0;
      if (std::abs(st.p_det - 1.0) > 1e-9 || std::abs(st.n_mean - want) > 1e-7) {
        std::ostringstream why;
        why << "L=" << l << " " << d.describe() << ": P=" << st.p_det << " n=" << st.n_mean
            << " expected " << want;
        return why.str();
      }
      ++cases;
    }
  }
  info << cases << " cases";
  return "";
}

inline std::string check_identities(std::ostringstream& info) {
  int cases = 0;
  for (int l = 3; l <= 8; ++l) {
    for (int xd : {0, 1, l / 2}) {
      for (const auto& d : {IntervalDistribution::exponential(0.8), IntervalDistribution::gamma(4.0, 0.5),
                            IntervalDistribution::fixed(0.7)}) {
        const auto s = build_superops(spectral_reduce(build_ring(l, 1.0, 0, xd)), d);
        const auto rep = universal_identity_check(detection_stats(s), s);
        if (!rep.passed) {
          std::ostringstream why;
          why << "L=" << l << " x_d=" << xd << " " << d.describe() << ": residual "
              << rep.time_residual;
          return why.str();
        }
        ++cases;
      }
    }
  }
  info << cases << " cases";
  return "";
}

inline std::string check_zero_modes(std::ostringstream& info) {
  int cases = 0;
  for (int l = 2; l <= 9; ++l) {
    for (int xd : {0, 1}) {
      const auto reduced = spectral_reduce(build_ring(l, 1.0, 0, xd));
      const Index nr = reduced.reduced_dim;
      for (const auto& d : {IntervalDistribution::exponential(0.6), IntervalDistribution::gamma(5.0, 1.1)}) {
        const auto z = zero_mode_census(build_superops(reduced, d));
        if (z.n_zero < 2 * nr - 1 || z.n_nonzero > (nr - 1) * (nr - 1)) {
          std::ostringstream why;
          why << "L=" << l << " N_r=" << nr << ": " << z.n_zero << " zero, " << z.n_nonzero
              << " nonzero modes";
          return why.str();
        }
        ++cases;
      }
    }
  }
  info << cases << " cases";
  return "";
}

inline std::string check_stroboscopic(std::ostringstream& info) {
  double worst = 0.0;
  for (const QuantumModel& model : {build_two_level(1.0, 1, 0), build_ring(5, 1.0, 0, 2)}) {
    const auto d = IntervalDistribution::fixed(0.6);
    const auto series = fn_series(build_superops(spectral_reduce(model), d), 50);
    PerRealizationOptions opts;
    opts.n_real = 1;
    opts.n_cut = 50;
    const auto direct = run_per_realization(model, d, opts);
    for (size_t n = 0; n < series.size(); ++n) {
      worst = std::max(worst, std::abs(series[n] - direct.fn_mean[n]));
    }
  }
  info << "max |diff| " << worst;
  return worst <= 1e-10 ? "" : "stroboscopic series differs by " + std::to_string(worst);
}

inline std::string check_ring_closed_forms(std::ostringstream& info, int max_length,
                                           const std::vector<double>& gammas) {
  double worst = 0.0;
  int cases = 0;
  for (double g : gammas) {
    for (int l = 3; l <= max_length; ++l) {
      for (int xd = 0; xd <= l / 2; ++xd) {
        for (double mu : {0.4, 0.6, 1.0, 2.0}) {
          const auto st = stats_for(build_ring(l, g, 0, xd), IntervalDistribution::exponential(mu));
          const double e1 = rel_err(st.n_mean, ring_nbar_exp(l, xd, g, mu).value);
          const double e2 = rel_err(st.n_sq, ring_nsq_exp(l, xd, g, mu).value);
          const double e3 = rel_err(st.t_sq, ring_tsq_exp(l, xd, g, mu).value);
          worst = std::max({worst, e1, e2, e3});
          if (std::max({e1, e2, e3}) > 1e-6) {
            std::ostringstream why;
            why << "L=" << l << " x_d=" << xd << " gamma=" << g << " mu=" << mu
                << ": relative errors " << e1 << ", " << e2 << ", " << e3;
            return why.str();
          }
          ++cases;
        }
      }
    }
  }
  info << cases << " cases, max relative error " << worst;
  return "";
}

inline std::string check_spot_values(std::ostringstream& info) {
  const auto a = stats_for(build_ring(24, 1.0, 12, 0), IntervalDistribution::exponential(0.6));
  const auto b = stats_for(build_ring(6, 1.0, 1, 0), IntervalDistribution::exponential(0.6));
  const auto c = stats_for(build_ring(7, 1.0, 0, 1), IntervalDistribution::exponential(1.0));
  info << "L=24 antipode n=" << a.n_mean << "; L=6 P=" << b.p_det << "; L=7 n=" << c.n_mean;
  if (rel_err(a.n_mean, 63.0) > 1e-8) return "L=24 antipode mean is not 63";
  if (std::abs(b.p_det - 0.5) > 1e-10) return "L=6 detection probability is not 1/2";
  if (rel_err(c.n_mean, 5.0) > 1e-8) return "L=7, x_d=1 mean is not 5";
  return "";
}

inline std::string check_mc_tls_mean(std::ostringstream& info, std::int64_t n_real,
                                     bool with_variance) {
  PerRealizationOptions opts;
  opts.n_real = n_real;
  opts.n_cut = 200;
  opts.seed = 2024;
  const auto d = IntervalDistribution::exponential(0.6);
  const auto ens = run_per_realization(build_two_level(1.0, 0, 0), d, opts);
  const auto sum = summarize(nbar_values(ens));
  info << "mean " << sum.mean << " +- " << sum.stderr_mean << ", var " << sum.variance << " +- "
       << sum.stderr_variance;
  if (std::abs(sum.mean - 2.0) > 4.0 * sum.stderr_mean) return "ensemble mean off by > 4 SE";
  if (with_variance) {
    const double want = *tls_stats(TlsProblem::return_problem, d, 1.0).var_nbar;
    if (std::abs(sum.variance - want) > 3.0 * sum.stderr_variance) {
      return "ensemble variance off by > 3 SE from " + std::to_string(want);
    }
  }
  return "";
}

inline std::string check_mc_fn(std::ostringstream& info, std::int64_t n_real) {
  const QuantumModel model = build_ring(6, 1.0, 0, 1);
  const auto d = IntervalDistribution::exponential(0.6);
  const auto exact = fn_series(build_superops(spectral_reduce(model), d), 30);
  BernoulliOptions opts;
  opts.n_real = n_real;
  opts.seed = 7;
  opts.n_abort = 100000;
  const auto ens = run_bernoulli(model, d, opts);
  const auto hist = attempt_histogram(ens, 30);
  double worst = 0.0;
  for (size_t n = 0; n < exact.size(); ++n) {
    const double se = std::sqrt(std::max(exact[n] * (1.0 - exact[n]), 1e-300) / n_real);
    worst = std::max(worst, std::abs(hist[n] - exact[n]) / se);
  }
  info << "max deviation " << worst << " SE, censored fraction "
       << static_cast<double>(ens.censored) / static_cast<double>(n_real);
  return worst <= 4.0 ? "" : "MC <F_n> off by " + std::to_string(worst) + " SE";
}

}  // namespace detail

/// Runs the self checks, streaming one line per check to `log` when given.
inline VerifyReport run_verify(VerifyLevel level, std::ostream* log = nullptr) {
  using namespace detail;
  const bool full = level == VerifyLevel::full;
  std::vector<std::pair<std::string, CheckBody>> plan{
      {"tls_return_mean_is_two", check_tls_return},
      {"tls_arrival_closed_form", check_tls_arrival},
      {"return_quantization",
       [&](std::ostringstream& o) { return check_return_quantization(o, full ? 16 : 10, full); }},
      {"time_identity", check_identities},
      {"zero_mode_census", check_zero_modes},
      {"stroboscopic_series", check_stroboscopic},
      {"ring_spot_values", check_spot_values},
      {"ring_closed_forms",
       [&](std::ostringstream& o) {
         return full ? check_ring_closed_forms(o, 16, {1.0, 0.7, 1.5})
                     : check_ring_closed_forms(o, 8, {1.0});
       }},
      {"mc_tls_return",
       [&](std::ostringstream& o) { return check_mc_tls_mean(o, full ? 1000000 : 20000, full); }},
  };
  if (full) {
    plan.emplace_back("mc_fn_ring6", [](std::ostringstream& o) { return check_mc_fn(o, 100000); });
  }
  VerifyReport report;
  for (const auto& [name, body] : plan) {
    report.checks.push_back(run_check(name, body));
    if (log) {
      const auto& c = report.checks.back();
      *log << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.seconds << " s): " << c.detail
           << '\n';
      log->flush();
    }
  }
  return report;
}

}  // namespace qprobe
