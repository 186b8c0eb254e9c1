#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "qprobe/intervals.hpp"
#include "qprobe/model.hpp"
#include "qprobe/parallel.hpp"
#include "qprobe/types.hpp"

// Monte Carlo measurement records in the full Hilbert space. Serves as an
// independent check of the superoperator sums: nothing here touches M or J.

namespace qprobe {

enum class TrajectoryMode { bernoulli, per_realization };

/// Realizations per RNG stream. Stream b covers realizations
/// [b * kRealizationBlock, (b + 1) * kRealizationBlock) and is seeded from
/// (seed, b), so output is identical for every thread count.
inline constexpr std::int64_t kRealizationBlock = 256;

struct AttemptRecord {
  std::int64_t n = 0;  // attempt of first detection, or attempts made if censored
  double t = 0.0;      // elapsed time (sum of the n sampled intervals)
  bool censored = false;
};

struct RealizationRecord {
  double n_bar = 0.0;     // sum n F_n / sum F_n
  double p_det = 0.0;     // sum_{n <= n_cut} F_n
  double survival = 0.0;  // norm^2 left after n_cut failed attempts; bounds the truncated tail
  std::vector<double> f;  // F_1..F_{n_cut}, only when requested
};

struct TrajectoryEnsemble {
  TrajectoryMode mode = TrajectoryMode::bernoulli;
  std::int64_t n_real = 0;
  std::uint64_t seed = 0;
  int n_cut = 0;              // per_realization
  std::int64_t n_abort = 0;   // bernoulli
  std::vector<AttemptRecord> attempts;           // bernoulli
  std::vector<RealizationRecord> realizations;   // per_realization
  std::vector<double> fn_mean;    // per_realization: ensemble mean of F_n, n = 1..n_cut
  std::vector<double> fn_stderr;  // standard error of fn_mean
  std::int64_t censored = 0;      // bernoulli: never detected (cap reached or dark-locked)
  std::int64_t dark_locked = 0;   // bernoulli: subset of censored stopped early, see run_bernoulli
};

/// Phase propagation in the eigenbasis of the full Hamiltonian.
class EigenPropagator {
 public:
  explicit EigenPropagator(const QuantumModel& model) {
    validate(model);
    const Eigensystem eig = diagonalize(model.hamiltonian);
    energies_ = eig.energies;
    d_amp_ = eig.vectors.adjoint() * model.psi_d;
    in_amp_ = eig.vectors.adjoint() * model.psi_in;
    const SpectralData reduced = spectral_reduce(model, eig);
    bright_ = eig.vectors.adjoint() * reduced.bright;
  }

  const CVector& initial() const { return in_amp_; }
  Index dim() const { return energies_.size(); }

  void evolve(CVector& c, double tau) const {
    for (Index i = 0; i < c.size(); ++i) {
      c(i) *= std::polar(1.0, -energies_(i) * tau);
    }
  }

  /// <psi_d|c>
  cplx overlap(const CVector& c) const { return d_amp_.dot(c); }

  /// Failed measurement: c <- (I - |psi_d><psi_d|) c, given a = <psi_d|c>.
  void project_out(CVector& c, cplx a) const { c -= d_amp_ * a; }

  /// Squared norm of the component that can still reach psi_d.
  double bright_weight(const CVector& c) const { return (bright_.adjoint() * c).squaredNorm(); }

 private:
  RVector energies_;
  CVector d_amp_;
  CVector in_amp_;
  CMatrix bright_;
};

struct BernoulliOptions {
  std::int64_t n_real = 100000;
  std::uint64_t seed = 1;
  std::int64_t n_abort = 1000000;
  double dark_lock_tol = 1e-14;  // stop once bright weight / norm^2 drops below this
};

/// Direct simulation: sample tau, propagate, detect with probability
/// |<psi_d|psi>|^2 / ||psi||^2, otherwise project and continue.
///
/// The amplitude is never renormalized (its norm^2 is the survival probability),
/// except for an overall rescale when it nears underflow. Realizations that
/// reach n_abort, or whose remaining weight is dark to within dark_lock_tol,
/// are censored.
inline TrajectoryEnsemble run_bernoulli(const QuantumModel& model, const IntervalDistribution& dist,
                                        const BernoulliOptions& opts) {
  if (opts.n_abort < 1 || opts.n_real < 1) {
    throw std::invalid_argument("run_bernoulli: n_real and n_abort must be >= 1");
  }
  const EigenPropagator prop(model);
  TrajectoryEnsemble ens;
  ens.mode = TrajectoryMode::bernoulli;
  ens.n_real = opts.n_real;
  ens.seed = opts.seed;
  ens.n_abort = opts.n_abort;
  ens.attempts.resize(static_cast<size_t>(opts.n_real));

  const std::int64_t blocks = (opts.n_real + kRealizationBlock - 1) / kRealizationBlock;
  std::vector<std::int64_t> locked(static_cast<size_t>(blocks), 0);
  parallel_for(static_cast<size_t>(blocks), [&](size_t b) {
    Rng rng(stream_seed(opts.seed, b));
    const std::int64_t first = static_cast<std::int64_t>(b) * kRealizationBlock;
    const std::int64_t last = std::min(first + kRealizationBlock, opts.n_real);
    CVector c(prop.dim());
    for (std::int64_t r = first; r < last; ++r) {
      AttemptRecord rec;
      c = prop.initial();
      for (std::int64_t n = 1;; ++n) {
        const double tau = dist.sample(rng);
        rec.t += tau;
        prop.evolve(c, tau);
        const cplx a = prop.overlap(c);
        const double norm2 = c.squaredNorm();
        const double prob = norm2 > 0.0 ? std::norm(a) / norm2 : 0.0;
        if (uniform01(rng) < prob) {
          rec.n = n;
          break;
        }
        prop.project_out(c, a);
        if (n == opts.n_abort) {
          rec.n = n;
          rec.censored = true;
          break;
        }
        const double left = c.squaredNorm();
        if (left < 1e-200) {
          c *= 1e100;
        }
        if (n % 64 == 0 && prop.bright_weight(c) <= opts.dark_lock_tol * c.squaredNorm()) {
          rec.n = n;
          rec.censored = true;
          ++locked[b];
          break;
        }
      }
      ens.attempts[static_cast<size_t>(r)] = rec;
    }
  });
  for (const auto& rec : ens.attempts) {
    ens.censored += rec.censored ? 1 : 0;
  }
  for (auto l : locked) {
    ens.dark_locked += l;
  }
  return ens;
}

/// Per-realization runs stop once the undetected norm^2 falls below this.
inline constexpr double kNegligibleWeight = 1e-32;

struct PerRealizationOptions {
  std::int64_t n_real = 100000;
  int n_cut = 200;
  std::uint64_t seed = 1;
  bool keep_series = false;
};

/// Deterministic F_n for each sampled sequence tau_1, tau_2, ...:
/// phi(n) = U(tau_n) P ... U(tau_2) P U(tau_1) psi_in, F_n = |<psi_d|phi(n)>|^2.
inline TrajectoryEnsemble run_per_realization(const QuantumModel& model,
                                              const IntervalDistribution& dist,
                                              const PerRealizationOptions& opts) {
  if (opts.n_cut < 2 || opts.n_real < 1) {
    throw std::invalid_argument("run_per_realization: n_cut must be >= 2 and n_real >= 1");
  }
  const EigenPropagator prop(model);
  const size_t n_cut = static_cast<size_t>(opts.n_cut);
  TrajectoryEnsemble ens;
  ens.mode = TrajectoryMode::per_realization;
  ens.n_real = opts.n_real;
  ens.seed = opts.seed;
  ens.n_cut = opts.n_cut;
  ens.realizations.resize(static_cast<size_t>(opts.n_real));

  const std::int64_t blocks = (opts.n_real + kRealizationBlock - 1) / kRealizationBlock;
  std::vector<std::vector<double>> block_sum(static_cast<size_t>(blocks)),
      block_sq(static_cast<size_t>(blocks));
  parallel_for(static_cast<size_t>(blocks), [&](size_t b) {
    Rng rng(stream_seed(opts.seed, b));
    auto& sum = block_sum[b];
    auto& sq = block_sq[b];
    sum.assign(n_cut, 0.0);
    sq.assign(n_cut, 0.0);
    std::vector<double> f(n_cut);
    const std::int64_t first = static_cast<std::int64_t>(b) * kRealizationBlock;
    const std::int64_t last = std::min(first + kRealizationBlock, opts.n_real);
    CVector c(prop.dim());
    for (std::int64_t r = first; r < last; ++r) {
      c = prop.initial();
      double total = 0.0;
      double weighted = 0.0;
      std::fill(f.begin(), f.end(), 0.0);
      for (size_t n = 0; n < n_cut; ++n) {
        prop.evolve(c, dist.sample(rng));
        const cplx a = prop.overlap(c);
        f[n] = std::norm(a);
        total += f[n];
        weighted += static_cast<double>(n + 1) * f[n];
        sum[n] += f[n];
        sq[n] += f[n] * f[n];
        prop.project_out(c, a);
        if (c.squaredNorm() < kNegligibleWeight) {
          break;  // every later F_n is bounded by the remaining norm
        }
      }
      auto& rec = ens.realizations[static_cast<size_t>(r)];
      rec.p_det = total;
      rec.n_bar = total > 0.0 ? weighted / total : 0.0;
      rec.survival = c.squaredNorm();
      if (opts.keep_series) {
        rec.f = f;
      }
    }
  });

  // Block partials combined in block order: deterministic for any thread count.
  std::vector<double> sum(n_cut, 0.0), sq(n_cut, 0.0), comp(n_cut, 0.0);
  for (std::int64_t b = 0; b < blocks; ++b) {
    for (size_t n = 0; n < n_cut; ++n) {
      // Kahan summation on the mean accumulator.
      const double y = block_sum[b][n] - comp[n];
      const double t = sum[n] + y;
      comp[n] = (t - sum[n]) - y;
      sum[n] = t;
      sq[n] += block_sq[b][n];
    }
  }
  const double count = static_cast<double>(opts.n_real);
  ens.fn_mean.resize(n_cut);
  ens.fn_stderr.resize(n_cut);
  for (size_t n = 0; n < n_cut; ++n) {
    const double mean = sum[n] / count;
    const double var = count > 1 ? std::max(0.0, (sq[n] - count * mean * mean) / (count - 1)) : 0.0;
    ens.fn_mean[n] = mean;
    ens.fn_stderr[n] = std::sqrt(var / count);
  }
  return ens;
}

/// Sample mean, variance and their standard errors.
struct MomentSummary {
  std::int64_t count = 0;
  double mean = 0.0;
  double variance = 0.0;        // unbiased
  double stderr_mean = 0.0;
  double stderr_variance = 0.0;  // sqrt((m4 - var^2) / count)
};

inline MomentSummary summarize(const std::vector<double>& values) {
  MomentSummary s;
  s.count = static_cast<std::int64_t>(values.size());
  if (values.empty()) {
    return s;
  }
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  s.mean = sum / n;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : values) {
    const double d = v - s.mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  s.variance = values.size() > 1 ? m2 / (n - 1.0) : 0.0;
  s.stderr_mean = std::sqrt(s.variance / n);
  const double pop_var = m2 / n;
  s.stderr_variance = std::sqrt(std::max(0.0, m4 / n - pop_var * pop_var) / n);
  return s;
}

/// Per-realization n_bar values (per_realization mode).
inline std::vector<double> nbar_values(const TrajectoryEnsemble& ens) {
  std::vector<double> out;
  out.reserve(ens.realizations.size());
  for (const auto& r : ens.realizations) {
    out.push_back(r.n_bar);
  }
  return out;
}

/// Fraction of all realizations first detected at attempt n, n = 1..n_max
/// (bernoulli mode). Estimates <F_n>; standard error sqrt(f (1 - f) / n_real).
inline std::vector<double> attempt_histogram(const TrajectoryEnsemble& ens, int n_max) {
  std::vector<double> h(static_cast<size_t>(n_max), 0.0);
  for (const auto& a : ens.attempts) {
    if (!a.censored && a.n <= n_max) {
      h[static_cast<size_t>(a.n - 1)] += 1.0;
    }
  }
  for (double& v : h) {
    v /= static_cast<double>(ens.n_real);
  }
  return h;
}

/// Histogram of per-realization n_bar over [lo, hi) with `bins` equal bins (densities).
inline std::vector<double> nbar_histogram(const TrajectoryEnsemble& ens, double lo, double hi,
                                          int bins) {
  std::vector<double> h(static_cast<size_t>(bins), 0.0);
  const double width = (hi - lo) / bins;
  for (const auto& r : ens.realizations) {
    if (r.n_bar >= lo && r.n_bar < hi) {
      const auto bin = std::min(static_cast<size_t>((r.n_bar - lo) / width), h.size() - 1);
      h[bin] += 1.0;
    }
  }
  for (double& v : h) {
    v /= static_cast<double>(ens.n_real) * width;
  }
  return h;
}

}  // namespace qprobe
