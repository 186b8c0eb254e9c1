#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>

#include "qprobe/types.hpp"

namespace qprobe {

/// Caller-owned random engine. One per thread / per realization block.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer, used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for stream `index` of a run seeded with `seed`.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

enum class IntervalKind { fixed, exponential, gamma };

/// Waiting-time density rho(tau) between successive detection attempts.
///
/// Exponential(mean) is Gamma(alpha = 1, mean); the two share every closed form.
/// Gamma is parameterized by shape alpha and mean, i.e. rate beta = alpha / mean.
class IntervalDistribution {
 public:
  static IntervalDistribution fixed(double tau) {
    require_positive(tau, "fixed tau");
    return {IntervalKind::fixed, tau, 0.0};
  }
  static IntervalDistribution exponential(double mean) {
    require_positive(mean, "exponential mean");
    return {IntervalKind::exponential, mean, 1.0};
  }
  static IntervalDistribution gamma(double alpha, double mean) {
    require_positive(alpha, "gamma alpha");
    require_positive(mean, "gamma mean");
    return {IntervalKind::gamma, mean, alpha};
  }

  IntervalKind kind() const { return kind_; }
  bool is_continuous() const { return kind_ != IntervalKind::fixed; }

  /// Gamma shape; 1 for exponential, +inf for fixed.
  double shape() const { return kind_ == IntervalKind::fixed ? INFINITY : alpha_; }

  double mean() const { return mean_; }
  double variance() const { return kind_ == IntervalKind::fixed ? 0.0 : mean_ * mean_ / alpha_; }
  double second_moment() const { return variance() + mean_ * mean_; }

  /// <e^{i delta tau}>.
  cplx charfn(double delta) const {
    if (delta == 0.0) {
      return {1.0, 0.0};
    }
    switch (kind_) {
      case IntervalKind::fixed:
        return std::exp(cplx(0.0, delta * mean_));
      case IntervalKind::exponential:
        return 1.0 / cplx(1.0, -delta * mean_);
      case IntervalKind::gamma:
        return gamma_power(delta, -alpha_);
    }
    return {};
  }

  /// <tau^power e^{i delta tau}> for power 0, 1 or 2 (the derivatives of
  /// charfn with respect to delta, divided by i^power).
  cplx weighted_charfn(double delta, int power) const {
    if (power == 0) {
      return charfn(delta);
    }
    if (power != 1 && power != 2) {
      throw std::invalid_argument("weighted_charfn: power must be 0, 1 or 2");
    }
    switch (kind_) {
      case IntervalKind::fixed:
        return std::pow(mean_, power) * std::exp(cplx(0.0, delta * mean_));
      case IntervalKind::exponential: {
        const cplx z(1.0, -delta * mean_);
        return power == 1 ? mean_ / (z * z) : 2.0 * mean_ * mean_ / (z * z * z);
      }
      case IntervalKind::gamma:
        if (power == 1) {
          return mean_ * gamma_power(delta, -alpha_ - 1.0);
        }
        return mean_ * mean_ * (1.0 + 1.0 / alpha_) * gamma_power(delta, -alpha_ - 2.0);
    }
    return {};
  }

  double sample(Rng& rng) const {
    switch (kind_) {
      case IntervalKind::fixed:
        return mean_;
      case IntervalKind::exponential: {
        // Inverse CDF; u < 1 so the log is finite. Reject the measure-zero tau = 0.
        double tau = 0.0;
        while (tau <= 0.0) {
          tau = -mean_ * std::log1p(-uniform01(rng));
        }
        return tau;
      }
      case IntervalKind::gamma: {
        std::gamma_distribution<double> dist(alpha_, mean_ / alpha_);
        double tau = 0.0;
        while (tau <= 0.0) {
          tau = dist(rng);
        }
        return tau;
      }
    }
    return mean_;
  }

  std::string describe() const {
    switch (kind_) {
      case IntervalKind::fixed:
        return "fixed(tau=" + fmt(mean_) + ")";
      case IntervalKind::exponential:
        return "exp(mean=" + fmt(mean_) + ")";
      case IntervalKind::gamma:
        return "gamma(alpha=" + fmt(alpha_) + ", mean=" + fmt(mean_) + ")";
    }
    return {};
  }

 private:
  IntervalDistribution(IntervalKind kind, double mean, double alpha)
      : kind_(kind), mean_(mean), alpha_(alpha) {}

  static void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + " must be positive and finite");
    }
  }

  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
  }

  // (1 - i delta mean / alpha)^exponent on the principal branch. Re(base) = 1,
  // so |arg(base)| < pi/2 and the principal log is continuous in delta.
  cplx gamma_power(double delta, double exponent) const {
    const cplx base(1.0, -delta * mean_ / alpha_);
    return std::exp(exponent * std::log(base));
  }

  IntervalKind kind_;
  double mean_;
  double alpha_;
};

inline cplx charfn(const IntervalDistribution& dist, double delta) { return dist.charfn(delta); }

inline cplx weighted_charfn(const IntervalDistribution& dist, double delta, int power) {
  return dist.weighted_charfn(delta, power);
}

inline double sample(const IntervalDistribution& dist, Rng& rng) { return dist.sample(rng); }

}  // namespace qprobe
