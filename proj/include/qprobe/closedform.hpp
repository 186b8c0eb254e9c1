#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "qprobe/intervals.hpp"
#include "qprobe/types.hpp"

// Analytic results used as oracles for the superoperator sums.
//
// Ring formulas assume exponentially distributed intervals with mean mu,
// hopping gamma, detection at x_d relative to the initial site 0. They were
// obtained by pattern fitting and checked for 3 <= L <= 16; outside that range
// the value is still computed but flagged conjectural.

namespace qprobe {

enum class RingCaseTag { odd_return, odd_arrival, even_return, even_arrival, even_antipode };

struct RingCase {
  int length = 0;
  int x_d = 0;  // mapped into [0, L/2] by the reflection x_d -> L - x_d
  RingCaseTag tag = RingCaseTag::odd_return;
};

inline RingCase classify_ring(int length, int x_d) {
  if (length < 2) {
    throw std::invalid_argument("ring length must be >= 2");
  }
  if (x_d < 0 || x_d >= length) {
    throw std::invalid_argument("x_d must lie in [0, L)");
  }
  if (2 * x_d > length) {
    x_d = length - x_d;
  }
  RingCase rc{length, x_d, RingCaseTag::odd_return};
  const bool odd = length % 2 == 1;
  if (x_d == 0) {
    rc.tag = odd ? RingCaseTag::odd_return : RingCaseTag::even_return;
  } else if (odd) {
    rc.tag = RingCaseTag::odd_arrival;
  } else {
    rc.tag = 2 * x_d == length ? RingCaseTag::even_antipode : RingCaseTag::even_arrival;
  }
  return rc;
}

inline const char* to_string(RingCaseTag tag) {
  switch (tag) {
    case RingCaseTag::odd_return: return "odd_return";
    case RingCaseTag::odd_arrival: return "odd_arrival";
    case RingCaseTag::even_return: return "even_return";
    case RingCaseTag::even_arrival: return "even_arrival";
    case RingCaseTag::even_antipode: return "even_antipode";
  }
  return "?";
}

struct ClosedFormValue {
  double value = 0.0;
  bool conjectural = false;  // L outside the verified range [3, 16]
  RingCase ring_case;
};

namespace detail {
inline bool ring_conjectural(int length) { return length < 3 || length > 16; }
}  // namespace detail

/// Conditional mean attempt number <n> on a ring, exponential intervals.
inline ClosedFormValue ring_nbar_exp(int length, int x_d, double gamma, double mean_tau) {
  const RingCase rc = classify_ring(length, x_d);
  const double l = length;
  const double x = rc.x_d;
  const double g2m2 = gamma * gamma * mean_tau * mean_tau;
  double v = 0.0;
  switch (rc.tag) {
    case RingCaseTag::odd_return:
    case RingCaseTag::even_return:
      v = std::floor(l / 2.0) + 1.0;
      break;
    case RingCaseTag::odd_arrival:
      v = x * (l - x) / (8.0 * g2m2) + (2.0 * l + 3.0) / 4.0;
      break;
    case RingCaseTag::even_arrival:
      v = x * l / (8.0 * g2m2) + (l + 3.0) / 2.0;
      break;
    case RingCaseTag::even_antipode:
      v = l * l / (32.0 * g2m2) + (l + 2.0) / 2.0;
      break;
  }
  return {v, detail::ring_conjectural(length), rc};
}

/// Conditional mean squared attempt number <n^2> on a ring, exponential intervals.
inline ClosedFormValue ring_nsq_exp(int length, int x_d, double gamma, double mean_tau) {
  const RingCase rc = classify_ring(length, x_d);
  const double l = length;
  const double x = rc.x_d;
  const double a = gamma * gamma * mean_tau * mean_tau;
  const double l2 = l * l;
  const double l3 = l2 * l;
  double v = 0.0;
  switch (rc.tag) {
    case RingCaseTag::odd_return:
      v = l * (l + 1.0) * (l - 1.0) / (48.0 * a) + (2.0 * l2 + 3.0 * l - 1.0) / 4.0;
      break;
    case RingCaseTag::odd_arrival: {
      const double y = x * (l - x);
      v = l * y * (y + 2.0) / (192.0 * a * a) + (l3 + 2.0 * y * (l + 7.0) - l) / (32.0 * a) +
          (4.0 * l2 + 10.0 * l - 3.0) / 8.0;
      break;
    }
    case RingCaseTag::even_return:
      v = l3 / (32.0 * a) + l * (l + 4.0) / 2.0;
      break;
    case RingCaseTag::even_arrival:
      v = (3.0 * x * x * l3 - 4.0 * x * (x * x - 1.0) * l2) / (384.0 * a * a) +
          (9.0 * l3 + 12.0 * x * l2 + 24.0 * x * (x + 4.0) * l - 16.0 * x * (2.0 * x * x + 1.0)) /
              (192.0 * a) +
          (l2 + 6.0 * l) / 2.0;
      break;
    case RingCaseTag::even_antipode:
      v = l3 * (l2 + 8.0) / (3072.0 * a * a) + (5.0 * l3 + 12.0 * l2 - 2.0 * l) / (96.0 * a) +
          (l2 + 4.0 * l) / 2.0;
      break;
  }
  return {v, detail::ring_conjectural(length), rc};
}

/// Conditional mean squared detection time <t^2> on a ring, exponential intervals.
///
/// Arrival branches carry gamma^4 mu^2 in the leading denominator and gamma^2
/// in the constant term (dimensionally required; validated against the
/// superoperator sums at gamma != 1). Return cases use
/// <t^2> = mu^2 <n^2> + N_r Var(tau) with Var(tau) = mu^2.
inline ClosedFormValue ring_tsq_exp(int length, int x_d, double gamma, double mean_tau) {
  const RingCase rc = classify_ring(length, x_d);
  const double l = length;
  const double x = rc.x_d;
  const double m2 = mean_tau * mean_tau;
  const double g2 = gamma * gamma;
  const double g4m2 = g2 * g2 * m2;
  const double l2 = l * l;
  const double l3 = l2 * l;
  double v = 0.0;
  switch (rc.tag) {
    case RingCaseTag::odd_return:
    case RingCaseTag::even_return: {
      const double n_r = std::floor(l / 2.0) + 1.0;
      v = m2 * ring_nsq_exp(length, 0, gamma, mean_tau).value + n_r * m2;
      break;
    }
    case RingCaseTag::odd_arrival: {
      const double y = x * (l - x);
      v = l * y * (y + 2.0) / (192.0 * g4m2) + (l3 + 2.0 * y * (l + 1.0) - l) / (32.0 * g2) +
          (4.0 * l2 + 14.0 * l + 3.0) / 8.0 * m2;
      break;
    }
    case RingCaseTag::even_arrival:
      v = (3.0 * x * x * l3 - 4.0 * x * (x * x - 1.0) * l2) / (384.0 * g4m2) +
          (9.0 * l3 + 12.0 * x * l2 + 24.0 * x * (x + 1.0) * l - 16.0 * x * (2.0 * x * x + 1.0)) /
              (192.0 * g2) +
          (l2 + 7.0 * l + 3.0) / 2.0 * m2;
      break;
    case RingCaseTag::even_antipode:
      v = l3 * (l2 + 8.0) / (3072.0 * g4m2) + (5.0 * l3 + 3.0 * l2 - 2.0 * l) / (96.0 * g2) +
          (l2 + 5.0 * l + 2.0) / 2.0 * m2;
      break;
  }
  return {v, detail::ring_conjectural(length), rc};
}

enum class TlsProblem { return_problem, arrival };

/// Single-interval averages of the two-level system with hopping gamma.
struct TlsAverages {
  double cos2 = 0.0;      // <cos^2 gamma tau>
  double cos4 = 0.0;      // <cos^4 gamma tau>
  double tau_cos2 = 0.0;  // <tau cos^2 gamma tau>
};

inline TlsAverages tls_averages(const IntervalDistribution& dist, double gamma) {
  const double c2 = dist.charfn(2.0 * gamma).real();  // <cos 2 gamma tau>
  const double c4 = dist.charfn(4.0 * gamma).real();
  TlsAverages a;
  a.cos2 = 0.5 * (1.0 + c2);
  a.cos4 = (3.0 + 4.0 * c2 + c4) / 8.0;
  a.tau_cos2 = 0.5 * (dist.mean() + dist.weighted_charfn(2.0 * gamma, 1).real());
  return a;
}

struct TlsStats {
  double p_det = 1.0;
  double n_mean = 0.0;
  double n_sq = 0.0;
  double t_mean = 0.0;
  double t_sq = 0.0;
  std::optional<double> var_nbar;  // ensemble variance of per-realization n_bar (return only)
};

/// Two-level system H = -gamma (|0><1| + |1><0|), detection at |0>, start at
/// |0> (return) or |1> (arrival).
inline TlsStats tls_stats(TlsProblem problem, const IntervalDistribution& dist, double gamma) {
  const TlsAverages av = tls_averages(dist, gamma);
  const double c = av.cos2;
  if (1.0 - c < 1e-12) {
    throw DivergentMoment(
        "two-level moments diverge: <cos^2 gamma tau> = 1 (gamma tau = k pi, exceptional or "
        "Zeno limit)");
  }
  const double mu = dist.mean();
  const double tau2 = dist.second_moment();
  TlsStats s;
  if (problem == TlsProblem::return_problem) {
    s.n_mean = 2.0;
    s.n_sq = 2.0 + 2.0 / (1.0 - c);
    s.t_mean = 2.0 * mu;
    s.t_sq = 2.0 * tau2 + 2.0 * mu * mu / (1.0 - c);
    s.var_nbar = 2.0 * (av.cos4 - c * c) / ((1.0 - av.cos4) * (1.0 - c));
  } else {
    s.n_mean = 1.0 / (1.0 - c);
    s.n_sq = (1.0 + c) / ((1.0 - c) * (1.0 - c));
    s.t_mean = mu / (1.0 - c);
    s.t_sq = tau2 / (1.0 - c) + 2.0 * mu * av.tau_cos2 / ((1.0 - c) * (1.0 - c));
  }
  return s;
}

}  // namespace qprobe
