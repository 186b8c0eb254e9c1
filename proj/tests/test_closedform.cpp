#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "qprobe/closedform.hpp"
#include "qprobe/superop.hpp"

using namespace qprobe;

namespace {

DetectionStatistics ring_stats(int l, int x_d, double gamma, double mu) {
  return detection_stats(
      build_superops(spectral_reduce(build_ring(l, gamma, 0, x_d)), IntervalDistribution::exponential(mu)));
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace

TEST(ClosedForm, ClassifiesRingCases) {
  EXPECT_EQ(classify_ring(7, 0).tag, RingCaseTag::odd_return);
  EXPECT_EQ(classify_ring(7, 3).tag, RingCaseTag::odd_arrival);
  EXPECT_EQ(classify_ring(8, 0).tag, RingCaseTag::even_return);
  EXPECT_EQ(classify_ring(8, 3).tag, RingCaseTag::even_arrival);
  EXPECT_EQ(classify_ring(8, 4).tag, RingCaseTag::even_antipode);
  // Reflection x_d -> L - x_d.
  EXPECT_EQ(classify_ring(8, 6).x_d, 2);
  EXPECT_EQ(classify_ring(8, 6).tag, RingCaseTag::even_arrival);
  EXPECT_EQ(classify_ring(7, 5).x_d, 2);
  EXPECT_THROW(classify_ring(7, 7), std::invalid_argument);
  EXPECT_STREQ(to_string(RingCaseTag::even_antipode), "even_antipode");
}

TEST(ClosedForm, ReflectionGivesIdenticalValues) {
  for (int l = 3; l <= 12; ++l) {
    for (int x = 1; x < l; ++x) {
      EXPECT_EQ(ring_nbar_exp(l, x, 1.0, 0.7).value, ring_nbar_exp(l, l - x, 1.0, 0.7).value);
      EXPECT_EQ(ring_nsq_exp(l, x, 1.0, 0.7).value, ring_nsq_exp(l, l - x, 1.0, 0.7).value);
    }
  }
}

TEST(ClosedForm, KnownValues) {
  EXPECT_NEAR(ring_nbar_exp(24, 12, 1.0, 0.6).value, 63.0, 1e-12);
  EXPECT_EQ(ring_nbar_exp(7, 0, 1.0, 0.3).value, 4.0);
  EXPECT_NEAR(ring_nbar_exp(7, 1, 1.0, 1.0).value, 5.0, 1e-14);
  for (double mu : {0.5, 1.0, 2.0}) {
    EXPECT_NEAR(ring_nsq_exp(7, 0, 1.0, mu).value, 7.0 / (mu * mu) + 29.5, 1e-12);
  }
  EXPECT_NEAR(ring_nsq_exp(4, 2, 1.0, 1.0).value, 21.75, 1e-12);
  EXPECT_NEAR(ring_tsq_exp(4, 2, 1.0, 1.0).value, 23.25, 1e-12);
  EXPECT_NEAR(ring_tsq_exp(7, 0, 1.0, 0.6).value, 0.36 * ring_nsq_exp(7, 0, 1.0, 0.6).value + 4 * 0.36,
              1e-12);
}

TEST(ClosedForm, ConjecturalOutsideVerifiedRange) {
  EXPECT_FALSE(ring_nbar_exp(16, 3, 1.0, 1.0).conjectural);
  EXPECT_FALSE(ring_nbar_exp(3, 1, 1.0, 1.0).conjectural);
  EXPECT_TRUE(ring_nbar_exp(24, 12, 1.0, 0.6).conjectural);
  EXPECT_TRUE(ring_nsq_exp(2, 1, 1.0, 0.6).conjectural);
}

TEST(ClosedForm, LargeMeanLeavesOnlyTheConstantTerm) {
  const double big = 1e7;
  EXPECT_NEAR(ring_nsq_exp(7, 0, 1.0, big).value, (2.0 * 49 + 21 - 1) / 4.0, 1e-9);
  EXPECT_NEAR(ring_nsq_exp(8, 4, 1.0, big).value, (64 + 32) / 2.0, 1e-9);
  EXPECT_NEAR(ring_nbar_exp(9, 2, 1.0, big).value, 21.0 / 4.0, 1e-9);
}

TEST(ClosedForm, SecondMomentsDominateSquaredMeans) {
  for (int l = 3; l <= 16; ++l) {
    for (int x = 0; x <= l / 2; ++x) {
      for (double mu : {0.4, 0.6, 1.0, 2.0}) {
        const double nbar = ring_nbar_exp(l, x, 1.0, mu).value;
        EXPECT_GE(ring_nsq_exp(l, x, 1.0, mu).value, nbar * nbar);
        EXPECT_GE(ring_tsq_exp(l, x, 1.0, mu).value, mu * mu * nbar * nbar);
      }
    }
  }
}

TEST(ClosedForm, RingFormulasMatchSuperopOverVerifiedRange) {
  for (int l = 3; l <= 16; ++l) {
    for (int x = 0; x <= l / 2; ++x) {
      for (double mu : {0.4, 0.6, 1.0, 2.0}) {
        const auto st = ring_stats(l, x, 1.0, mu);
        EXPECT_LT(rel(st.n_mean, ring_nbar_exp(l, x, 1.0, mu).value), 1e-6) << l << " " << x << " " << mu;
        EXPECT_LT(rel(st.n_sq, ring_nsq_exp(l, x, 1.0, mu).value), 1e-6) << l << " " << x << " " << mu;
        EXPECT_LT(rel(st.t_sq, ring_tsq_exp(l, x, 1.0, mu).value), 1e-6) << l << " " << x << " " << mu;
      }
    }
  }
}

TEST(ClosedForm, RestoredHoppingDependenceMatchesSuperop) {
  for (double g : {0.7, 1.5}) {
    for (int l = 3; l <= 12; ++l) {
      for (int x = 0; x <= l / 2; ++x) {
        for (double mu : {0.4, 1.0}) {
          const auto st = ring_stats(l, x, g, mu);
          EXPECT_LT(rel(st.n_mean, ring_nbar_exp(l, x, g, mu).value), 1e-6);
          EXPECT_LT(rel(st.n_sq, ring_nsq_exp(l, x, g, mu).value), 1e-6);
          EXPECT_LT(rel(st.t_sq, ring_tsq_exp(l, x, g, mu).value), 1e-6)
              << "gamma=" << g << " L=" << l << " x_d=" << x << " mu=" << mu;
        }
      }
    }
  }
}

TEST(ClosedForm, TwoLevelReturnVarianceOfNbar) {
  const auto s = tls_stats(TlsProblem::return_problem, IntervalDistribution::exponential(0.6), 1.0);
  EXPECT_EQ(s.n_mean, 2.0);
  ASSERT_TRUE(s.var_nbar.has_value());
  EXPECT_NEAR(*s.var_nbar, 1.713, 5e-4);
  EXPECT_NEAR(*s.var_nbar, 1.71304347826, 1e-9);
}

TEST(ClosedForm, TwoLevelArrivalMean) {
  const auto d = IntervalDistribution::exponential(0.6);
  const auto s = tls_stats(TlsProblem::arrival, d, 1.0);
  const double c = 0.5 * (1.0 + 1.0 / (1.0 + 4.0 * 0.36));
  EXPECT_NEAR(s.n_mean, 1.0 / (1.0 - c), 1e-12);
  EXPECT_NEAR(s.n_mean, 3.389, 1e-3);
  // Same physics as a two-site ring with half the hopping.
  const auto st = detection_stats(build_superops(spectral_reduce(build_ring(2, 0.5, 0, 1)), d));
  EXPECT_NEAR(st.n_mean, s.n_mean, 1e-10);
  EXPECT_NEAR(st.t_sq, s.t_sq, 1e-10);
}

TEST(ClosedForm, TwoLevelReturnTimeIdentity) {
  for (const auto& d : {IntervalDistribution::exponential(0.6), IntervalDistribution::gamma(3.0, 1.1)}) {
    const auto s = tls_stats(TlsProblem::return_problem, d, 1.0);
    EXPECT_NEAR(s.t_sq - d.mean() * d.mean() * s.n_sq, 2.0 * d.variance(), 1e-12);
  }
}

TEST(ClosedForm, TwoLevelDivergesAtExceptionalFixedTau) {
  for (int k = 1; k <= 3; ++k) {
    EXPECT_THROW(tls_stats(TlsProblem::return_problem, IntervalDistribution::fixed(k * M_PI), 1.0),
                 DivergentMoment);
  }
  // Approaching an exceptional tau the second moment blows up.
  const double near = tls_stats(TlsProblem::return_problem, IntervalDistribution::fixed(M_PI - 1e-3), 1.0).n_sq;
  const double far = tls_stats(TlsProblem::return_problem, IntervalDistribution::fixed(M_PI / 2), 1.0).n_sq;
  EXPECT_GT(near, 1e5 * far);
}

TEST(ClosedForm, StroboscopicTwoLevelMatchesSuperop) {
  for (double tau : {0.3, 0.9, 2.0, 2.9}) {
    const auto d = IntervalDistribution::fixed(tau);
    const auto st = detection_stats(build_superops(spectral_reduce(build_two_level(1.0, 0, 0)), d));
    EXPECT_NEAR(st.n_sq, tls_stats(TlsProblem::return_problem, d, 1.0).n_sq, 1e-8 * st.n_sq);
  }
}

TEST(ClosedForm, ZenoScalingOfReturnSecondMoment) {
  // Least-squares slope of log <n^2> against log mu on [1e-3, 1e-2].
  const auto tls = spectral_reduce(build_two_level(1.0, 0, 0));
  std::vector<double> xs, ys;
  for (int i = 0; i <= 20; ++i) {
    const double mu = std::pow(10.0, -3.0 + i / 20.0);
    const auto st = detection_stats(build_superops(tls, IntervalDistribution::exponential(mu)));
    xs.push_back(std::log(mu));
    ys.push_back(std::log(st.n_sq));
    // Leading behaviour 2 / (gamma^2 <tau^2>).
    EXPECT_NEAR(st.n_sq * mu * mu, 1.0, 0.01);
  }
  double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= ys.size();
  double num = 0, den = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += (xs[i] - mx) * (xs[i] - mx);
  }
  EXPECT_NEAR(num / den, -2.0, 0.05);
}

TEST(ClosedForm, OptimalMeanIntervalForArrival) {
  // <t> = A / mu + B mu on odd rings, minimized at sqrt(A / B).
  const int l = 9;
  const int x = 3;
  const double a = x * (l - x) / 8.0;
  const double b = (2.0 * l + 3.0) / 4.0;
  const double predicted = std::sqrt(a / b);
  const auto reduced = spectral_reduce(build_ring(l, 1.0, 0, x));
  double best_mu = 0.0, best_t = INFINITY;
  for (double mu = 0.2; mu <= 2.0; mu += 0.001) {
    const double t = detection_stats(build_superops(reduced, IntervalDistribution::exponential(mu))).t_mean;
    if (t < best_t) {
      best_t = t;
      best_mu = mu;
    }
  }
  EXPECT_NEAR(best_mu, predicted, 0.01 * predicted);
}
