#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <unsupported/Eigen/KroneckerProduct>

#include "qprobe/intervals.hpp"
#include "qprobe/model.hpp"
#include "qprobe/types.hpp"

namespace qprobe {

/// The N_r^2 x N_r^2 matrices of the averaged detection series.
///
/// Compound indices follow the Kronecker convention: row (j,k) is j * N_r + k
/// and (A (x) B)_{(jk)(lm)} = A_{jl} B_{km}. Diagonal superoperators are stored
/// as vectors of their diagonals.
struct SuperoperatorSet {
  Index dim = 0;        // N_r
  RVector energies;     // reduced energies, kept for diagnostics
  IntervalDistribution dist = IntervalDistribution::exponential(1.0);
  bool is_return = false;

  CVector davg;     // <D^>,        entry (jk) = <e^{i(E_j - E_k) tau}>
  CVector davg_t;   // <tau D^>
  CVector davg_tt;  // <tau^2 D^>
  RMatrix c;        // C = I - Pi E
  RMatrix chat;     // C^ = C* (x) C = C (x) C
  CVector theta_vec;  // diagonal of Theta^, d_(jk) = conj(theta_j) theta_k; Theta^ B^ = d 1^T
  CMatrix m;        // <D^> C^
  CMatrix j;        // I - M

  Index index(Index row, Index col) const { return row * dim + col; }

  /// C^ x without forming the Kronecker product: reshape x to N_r x N_r, C X C^T.
  CVector apply_chat(const CVector& x) const {
    // Column-major map of a row-major compound vector is X^T; (C X C^T)^T = C X^T C^T.
    Eigen::Map<const CMatrix> xt(x.data(), dim, dim);
    CMatrix yt = c * xt * c.transpose();
    return Eigen::Map<const CVector>(yt.data(), dim * dim);
  }

  CVector apply_m(const CVector& x) const { return davg.cwiseProduct(apply_chat(x)); }
};

/// Assemble every superoperator for reduced spectral data and a waiting-time law.
inline SuperoperatorSet build_superops(const SpectralData& spec, const IntervalDistribution& dist) {
  const Index n = spec.reduced_dim;
  SuperoperatorSet s;
  s.dim = n;
  s.energies = spec.energies;
  s.dist = dist;
  s.is_return = spec.is_return;

  s.davg.resize(n * n);
  s.davg_t.resize(n * n);
  s.davg_tt.resize(n * n);
  s.theta_vec.resize(n * n);
  for (Index a = 0; a < n; ++a) {
    for (Index b = 0; b < n; ++b) {
      const Index k = s.index(a, b);
      const double delta = a == b ? 0.0 : spec.energies(a) - spec.energies(b);
      s.davg(k) = dist.charfn(delta);
      s.davg_t(k) = dist.weighted_charfn(delta, 1);
      s.davg_tt(k) = dist.weighted_charfn(delta, 2);
      s.theta_vec(k) = std::conj(spec.theta(a)) * spec.theta(b);
    }
  }

  s.c = RMatrix::Identity(n, n) - spec.p * RVector::Ones(n).transpose();
  s.chat = Eigen::kroneckerProduct(s.c, s.c).eval();
  s.m = s.davg.asDiagonal() * s.chat.cast<cplx>();
  s.j = CMatrix::Identity(n * n, n * n) - s.m;
  return s;
}

/// <F_n> for n = 1..n_max as complex numbers (imaginary parts are roundoff).
inline std::vector<cplx> fn_series_complex(const SuperoperatorSet& s, int n_max) {
  if (n_max <= 0) {
    throw std::invalid_argument("fn_series: n_max must be >= 1");
  }
  std::vector<cplx> out;
  out.reserve(static_cast<size_t>(n_max));
  CVector v = s.davg.cwiseProduct(s.theta_vec);
  for (int n = 1; n <= n_max; ++n) {
    out.push_back(v.sum());
    if (n < n_max) {
      v = s.apply_m(v);
    }
  }
  return out;
}

/// Averaged first-detection probabilities <F_1> ... <F_{n_max}>: 1^T M^{n-1} <D^> d.
/// Values are not clamped; tiny negative roundoff survives here on purpose.
inline std::vector<double> fn_series(const SuperoperatorSet& s, int n_max) {
  std::vector<double> out;
  for (const cplx& f : fn_series_complex(s, n_max)) {
    out.push_back(f.real());
  }
  return out;
}

enum class InverseMode {
  lu,             // regular solve, errors out when I - M is ill-conditioned
  group,          // group (Drazin index-1) inverse: the limit of the geometric series
  moore_penrose,  // truncated-SVD pseudo-inverse, kept for comparison only
};

struct SolveOptions {
  InverseMode mode = InverseMode::lu;
  double max_condition = 1e12;
  double truncation = 1e-10;  // singular values below truncation * sigma_max are dropped
};

/// Solves J x = b for a fixed J with the selected inverse.
class Resolvent {
 public:
  Resolvent(const CMatrix& j, const SolveOptions& opts) : j_(j), mode_(opts.mode) {
    if (mode_ == InverseMode::lu) {
      lu_.compute(j);
      const double rc = lu_.rcond();
      condition_ = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
      return;
    }
    Eigen::BDCSVD<CMatrix> svd(j, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const RVector& sigma = svd.singularValues();
    const double cutoff = opts.truncation * sigma(0);
    Index rank = 0;
    while (rank < sigma.size() && sigma(rank) > cutoff) {
      ++rank;
    }
    dropped_ = sigma.size() - rank;
    condition_ = rank > 0 ? sigma(0) / sigma(rank - 1) : std::numeric_limits<double>::infinity();
    if (mode_ == InverseMode::moore_penrose) {
      RVector inv = RVector::Zero(sigma.size());
      inv.head(rank) = sigma.head(rank).cwiseInverse();
      generalized_ = svd.matrixV() * inv.cast<cplx>().asDiagonal() * svd.matrixU().adjoint();
      return;
    }
    // Group inverse J# = (J + P0)^{-1} - P0, with P0 the projector onto
    // null(J) along range(J). Requires index 1: left and right null spaces
    // must pair non-singularly.
    const Index n = j.rows();
    if (dropped_ == 0) {
      generalized_ = j.partialPivLu().inverse();
      return;
    }
    const CMatrix right_null = svd.matrixV().rightCols(dropped_);
    const CMatrix left_null = svd.matrixU().rightCols(dropped_);
    const CMatrix pairing = left_null.adjoint() * right_null;
    Eigen::FullPivLU<CMatrix> pairing_lu(pairing);
    if (!pairing_lu.isInvertible()) {
      throw IllConditioned("I - M has a nilpotent null block; group inverse does not exist",
                           condition_, {});
    }
    const CMatrix p0 = right_null * pairing_lu.solve(left_null.adjoint());
    generalized_ = (j + p0).partialPivLu().solve(CMatrix::Identity(n, n)) - p0;
  }

  CVector solve(const CVector& b) const {
    if (mode_ != InverseMode::lu) {
      return generalized_ * b;
    }
    CVector x = lu_.solve(b);
    const CVector r = b - j_ * x;
    x += lu_.solve(r);
    return x;
  }

  double condition() const { return condition_; }
  Index dropped() const { return dropped_; }
  InverseMode mode() const { return mode_; }

 private:
  const CMatrix& j_;
  InverseMode mode_;
  Eigen::PartialPivLU<CMatrix> lu_;
  CMatrix generalized_;
  double condition_ = 0.0;
  Index dropped_ = 0;
};

/// Moments of the first-detection attempt number and time, conditioned on detection.
struct DetectionStatistics {
  double p_det = 0.0;
  double n_mean = 0.0;
  double n_sq = 0.0;
  double t_mean = 0.0;
  double t_sq = 0.0;
  double n_var = 0.0;
  double t_var = 0.0;
  double j_condition = 0.0;
  Index reduced_dim = 0;
  InverseMode inverse = InverseMode::lu;
  double imag_residue = 0.0;  // largest |Im| among the raw traces
};

/// Energy pairs ordered by how close their phase factor is to one.
inline std::vector<EnergyPair> resonant_pairs(const SuperoperatorSet& s, double within = 1e-3) {
  std::vector<EnergyPair> pairs;
  for (Index a = 0; a < s.dim; ++a) {
    for (Index b = a + 1; b < s.dim; ++b) {
      const cplx phi = s.dist.charfn(s.energies(a) - s.energies(b));
      pairs.push_back({a, b, s.energies(a), s.energies(b), phi, std::abs(1.0 - phi)});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const EnergyPair& x, const EnergyPair& y) {
    return x.distance_from_one < y.distance_from_one;
  });
  auto cut = std::find_if(pairs.begin(), pairs.end(),
                          [&](const EnergyPair& e) { return e.distance_from_one > within; });
  if (cut == pairs.begin() && cut != pairs.end()) {
    ++cut;  // always report the closest pair
  }
  pairs.erase(cut, pairs.end());
  return pairs;
}

/// Below this P_det is roundoff: the initial state has no bright component.
inline constexpr double kMinDetectionProbability = 1e-13;

/// P_det, <n>, <n^2>, <t>, <t^2> from the summed geometric series.
///
/// All traces use the rank-one structure Theta^ B^ = d 1^T, so each moment is
/// 1^T J^{-k} x for some vector x and only linear solves against one
/// factorization of J are needed. Moments other than P_det are conditioned
/// on detection (divided by P_det).
inline DetectionStatistics detection_stats(const SuperoperatorSet& s,
                                           const SolveOptions& opts = {}) {
  Resolvent r(s.j, opts);
  if (opts.mode == InverseMode::lu &&
      !(r.condition() <= opts.max_condition)) {
    auto pairs = resonant_pairs(s);
    std::ostringstream msg;
    msg << "I - M is ill-conditioned (condition estimate " << r.condition() << " > "
        << opts.max_condition << ") for " << s.dist.describe()
        << "; nearest exceptional energy pairs:";
    for (const auto& pr : pairs) {
      msg << " (" << pr.i << "," << pr.j << "; E=" << pr.e_i << "," << pr.e_j
          << "; |1-charfn|=" << pr.distance_from_one << ")";
    }
    throw IllConditioned(msg.str(), r.condition(), std::move(pairs));
  }

  const CVector v = s.davg.cwiseProduct(s.theta_vec);
  const CVector s_f = r.solve(v);
  const CVector x2 = r.solve(s_f);
  const CVector x3 = r.solve(r.solve(r.solve(v + s.apply_m(v))));
  const CVector s_n =
      r.solve(s.davg_t.cwiseProduct(s.apply_chat(s_f)) + s.davg_t.cwiseProduct(s.theta_vec));
  const CVector t2_rhs = s.davg_tt.cwiseProduct(s.apply_chat(s_f)) +
                         2.0 * s.davg_t.cwiseProduct(s.apply_chat(s_n)) +
                         s.davg_tt.cwiseProduct(s.theta_vec);
  const CVector x_tt = r.solve(t2_rhs);

  const cplx traces[] = {s_f.sum(), x2.sum(), x3.sum(), s_n.sum(), x_tt.sum()};
  DetectionStatistics st;
  for (const cplx& t : traces) {
    st.imag_residue = std::max(st.imag_residue, std::abs(t.imag()));
  }
  st.p_det = traces[0].real();
  if (!(st.p_det > kMinDetectionProbability)) {
    throw DegenerateProblem("psi_in has no bright component; detection probability is zero");
  }
  st.n_mean = traces[1].real() / st.p_det;
  st.n_sq = traces[2].real() / st.p_det;
  st.t_mean = traces[3].real() / st.p_det;
  st.t_sq = traces[4].real() / st.p_det;
  st.n_var = st.n_sq - st.n_mean * st.n_mean;
  st.t_var = st.t_sq - st.t_mean * st.t_mean;
  st.j_condition = r.condition();
  st.reduced_dim = s.dim;
  st.inverse = opts.mode;
  return st;
}

struct ZeroModeCensus {
  Index n_zero = 0;
  Index n_nonzero = 0;
  cplx slowest_decay{};  // eigenvalue of M with the largest modulus
  CVector eigenvalues;
};

/// Count eigenvalues of M below `tol` in modulus; the largest-modulus
/// eigenvalue sets the asymptotic decay of <F_n>.
inline ZeroModeCensus zero_mode_census(const SuperoperatorSet& s, double tol = 1e-8) {
  Eigen::ComplexEigenSolver<CMatrix> solver(s.m, /*computeEigenvectors=*/false);
  ZeroModeCensus z;
  z.eigenvalues = solver.eigenvalues();
  double largest = -1.0;
  for (Index i = 0; i < z.eigenvalues.size(); ++i) {
    const double mag = std::abs(z.eigenvalues(i));
    if (mag < tol) {
      ++z.n_zero;
    } else {
      ++z.n_nonzero;
    }
    if (mag > largest) {
      largest = mag;
      z.slowest_decay = z.eigenvalues(i);
    }
  }
  return z;
}

struct IdentityReport {
  double time_residual = 0.0;                  // |<t> - <tau><n>|
  std::optional<double> return_residual;       // |<t^2> - <tau>^2 <n^2> - N_r Var tau|
  double tolerance = 0.0;                      // 1e-8 * max(1, <t^2>)
  bool passed = false;
};

/// Residuals of the mean-time identity and, for return problems, the
/// second-moment identity.
inline IdentityReport universal_identity_check(const DetectionStatistics& st,
                                               const SuperoperatorSet& s) {
  IdentityReport rep;
  const double mean = s.dist.mean();
  rep.tolerance = 1e-8 * std::max(1.0, st.t_sq);
  rep.time_residual = std::abs(st.t_mean - mean * st.n_mean);
  rep.passed = rep.time_residual <= rep.tolerance;
  if (s.is_return) {
    rep.return_residual = std::abs(st.t_sq - mean * mean * st.n_sq -
                                   static_cast<double>(st.reduced_dim) * s.dist.variance());
    rep.passed = rep.passed && *rep.return_residual <= rep.tolerance;
  }
  return rep;
}

}  // namespace qprobe
