#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qprobe/types.hpp"

namespace qprobe {

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kNormTol = 1e-12;
inline constexpr double kDefaultDegeneracyTol = 1e-9;
inline constexpr double kDefaultDarkTol = 1e-12;

/// Finite-dimensional problem statement: Hamiltonian (hbar = 1), the state
/// prepared at t = 0 and the state the detector projects on.
struct QuantumModel {
  CMatrix hamiltonian;
  CVector psi_in;
  CVector psi_d;
  std::string label;

  Index dim() const { return hamiltonian.rows(); }

  /// psi_in and psi_d coincide (to 1e-12 per component).
  bool is_return() const {
    return psi_in.size() == psi_d.size() && (psi_in - psi_d).cwiseAbs().maxCoeff() <= kNormTol;
  }
};

/// Throws InvalidModel unless H is square Hermitian and both states are unit vectors.
inline void validate(const QuantumModel& model) {
  const auto& h = model.hamiltonian;
  if (h.rows() == 0 || h.rows() != h.cols()) {
    throw InvalidModel("hamiltonian must be a non-empty square matrix");
  }
  if (model.psi_in.size() != h.rows() || model.psi_d.size() != h.rows()) {
    throw InvalidModel("state dimension does not match hamiltonian");
  }
  const double asym = (h - h.adjoint()).cwiseAbs().maxCoeff();
  if (asym > kHermitianTol) {
    throw InvalidModel("hamiltonian is not Hermitian (max |H - H^dagger| = " + std::to_string(asym) +
                       ")");
  }
  if (std::abs(model.psi_in.norm() - 1.0) > kNormTol) {
    throw InvalidModel("psi_in is not normalized");
  }
  if (std::abs(model.psi_d.norm() - 1.0) > kNormTol) {
    throw InvalidModel("psi_d is not normalized");
  }
}

inline QuantumModel make_model(CMatrix hamiltonian, CVector psi_in, CVector psi_d,
                               std::string label = "dense") {
  QuantumModel model{std::move(hamiltonian), std::move(psi_in), std::move(psi_d),
                     std::move(label)};
  validate(model);
  return model;
}

inline CVector basis_state(Index dim, Index site) {
  if (site < 0 || site >= dim) {
    throw InvalidModel("site index " + std::to_string(site) + " outside [0, " +
                       std::to_string(dim) + ")");
  }
  CVector v = CVector::Zero(dim);
  v(site) = 1.0;
  return v;
}

/// Tight-binding ring H = -gamma * sum_k (|k><k-1| + |k><k+1|) with periodic
/// boundary. For L = 2 both neighbours coincide, so the hopping is -2 gamma.
inline QuantumModel build_ring(int length, double gamma, int x_in, int x_d) {
  if (length < 2) {
    throw InvalidModel("ring length must be >= 2");
  }
  if (!(gamma > 0.0)) {
    throw InvalidModel("ring hopping gamma must be positive");
  }
  CMatrix h = CMatrix::Zero(length, length);
  for (int k = 0; k < length; ++k) {
    h(k, (k + 1) % length) -= gamma;
    h(k, (k + length - 1) % length) -= gamma;
  }
  std::string label = "ring L=" + std::to_string(length) + " x_in=" + std::to_string(x_in) +
                      " x_d=" + std::to_string(x_d);
  return make_model(std::move(h), basis_state(length, x_in), basis_state(length, x_d),
                    std::move(label));
}

/// Symmetric two-level system H = -gamma (|0><1| + |1><0|), energies -gamma, +gamma.
/// Equivalent to build_ring(2, gamma / 2, ...).
inline QuantumModel build_two_level(double gamma, int x_in, int x_d) {
  if (!(gamma > 0.0)) {
    throw InvalidModel("two-level hopping gamma must be positive");
  }
  CMatrix h = CMatrix::Zero(2, 2);
  h(0, 1) = -gamma;
  h(1, 0) = -gamma;
  return make_model(std::move(h), basis_state(2, x_in), basis_state(2, x_d),
                    "tls x_in=" + std::to_string(x_in) + " x_d=" + std::to_string(x_d));
}

/// Energy representation after dark-state elimination.
///
/// Each kept index i is one "bright" state: the normalized projection of psi_d
/// onto an energy eigenspace. Every other direction inside that eigenspace is
/// orthogonal to psi_d and never detected, so it is dropped.
struct SpectralData {
  RVector energies;   // strictly increasing
  RVector p;          // |<E_i|psi_d>|^2, all > 0, sum 1
  RVector q;          // |<E_i|psi_in>|^2, sums to P_det
  CVector theta;      // <psi_d|E_i><E_i|psi_in>
  CMatrix bright;     // full-space bright states as columns (N x N_r)
  Index reduced_dim = 0;
  Index full_dim = 0;
  double degeneracy_tol = kDefaultDegeneracyTol;
  bool is_return = false;

  /// <psi_d| e^{-iHt} |psi_in>, reconstructed from the reduced data.
  cplx amplitude(double t) const {
    cplx sum{0.0, 0.0};
    for (Index i = 0; i < reduced_dim; ++i) {
      sum += theta(i) * std::exp(cplx(0.0, -energies(i) * t));
    }
    return sum;
  }
};

/// Eigen-decomposition of H, eigenvalues ascending, eigenvectors as columns.
struct Eigensystem {
  RVector energies;
  CMatrix vectors;
};

inline Eigensystem diagonalize(const CMatrix& hamiltonian) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(hamiltonian);
  if (solver.info() != Eigen::Success) {
    throw InvalidModel("eigen-decomposition of hamiltonian failed");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

namespace detail {

// Consecutive-gap clustering of sorted eigenvalues.
inline std::vector<std::pair<Index, Index>> cluster_energies(const RVector& sorted, double tol) {
  std::vector<std::pair<Index, Index>> clusters;  // [begin, end)
  Index begin = 0;
  for (Index i = 1; i <= sorted.size(); ++i) {
    if (i == sorted.size() || sorted(i) - sorted(i - 1) > tol) {
      clusters.emplace_back(begin, i);
      begin = i;
    }
  }
  return clusters;
}

}  // namespace detail

/// Reduction from an explicit eigensystem. The result does not depend on the
/// phases (or, inside a degenerate eigenspace, the basis) of the eigenvectors.
inline SpectralData spectral_reduce(const QuantumModel& model, const Eigensystem& eig,
                                    double degeneracy_tol = kDefaultDegeneracyTol,
                                    double dark_tol = kDefaultDarkTol) {
  if (!(degeneracy_tol > 0.0)) {
    throw InvalidModel("degeneracy tolerance must be positive");
  }
  const Index n = model.dim();
  std::vector<double> energies, p, q;
  std::vector<cplx> theta;
  std::vector<CVector> bright;

  for (auto [begin, end] : detail::cluster_energies(eig.energies, degeneracy_tol)) {
    const auto block = eig.vectors.middleCols(begin, end - begin);
    const CVector projection = block * (block.adjoint() * model.psi_d);
    const double weight = projection.squaredNorm();
    if (weight <= dark_tol) {
      continue;
    }
    CVector state = projection / std::sqrt(weight);
    const cplx d_amp = state.dot(model.psi_d);  // <b|psi_d>, conjugate-linear in b
    const cplx in_amp = state.dot(model.psi_in);
    energies.push_back(eig.energies.segment(begin, end - begin).mean());
    p.push_back(std::norm(d_amp));
    q.push_back(std::norm(in_amp));
    theta.push_back(std::conj(d_amp) * in_amp);
    bright.push_back(std::move(state));
  }
  if (energies.empty()) {
    throw DegenerateProblem("psi_d is orthogonal to every energy eigenspace");
  }

  SpectralData out;
  out.reduced_dim = static_cast<Index>(energies.size());
  out.full_dim = n;
  out.degeneracy_tol = degeneracy_tol;
  out.is_return = model.is_return();
  out.energies = Eigen::Map<const RVector>(energies.data(), out.reduced_dim);
  out.p = Eigen::Map<const RVector>(p.data(), out.reduced_dim);
  out.q = Eigen::Map<const RVector>(q.data(), out.reduced_dim);
  out.theta = Eigen::Map<const CVector>(theta.data(), out.reduced_dim);
  out.bright.resize(n, out.reduced_dim);
  for (Index i = 0; i < out.reduced_dim; ++i) {
    out.bright.col(i) = bright[static_cast<size_t>(i)];
  }
  if (out.is_return) {
    // Exact in theory; remove roundoff so downstream identities hold to the last digit.
    out.q = out.p;
    out.theta = out.p.cast<cplx>();
  }
  return out;
}

inline SpectralData spectral_reduce(const QuantumModel& model,
                                    double degeneracy_tol = kDefaultDegeneracyTol,
                                    double dark_tol = kDefaultDarkTol) {
  validate(model);
  return spectral_reduce(model, diagonalize(model.hamiltonian), degeneracy_tol, dark_tol);
}

/// Unreduced energy representation (N states, dark ones with p_i = 0).
///
/// Inside each degenerate eigenspace the basis is rotated to {bright, dark...}
/// so that at most one state per energy couples to psi_d. The resulting
/// I - M is singular whenever dark states exist; it only makes sense together
/// with a generalized inverse (see superop.hpp).
inline SpectralData spectral_full(const QuantumModel& model,
                                  double degeneracy_tol = kDefaultDegeneracyTol,
                                  double dark_tol = kDefaultDarkTol) {
  validate(model);
  const Eigensystem eig = diagonalize(model.hamiltonian);
  const Index n = model.dim();

  SpectralData out;
  out.full_dim = n;
  out.reduced_dim = n;
  out.degeneracy_tol = degeneracy_tol;
  out.is_return = model.is_return();
  out.energies.resize(n);
  out.bright.resize(n, n);

  Index col = 0;
  for (auto [begin, end] : detail::cluster_energies(eig.energies, degeneracy_tol)) {
    const Index size = end - begin;
    const double energy = eig.energies.segment(begin, size).mean();
    const auto block = eig.vectors.middleCols(begin, size);
    const CVector projection = block * (block.adjoint() * model.psi_d);
    const double weight = projection.squaredNorm();
    CMatrix basis = block;
    if (weight > dark_tol && size > 1) {
      const CVector b = projection / std::sqrt(weight);
      // Orthonormal completion of b inside the eigenspace.
      CMatrix rest = block - b * (b.adjoint() * block);
      Eigen::JacobiSVD<CMatrix> svd(rest, Eigen::ComputeThinU);
      basis.col(0) = b;
      basis.rightCols(size - 1) = svd.matrixU().leftCols(size - 1);
    } else if (weight > dark_tol) {
      basis.col(0) = projection / std::sqrt(weight);
    }
    for (Index k = 0; k < size; ++k, ++col) {
      out.energies(col) = energy;
      out.bright.col(col) = basis.col(k);
    }
  }
  const CVector d_amp = out.bright.adjoint() * model.psi_d;
  const CVector in_amp = out.bright.adjoint() * model.psi_in;
  out.p = d_amp.cwiseAbs2();
  out.q = in_amp.cwiseAbs2();
  out.theta = d_amp.conjugate().cwiseProduct(in_amp);
  for (Index i = 0; i < n; ++i) {
    if (out.p(i) <= dark_tol) {
      out.p(i) = 0.0;
      out.theta(i) = 0.0;
    }
  }
  return out;
}

}  // namespace qprobe
