#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qprobe {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Malformed physical input: non-Hermitian H, unnormalized states, bad ring size.
class InvalidModel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The detection state has no overlap with any energy eigenspace.
class DegenerateProblem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A moment diverges (C = 1 in the two-level formulas, Zeno or exceptional tau).
class DivergentMoment : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user configuration (CLI flags, config files, sweep grids).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Pair of reduced-space energies whose phase factor is (nearly) unity.
struct EnergyPair {
  Index i = 0;
  Index j = 0;
  double e_i = 0.0;
  double e_j = 0.0;
  cplx charfn{};
  double distance_from_one = 0.0;  // |1 - charfn(E_i - E_j)|
};

/// I - M is numerically singular. Carries the condition estimate and the
/// energy pairs closest to an exceptional resonance.
class IllConditioned : public std::runtime_error {
 public:
  IllConditioned(const std::string& what, double condition, std::vector<EnergyPair> pairs)
      : std::runtime_error(what), condition_(condition), pairs_(std::move(pairs)) {}

  double condition() const noexcept { return condition_; }
  const std::vector<EnergyPair>& pairs() const noexcept { return pairs_; }

 private:
  double condition_;
  std::vector<EnergyPair> pairs_;
};

}  // namespace qprobe
