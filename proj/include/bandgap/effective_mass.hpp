#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bandgap/bloch.hpp"

namespace bandgap {

struct HomogenizedEigenpair;  // homogenized.hpp

// Inverse effective mass tensor A at a band edge, with definiteness
// classification and the provenance of the computation.
struct EffectiveMassTensor {
  enum class Method { Hessian, InnerProduct };
  enum class Definiteness { Positive, Negative, Indefinite };

  Eigen::MatrixXd A;  // symmetric d x d
  Method method = Method::InnerProduct;
  Definiteness definiteness = Definiteness::Indefinite;
  Eigen::VectorXd eigenvalues;            // of A, ascending
  Eigen::VectorXd eigenvalues_I_minus_A;  // of I - A, ascending
  double asymmetry = 0.0;                 // pre-symmetrization defect

  int dimension() const { return static_cast<int>(A.rows()); }
  // +1 / -1 for definite A; throws HypothesisError (H2(c)) when indefinite.
  int sign() const;
  bool is_definite() const {
    return definiteness != Definiteness::Indefinite;
  }

  // Identity tensor of the given dimension (free-particle reference).
  static EffectiveMassTensor identity(int dimension);
  static EffectiveMassTensor from_matrix(const Eigen::MatrixXd& A, Method m,
                                         double asymmetry = 0.0,
                                         const Tolerances& tol = {});
};

// A_jl = delta_jl - 4 <d_j w, (deflated inverse){d_l w}>.  Solvability of each
// cell solve holds automatically since <w, d_l w> = 0 for the real-gauged w.
EffectiveMassTensor effective_mass_inner_product(const BandEdge& edge);

// A = Hessian of the band dispersion at the edge divided by 8 pi^2, from
// Richardson-extrapolated central differences.
EffectiveMassTensor effective_mass_hessian(const PeriodicPotential& V,
                                           int band,
                                           const Eigen::VectorXd& k_star,
                                           int pw_cutoff, double h = 1e-3,
                                           const Tolerances& tol = {});

// Smallest eigenvalue of I - A (expected > 0 at the lowest band edge).
double check_I_minus_A(const EffectiveMassTensor& A);

// Report-only certification of the runtime hypotheses.
struct HypothesisReport {
  bool h2a = false;  // simple edge
  bool h2b = false;  // critical point
  bool h2c = false;  // sign-definite A
  bool h3 = false;   // discrete homogenized eigenvalue with sgn(A) e < 0
  double simplicity_gap = 0.0;
  double gradient_residual = 0.0;
  Eigen::VectorXd a_eigenvalues;
  double sign_times_e = 0.0;  // sgn(A) * e for the candidate eigenvalue
  bool all() const { return h2a && h2b && h2c && h3; }
  std::string first_failure() const;
};

HypothesisReport certify_hypotheses(
    const BandEdge& edge, const EffectiveMassTensor& A,
    const std::vector<HomogenizedEigenpair>& homogenized_eigs);

}  // namespace bandgap
