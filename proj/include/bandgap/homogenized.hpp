#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <vector>

#include "bandgap/effective_mass.hpp"
#include "bandgap/lattice.hpp"

namespace bandgap {

// Uniform grid of interior nodes on the box [-L, L]^d with homogeneous
// Dirichlet boundary conditions (the boundary nodes carry implicit zeros).
class BoxGrid {
 public:
  BoxGrid(int dimension, double half_width, double spacing);

  int dimension() const { return dim_; }
  double half_width() const { return half_width_; }
  double spacing() const { return h_; }
  int nodes_per_dim() const { return n_; }
  Eigen::Index size() const { return size_; }

  Eigen::VectorXd node(Eigen::Index flat) const;
  double coordinate(int i1d) const { return -half_width_ + (i1d + 1) * h_; }

  // L^2 quadrature weight (rectangle rule; boundary values vanish).
  double quad_weight() const;
  double inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
    return quad_weight() * f.dot(g);
  }
  double norm(const Eigen::VectorXd& f) const {
    return std::sqrt(quad_weight()) * f.norm();
  }

  // Centered first-derivative operator along axis j.
  const Eigen::SparseMatrix<double>& d1(int j) const;
  // Second-derivative operator: 3-point stencil for j == l, 4-point corner
  // average for j != l (keeps assembled operators symmetric).
  const Eigen::SparseMatrix<double>& d2(int j, int l) const;

  Eigen::VectorXd sample(const LocalizedPotential& Q) const;

  // Fraction of the squared L^2 mass in the outermost 10% shell.
  double boundary_mass(const Eigen::VectorXd& f) const;

 private:
  int dim_;
  double half_width_;
  double h_;
  int n_;
  Eigen::Index size_;
  Eigen::Index stride_[3];
  // Cached operators, built on first use.
  mutable std::shared_ptr<Eigen::SparseMatrix<double>> d1_[3];
  mutable std::shared_ptr<Eigen::SparseMatrix<double>> d2_[3][3];
};

// Dirichlet discretization of the homogenized operator -div(A grad) + Q on a
// truncated box.
struct HomogenizedProblem {
  EffectiveMassTensor A;
  LocalizedPotential Q;
  BoxGrid grid;

  // Validates grid adequacy: half_width >= 4 * defect length scale and
  // >= 16 grid points across the defect width.
  HomogenizedProblem(EffectiveMassTensor a, LocalizedPotential q,
                     double half_width, double spacing);
};

// Second-order symmetric stencil matrix; refuses indefinite A (H2(c)).
Eigen::SparseMatrix<double> assemble_homogenized(const HomogenizedProblem& p);

struct HomogenizedEigenpair {
  double e = 0.0;
  Eigen::VectorXd F;       // unit L^2 norm
  int multiplicity = 1;    // cluster count within the cluster tolerance
  double boundary_mass = 0.0;
  bool discrete = false;   // sgn(A) * e < 0
};

// The n_eigs eigenvalues on the discrete side of the spectrum: smallest for
// positive definite A; for negative definite A the reflected problem
// (-A, -Q) is solved and the spectrum negated.  Degenerate clusters are
// grouped within the cluster tolerance.  Throws HypothesisError("H3") when
// no discrete eigenvalue is present.
std::vector<HomogenizedEigenpair> solve_homogenized(
    const HomogenizedProblem& p, int n_eigs, const Tolerances& tol = {});

// Deflated inverse of (homogenized operator - e) on the orthogonal complement
// of the eigenfunction, realized as a bordered sparse solve.  The
// factorization is cached across calls.
class HomogenizedInverse {
 public:
  HomogenizedInverse(const HomogenizedProblem& p,
                     const HomogenizedEigenpair& pair,
                     const Tolerances& tol = {});

  // Solves (L - e) u = rhs with <F, u> = 0; requires <F, rhs> = 0 within
  // tol.solvability * ||rhs||.  Residual certified < 1e-7 relative.
  Eigen::VectorXd apply(const Eigen::VectorXd& rhs) const;

  double solvability_defect(const Eigen::VectorXd& rhs) const;

 private:
  const BoxGrid& grid_;
  Eigen::VectorXd F_;
  double e_;
  Tolerances tol_;
  Eigen::SparseMatrix<double> shifted_;
  std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
};

inline Eigen::VectorXd apply_homogenized_inverse(const HomogenizedProblem& p,
                                                 const HomogenizedEigenpair& pr,
                                                 const Eigen::VectorXd& rhs,
                                                 const Tolerances& tol = {}) {
  return HomogenizedInverse(p, pr, tol).apply(rhs);
}

}  // namespace bandgap
