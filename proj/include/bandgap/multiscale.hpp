#pragma once

#include <array>
#include <map>
#include <memory>
#include <vector>

#include "bandgap/bloch.hpp"
#include "bandgap/homogenized.hpp"

namespace bandgap {

// One separable two-scale product c(x) g(eps x): a cell factor in plane-wave
// coefficients and an envelope factor on the homogenized box grid.  Envelope
// derivatives are applied eagerly with the box-grid stencils; env_dindex
// records which derivative multi-index produced the stored envelope.
struct SeparableTerm {
  std::shared_ptr<const CellCoeffs> cell;
  Eigen::VectorXd env;
  std::array<int, 3> env_dindex{0, 0, 0};
};

// Sum of separable terms representing one two-scale function.
using TwoScaleSum = std::vector<SeparableTerm>;

// L^2(Omega x box) norm via the Gram identity (exact for the separable
// representation; no tensor grid needed).
double two_scale_norm(const TwoScaleSum& terms, const BoxGrid& grid);

struct OrderLog {
  int term_count = 0;
  double solvability_defect = 0.0;  // relative cell-side Fredholm defect
  double laq_defect = 0.0;          // relative envelope-side Fredholm defect
  double residual = 0.0;            // relative defining-equation residual
};

// The two-scale expansion of the defect eigenpair about a certified band
// edge: orders U_0..U_N, corrections mu_1..mu_N and envelopes F_0..F_{N-2}
// built by the solvability recursion, with the closure F_{N-1} = F_N = 0.
class MultiscaleExpansion {
 public:
  // The tensor A must be the inner-product tensor of the same edge, and
  // `ground` a discrete simple eigenpair of the homogenized problem.
  MultiscaleExpansion(const BandEdge& edge, const HomogenizedProblem& problem,
                      const HomogenizedEigenpair& ground, int order);

  int order() const { return order_; }
  const BandEdge& edge() const { return *edge_; }
  const HomogenizedProblem& problem() const { return *problem_; }
  const HomogenizedEigenpair& ground() const { return *ground_; }

  // Fully assembled term list of U_n (closure applied).
  const TwoScaleSum& order_terms(int n) const;
  // Particular part of U_n (without the homogeneous and gradient-envelope
  // pieces); exposed for independent recomposition checks.
  const TwoScaleSum& particular_terms(int n) const;
  // Right-hand side of the order-n equation, rebuilt from the finalized
  // orders (the defining hierarchy, not the incremental bookkeeping).
  TwoScaleSum defining_rhs(int n) const { return full_rhs(n); }
  // mu_n for 1 <= n <= N (mu_2 equals the homogenized eigenvalue).
  double mu(int n) const;
  const std::vector<double>& mu_list() const { return mu_; }
  // Envelope F_n (zero for n in {N-1, N} by the closure).
  const Eigen::VectorXd& envelope(int n) const;

  const OrderLog& log(int n) const { return logs_.at(n); }
  double max_solvability_defect() const;
  double max_order_residual() const;
  // Witnesses of mu_1 = 0: the per-axis integrals <w, 2 d_j w>.
  const Eigen::VectorXd& mu1_witness() const { return mu1_witness_; }

  // mu^{(N)}(eps) = E_* + eps^2 e + sum_{n>=3} eps^n mu_n, truncated at n_max.
  double mu_of(double eps, int n_max) const;

  // Samples sum_n eps^n U_n(x, eps x) at the given physical points,
  // truncated at n_max.  Envelopes are interpolated cubically between box
  // nodes and vanish outside the box.
  Eigen::VectorXd sample(double eps, int n_max,
                         const std::vector<Eigen::VectorXd>& points) const;

  // Term list of (H_eps - mu^{(n_max)}) applied to sum_n eps^n U_n, exact in
  // the separable representation (cell factors get an enlarged cutoff).
  // Returns the residual terms and the basis they live on.
  struct ResidualForm {
    TwoScaleSum terms;
    std::shared_ptr<PlaneWaveBasis> basis;
  };
  ResidualForm residual_form(double eps, int n_max) const;

  // Relative two-scale residual ||(H - mu) u^{(N)}|| / ||u^{(N)}||.
  double residual_norm(double eps, int n_max) const;

 private:
  struct CellOps;

  void build();
  TwoScaleSum full_rhs(int n) const;       // complete right-hand side
                                           // (post-closure, for residuals)
  Eigen::VectorXd cell_projection(const TwoScaleSum& terms,
                                  double* max_imag = nullptr) const;
  TwoScaleSum apply_deflated_inverse(const TwoScaleSum& terms,
                                     double* defect) const;
  TwoScaleSum grad_dot_grad(const TwoScaleSum& terms) const;
  TwoScaleSum apply_envelope_operator(const TwoScaleSum& terms,
                                      double shift) const;
  void finalize_order(int n);

  const BandEdge* edge_;
  const HomogenizedProblem* problem_;
  const HomogenizedEigenpair* ground_;
  int order_;

  std::shared_ptr<CellOps> ops_;
  std::shared_ptr<HomogenizedInverse> laq_inverse_;
  Eigen::VectorXd q_samples_;
  std::vector<TwoScaleSum> particular_;  // W_n
  std::vector<TwoScaleSum> full_;        // U_n with homogeneous parts attached
  std::vector<Eigen::VectorXd> F_;
  std::vector<double> mu_;
  std::map<int, OrderLog> logs_;
  Eigen::VectorXd mu1_witness_;
};

// Cubic interpolation of a box-grid function at an arbitrary point (zero
// outside the box).  Exposed for the validator.
double interpolate_envelope(const BoxGrid& grid, const Eigen::VectorXd& values,
                            const Eigen::VectorXd& y);

}  // namespace bandgap
