#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <vector>

#include "bandgap/plane_wave.hpp"

namespace bandgap {

// Tolerances used by the hypothesis checks; defaults are commensurate with
// the spectral accuracy of the plane-wave discretization.
struct Tolerances {
  double grad = 1e-6;        // |grad E| at a certified critical point
  double solvability = 1e-8; // relative Fredholm orthogonality defect
  double definiteness = 1e-8;
  double simple(double energy) const { return 1e-6 * std::abs(energy) + 1e-8; }
  double cluster(double e) const { return 1e-7 * std::max(1.0, std::abs(e)); }
};

// Plane-wave Galerkin matrix of the shifted cell operator at quasimomentum k:
// entries 4*pi^2 |m+k|^2 delta_{mm'} + V_{m-m'}, indices |m_j| <= pw_cutoff.
// Coefficients of V beyond its stored cutoff are treated as zero.
Eigen::MatrixXcd assemble_bloch_matrix(const PeriodicPotential& V,
                                       const Eigen::VectorXd& k, int pw_cutoff);

struct BandStructure {
  std::vector<Eigen::VectorXd> k_grid;
  // energies(i, b) = E_b(k_i), sorted ascending in b for each k.
  Eigen::MatrixXd energies;
  // Optional per-k eigenvector store (columns are plane-wave coefficients).
  std::vector<Eigen::MatrixXcd> eigenvectors;
  int pw_cutoff = 0;

  int n_bands() const { return static_cast<int>(energies.cols()); }
};

// Lowest n_bands eigenpairs of the cell problem for each listed k.
BandStructure solve_bands(const PeriodicPotential& V,
                          const std::vector<Eigen::VectorXd>& k_list,
                          int n_bands, int pw_cutoff,
                          bool keep_eigenvectors = false);

// Certified spectral band edge at a corner of the Brillouin zone, together
// with the machinery for the deflated inverse of the shifted cell operator.
// Immutable after construction.
class BandEdge {
 public:
  BandEdge(const PeriodicPotential& V, int band, const Eigen::VectorXd& k_star,
           int pw_cutoff, const Tolerances& tol = {});

  int band() const { return band_; }
  const Eigen::VectorXd& k_star() const { return kstar_; }
  double energy() const { return energy_; }
  const PlaneWaveBasis& basis() const { return basis_; }
  const PeriodicPotential& potential() const { return V_; }
  // Edge eigenfunction with the Bloch phase folded in, real gauge, unit
  // L^2(Omega) norm.
  const CellCoeffs& w() const { return w_; }
  double simplicity_gap() const { return simplicity_gap_; }
  double gradient_residual() const { return gradient_residual_; }
  double realness_defect() const { return realness_defect_; }
  const Tolerances& tolerances() const { return tol_; }

  // Galerkin matrix of the edge-shifted cell operator (Hermitian, singular
  // with kernel spanned by w).
  const Eigen::MatrixXcd& shifted_matrix() const { return shifted_; }

  // Unique solution u of (shifted operator) u = g with <w,u> = 0, via the
  // deflated solve; requires <w,g> = 0 within tol.solvability * ||g||.
  // The relative residual of the returned solution is certified < 1e-8.
  CellCoeffs apply_deflated_inverse(const CellCoeffs& g) const;

  // Same solve against the projected right-hand side (I - w w^H) g, without
  // the solvability gate.  Used when only a weighted sum of right-hand sides
  // is solvable (separable two-scale assemblies).
  CellCoeffs deflated_solve(const CellCoeffs& g) const;

  // Orthogonality defect |<w,g>| / ||g|| without solving.
  double solvability_defect(const CellCoeffs& g) const;

 private:
  PeriodicPotential V_;
  int band_;
  Eigen::VectorXd kstar_;
  PlaneWaveBasis basis_;
  double energy_;
  CellCoeffs w_;
  double simplicity_gap_;
  double gradient_residual_;
  double realness_defect_;
  Tolerances tol_;
  Eigen::MatrixXcd shifted_;
  std::shared_ptr<Eigen::PartialPivLU<Eigen::MatrixXcd>> deflated_lu_;
};

// Convenience wrapper matching the pipeline call site.
inline BandEdge find_band_edge(const PeriodicPotential& V, int band,
                               const Eigen::VectorXd& k_star, int pw_cutoff,
                               const Tolerances& tol = {}) {
  return BandEdge(V, band, k_star, pw_cutoff, tol);
}

struct Dispersion {
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;  // symmetrized
  double asymmetry = 0.0;   // max |H - H^T| before symmetrization
};

// Central finite-difference gradient and Hessian of E_band(k) at k_star with
// one Richardson extrapolation step (h and h/2).  The band is tracked by
// eigenvalue continuity; a crossing inside the stencil raises
// BandCrossingError.
Dispersion dispersion_derivatives(const PeriodicPotential& V, int band,
                                  const Eigen::VectorXd& k_star, int pw_cutoff,
                                  double h = 1e-3, const Tolerances& tol = {});

enum class GapSide { Below, Above };

struct GapInterval {
  // Open interval (lower, upper); unbounded endpoints are empty.
  std::optional<double> lower;
  std::optional<double> upper;
  GapSide side = GapSide::Below;

  double width() const;
  bool contains(double e) const;
};

// The open spectral gap adjacent to the edge on the requested side, read off
// a band structure sampled on a dense k-grid.  Throws GaplessError when the
// spectrum covers the edge neighborhood (width < 1e-10).
GapInterval spectral_gap(const BandStructure& bands, const BandEdge& edge,
                         GapSide side);

}  // namespace bandgap
