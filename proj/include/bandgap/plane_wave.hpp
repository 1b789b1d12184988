#pragma once

#include <Eigen/Dense>
#include <memory>

#include "bandgap/lattice.hpp"

namespace bandgap {

// Truncated plane-wave basis {exp(2*pi*i (m + k).x) : |m_j| <= cutoff} on the
// unit cell.  The quasimomentum shift k is folded into the frequencies, so
// functions with the Bloch symmetry f(x+e_j) = exp(2*pi*i k_j) f(x) are plain
// coefficient vectors here.  The basis is orthonormal in L^2(Omega).
class PlaneWaveBasis {
 public:
  PlaneWaveBasis(int dimension, int cutoff, const Eigen::VectorXd& k_shift);

  int dimension() const { return dim_; }
  int cutoff() const { return cutoff_; }
  const Eigen::VectorXd& k_shift() const { return k_; }
  Eigen::Index size() const { return size_; }

  WaveIndex index_to_wave(Eigen::Index i) const;
  Eigen::Index wave_to_index(const WaveIndex& m) const;  // -1 if outside

  // Frequency nu_j = m_j + k_j of basis element i along axis j.
  double frequency(Eigen::Index i, int j) const;

  // Index of the element with frequency -nu (conjugate partner of a
  // real-valued function), or -1 if the negated frequency leaves the cutoff.
  Eigen::Index conjugate_partner(Eigen::Index i) const;

  bool operator==(const PlaneWaveBasis& o) const {
    return dim_ == o.dim_ && cutoff_ == o.cutoff_ && k_ == o.k_;
  }

 private:
  int dim_;
  int cutoff_;
  Eigen::VectorXd k_;
  Eigen::Index size_;
  Eigen::Index stride_[3];
};

// Coefficient vector of a cell function on a PlaneWaveBasis.
using CellCoeffs = Eigen::VectorXcd;

// Exact L^2(Omega) inner product, conjugate-linear in the first slot.
inline Complex pw_inner(const CellCoeffs& a, const CellCoeffs& b) {
  return a.dot(b);
}

// d/dx_j in coefficient space (multiplication by 2*pi*i nu_j).
CellCoeffs pw_derivative(const PlaneWaveBasis& basis, const CellCoeffs& c,
                         int axis);

Complex pw_eval(const PlaneWaveBasis& basis, const CellCoeffs& c,
                const Eigen::VectorXd& x);

// Samples on a CellGrid (complex values).
Eigen::VectorXcd pw_sample(const PlaneWaveBasis& basis, const CellCoeffs& c,
                           const CellGrid& grid);

// Projection onto real-valued functions: pairs coefficients with their
// conjugate partners and drops the unpairable remainder.  Returns the
// projected coefficients; *defect receives the norm of what was removed.
CellCoeffs pw_project_real(const PlaneWaveBasis& basis, const CellCoeffs& c,
                           double* defect = nullptr);

// Zero-padding embedding into a basis with a larger cutoff (same shift).
CellCoeffs pw_embed(const PlaneWaveBasis& src, const CellCoeffs& c,
                    const PlaneWaveBasis& dst);

}  // namespace bandgap
