#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <map>
#include <vector>

#include "bandgap/errors.hpp"

namespace bandgap {

using Complex = std::complex<double>;

// Integer wavevector z in Z^d, padded with zeros beyond the active dimension.
using WaveIndex = std::array<int, 3>;

// Real-valued potential, periodic on the unit cell [0,1)^d, stored as a
// truncated Fourier series V(x) = sum_z V_z exp(2*pi*i z.x).  Hermitian
// symmetry V_{-z} = conj(V_z) is enforced at construction so evaluation is
// real.  Immutable after construction.
class PeriodicPotential {
 public:
  PeriodicPotential(int dimension, int cutoff,
                    const std::map<WaveIndex, Complex>& coeffs);

  static PeriodicPotential zero(int dimension);
  // sum_j amplitudes[j] * cos(2*pi*x_j), one term per dimension.
  static PeriodicPotential cosine(int dimension,
                                  const std::vector<double>& amplitudes);

  int dimension() const { return dim_; }
  int cutoff() const { return cutoff_; }

  // Fourier coefficient V_z; indices beyond the stored cutoff give 0.
  Complex fourier(const WaveIndex& z) const;
  const std::map<WaveIndex, Complex>& coefficients() const { return coeffs_; }

  // Re sum_z V_z exp(2*pi*i z.x); periodic under x -> x + e_j.
  double operator()(const Eigen::VectorXd& x) const;

  // Cell mean, i.e. the z = 0 coefficient.
  double average() const;

  bool is_zero() const { return coeffs_.empty(); }

 private:
  int dim_;
  int cutoff_;
  std::map<WaveIndex, Complex> coeffs_;
};

// Localized defect profile Q(y) on R^d from a named analytic family.
// |Q| decays below 1e-12 of its peak beyond decay_radius().
class LocalizedPotential {
 public:
  struct Component {
    double depth = 0.0;   // energy; sign free (down-defect <= 0, up-defect >= 0)
    double width = 1.0;   // length scale
    Eigen::VectorXd center;
  };
  enum class Profile { Gaussian, SechSquared, Box, SumOfGaussians };

  static LocalizedPotential zero(int dimension);
  static LocalizedPotential gaussian(int dimension, double depth, double width,
                                     const Eigen::VectorXd& center = {});
  static LocalizedPotential sech_squared(int dimension, double depth,
                                         double width,
                                         const Eigen::VectorXd& center = {});
  static LocalizedPotential box(int dimension, double depth, double half_width,
                                const Eigen::VectorXd& center = {});
  static LocalizedPotential sum_of_gaussians(int dimension,
                                             std::vector<Component> parts);

  int dimension() const { return dim_; }
  Profile profile() const { return profile_; }
  const std::vector<Component>& components() const { return parts_; }

  double operator()(const Eigen::VectorXd& y) const;

  // Same profile with all depths sign-flipped.
  LocalizedPotential negated() const;

  // Radius beyond which |Q(y)| < 1e-12 * peak().
  double decay_radius() const { return decay_radius_; }
  // Shortest length scale among components (grid resolution requirement).
  double width() const;
  double peak() const;
  bool is_zero() const;

 private:
  LocalizedPotential(int dimension, Profile profile,
                     std::vector<Component> parts);

  int dim_;
  Profile profile_;
  std::vector<Component> parts_;
  double decay_radius_;
};

// Uniform sampling grid on the unit cell [0,1)^d.  Trapezoidal quadrature on
// this grid integrates resolvable Fourier modes exactly.
class CellGrid {
 public:
  CellGrid(int dimension, int points_per_dim);

  int dimension() const { return dim_; }
  int points_per_dim() const { return n_; }
  Eigen::Index size() const { return size_; }

  Eigen::VectorXd node(Eigen::Index flat) const;

 private:
  int dim_;
  int n_;
  Eigen::Index size_;
};

// Trapezoidal approximation of int_Omega conj(f) g dx for samples on the same
// CellGrid (|Omega| = 1, so this is the sample mean).  Conjugate-linear in the
// first slot.  Throws ShapeError on size mismatch.
Complex cell_inner_product(const Eigen::VectorXcd& f, const Eigen::VectorXcd& g,
                           const CellGrid& grid);

}  // namespace bandgap
