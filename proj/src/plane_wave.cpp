#include "bandgap/plane_wave.hpp"

#include <cmath>
#include <numbers>

namespace bandgap {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

PlaneWaveBasis::PlaneWaveBasis(int dimension, int cutoff,
                               const Eigen::VectorXd& k_shift)
    : dim_(dimension), cutoff_(cutoff), k_(k_shift) {
  if (dimension < 1 || dimension > 3) {
    throw DomainError("plane-wave basis dimension must be 1, 2 or 3");
  }
  if (cutoff < 1) throw DomainError("plane-wave cutoff must be >= 1");
  if (k_.size() == 0) k_ = Eigen::VectorXd::Zero(dimension);
  if (k_.size() != dimension) {
    throw ShapeError("quasimomentum has wrong dimension");
  }
  const Eigen::Index per_dim = 2 * cutoff_ + 1;
  size_ = 1;
  for (int j = 0; j < dim_; ++j) size_ *= per_dim;
  stride_[dim_ - 1] = 1;
  for (int j = dim_ - 2; j >= 0; --j) stride_[j] = stride_[j + 1] * per_dim;
}

WaveIndex PlaneWaveBasis::index_to_wave(Eigen::Index i) const {
  WaveIndex m{0, 0, 0};
  for (int j = 0; j < dim_; ++j) {
    m[j] = static_cast<int>(i / stride_[j]) - cutoff_;
    i %= stride_[j];
  }
  return m;
}

Eigen::Index PlaneWaveBasis::wave_to_index(const WaveIndex& m) const {
  Eigen::Index i = 0;
  for (int j = 0; j < dim_; ++j) {
    if (std::abs(m[j]) > cutoff_) return -1;
    i += static_cast<Eigen::Index>(m[j] + cutoff_) * stride_[j];
  }
  return i;
}

double PlaneWaveBasis::frequency(Eigen::Index i, int j) const {
  return index_to_wave(i)[j] + k_[j];
}

Eigen::Index PlaneWaveBasis::conjugate_partner(Eigen::Index i) const {
  WaveIndex m = index_to_wave(i);
  WaveIndex p{0, 0, 0};
  for (int j = 0; j < dim_; ++j) {
    // -(m_j + k_j) = p_j + k_j requires p_j = -m_j - 2 k_j with 2 k_j integer.
    double two_k = 2.0 * k_[j];
    int s = static_cast<int>(std::lround(two_k));
    if (std::abs(two_k - s) > 1e-12) return -1;
    p[j] = -m[j] - s;
  }
  return wave_to_index(p);
}

CellCoeffs pw_derivative(const PlaneWaveBasis& basis, const CellCoeffs& c,
                         int axis) {
  if (c.size() != basis.size()) throw ShapeError("coefficients/basis mismatch");
  CellCoeffs out(c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    out[i] = Complex(0.0, kTwoPi * basis.frequency(i, axis)) * c[i];
  }
  return out;
}

Complex pw_eval(const PlaneWaveBasis& basis, const CellCoeffs& c,
                const Eigen::VectorXd& x) {
  if (c.size() != basis.size()) throw ShapeError("coefficients/basis mismatch");
  Complex acc(0.0);
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (c[i] == Complex(0.0)) continue;
    double phase = 0.0;
    for (int j = 0; j < basis.dimension(); ++j) {
      phase += basis.frequency(i, j) * x[j];
    }
    acc += c[i] * std::polar(1.0, kTwoPi * phase);
  }
  return acc;
}

Eigen::VectorXcd pw_sample(const PlaneWaveBasis& basis, const CellCoeffs& c,
                           const CellGrid& grid) {
  Eigen::VectorXcd out(grid.size());
  for (Eigen::Index n = 0; n < grid.size(); ++n) {
    out[n] = pw_eval(basis, c, grid.node(n));
  }
  return out;
}

CellCoeffs pw_project_real(const PlaneWaveBasis& basis, const CellCoeffs& c,
                           double* defect) {
  CellCoeffs out(c.size());
  double removed2 = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    Eigen::Index p = basis.conjugate_partner(i);
    if (p < 0) {
      // Frequency has no negated partner in the truncation; a real function
      // cannot carry it, so it is dropped.
      out[i] = Complex(0.0);
      removed2 += std::norm(c[i]);
    } else if (p == i) {
      out[i] = Complex(c[i].real(), 0.0);
      removed2 += c[i].imag() * c[i].imag();
    } else if (p > i) {
      Complex sym = 0.5 * (c[i] + std::conj(c[p]));
      out[i] = sym;
      out[p] = std::conj(sym);
      removed2 += 0.5 * std::norm(c[i] - std::conj(c[p]));
    }
  }
  if (defect) *defect = std::sqrt(removed2);
  return out;
}

CellCoeffs pw_embed(const PlaneWaveBasis& src, const CellCoeffs& c,
                    const PlaneWaveBasis& dst) {
  if (src.dimension() != dst.dimension() ||
      (src.k_shift() - dst.k_shift()).norm() > 1e-14) {
    throw ShapeError("embedding requires matching dimension and shift");
  }
  if (dst.cutoff() < src.cutoff()) {
    throw ShapeError("embedding target cutoff too small");
  }
  CellCoeffs out = CellCoeffs::Zero(dst.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    out[dst.wave_to_index(src.index_to_wave(i))] = c[i];
  }
  return out;
}

}  // namespace bandgap
