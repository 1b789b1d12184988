#include "bandgap/lattice.hpp"

#include <cmath>
#include <numbers>

namespace bandgap {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_dimension(int d) {
  if (d < 1 || d > 3) {
    throw DomainError("dimension must be 1, 2 or 3, got " + std::to_string(d));
  }
}

WaveIndex negate(const WaveIndex& z) { return {-z[0], -z[1], -z[2]}; }

}  // namespace

PeriodicPotential::PeriodicPotential(int dimension, int cutoff,
                                     const std::map<WaveIndex, Complex>& coeffs)
    : dim_(dimension), cutoff_(cutoff) {
  check_dimension(dimension);
  if (cutoff < 0) {
    throw DomainError("Fourier cutoff must be nonnegative");
  }
  for (const auto& [z, v] : coeffs) {
    for (int j = 0; j < 3; ++j) {
      if (std::abs(z[j]) > cutoff || (j >= dimension && z[j] != 0)) {
        throw DomainError("Fourier index outside cutoff/dimension");
      }
    }
    if (std::abs(v) == 0.0) continue;
    // Hermitian symmetry: store (v + conj(coeff at -z))/2 at z so that the
    // stored series is exactly real-valued.
    auto it = coeffs.find(negate(z));
    Complex partner = (it != coeffs.end()) ? it->second : Complex(0.0);
    coeffs_[z] = 0.5 * (v + std::conj(partner));
  }
  // z = 0 must be real.
  auto it0 = coeffs_.find(WaveIndex{0, 0, 0});
  if (it0 != coeffs_.end()) it0->second = Complex(it0->second.real(), 0.0);
}

PeriodicPotential PeriodicPotential::zero(int dimension) {
  return PeriodicPotential(dimension, 0, {});
}

PeriodicPotential PeriodicPotential::cosine(
    int dimension, const std::vector<double>& amplitudes) {
  check_dimension(dimension);
  if (static_cast<int>(amplitudes.size()) != dimension) {
    throw ShapeError("cosine family needs one amplitude per dimension");
  }
  std::map<WaveIndex, Complex> c;
  for (int j = 0; j < dimension; ++j) {
    WaveIndex z{0, 0, 0};
    z[j] = 1;
    c[z] += Complex(amplitudes[j] / 2.0, 0.0);
    z[j] = -1;
    c[z] += Complex(amplitudes[j] / 2.0, 0.0);
  }
  return PeriodicPotential(dimension, 1, c);
}

Complex PeriodicPotential::fourier(const WaveIndex& z) const {
  auto it = coeffs_.find(z);
  return it == coeffs_.end() ? Complex(0.0) : it->second;
}

double PeriodicPotential::operator()(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) {
    throw ShapeError("evaluation point has wrong dimension");
  }
  Complex acc(0.0);
  for (const auto& [z, v] : coeffs_) {
    double phase = 0.0;
    for (int j = 0; j < dim_; ++j) phase += z[j] * x[j];
    acc += v * std::polar(1.0, kTwoPi * phase);
  }
  return acc.real();
}

double PeriodicPotential::average() const {
  return fourier(WaveIndex{0, 0, 0}).real();
}

namespace {

// Solve |profile(r)| = 1e-12 * |profile(0)| for the 1e-12 localization radius.
double component_radius(LocalizedPotential::Profile p, double width) {
  switch (p) {
    case LocalizedPotential::Profile::Gaussian:
    case LocalizedPotential::Profile::SumOfGaussians:
      return width * std::sqrt(2.0 * std::log(1e12));
    case LocalizedPotential::Profile::SechSquared:
      return width * std::acosh(1e6);
    case LocalizedPotential::Profile::Box:
      return width;
  }
  return width;
}

}  // namespace

LocalizedPotential::LocalizedPotential(int dimension, Profile profile,
                                       std::vector<Component> parts)
    : dim_(dimension), profile_(profile), parts_(std::move(parts)) {
  check_dimension(dimension);
  decay_radius_ = 0.0;
  for (auto& c : parts_) {
    if (c.center.size() == 0) c.center = Eigen::VectorXd::Zero(dimension);
    if (c.center.size() != dimension) {
      throw ShapeError("defect center has wrong dimension");
    }
    if (c.width <= 0.0) throw DomainError("defect width must be positive");
    decay_radius_ = std::max(
        decay_radius_, c.center.norm() + component_radius(profile_, c.width));
  }
}

LocalizedPotential LocalizedPotential::zero(int dimension) {
  return LocalizedPotential(dimension, Profile::Gaussian, {});
}

LocalizedPotential LocalizedPotential::gaussian(int dimension, double depth,
                                                double width,
                                                const Eigen::VectorXd& center) {
  return LocalizedPotential(dimension, Profile::Gaussian,
                            {Component{depth, width, center}});
}

LocalizedPotential LocalizedPotential::sech_squared(
    int dimension, double depth, double width, const Eigen::VectorXd& center) {
  return LocalizedPotential(dimension, Profile::SechSquared,
                            {Component{depth, width, center}});
}

LocalizedPotential LocalizedPotential::box(int dimension, double depth,
                                           double half_width,
                                           const Eigen::VectorXd& center) {
  return LocalizedPotential(dimension, Profile::Box,
                            {Component{depth, half_width, center}});
}

LocalizedPotential LocalizedPotential::sum_of_gaussians(
    int dimension, std::vector<Component> parts) {
  return LocalizedPotential(dimension, Profile::SumOfGaussians,
                            std::move(parts));
}

double LocalizedPotential::operator()(const Eigen::VectorXd& y) const {
  if (y.size() != dim_) {
    throw ShapeError("evaluation point has wrong dimension");
  }
  double acc = 0.0;
  for (const auto& c : parts_) {
    double r = (y - c.center).norm() / c.width;
    switch (profile_) {
      case Profile::Gaussian:
      case Profile::SumOfGaussians:
        acc += c.depth * std::exp(-0.5 * r * r);
        break;
      case Profile::SechSquared: {
        double s = 1.0 / std::cosh(r);
        acc += c.depth * s * s;
        break;
      }
      case Profile::Box:
        acc += ((y - c.center).cwiseAbs().maxCoeff() <= c.width) ? c.depth : 0.0;
        break;
    }
  }
  return acc;
}

LocalizedPotential LocalizedPotential::negated() const {
  std::vector<Component> parts = parts_;
  for (auto& c : parts) c.depth = -c.depth;
  return LocalizedPotential(dim_, profile_, std::move(parts));
}

double LocalizedPotential::width() const {
  double w = std::numeric_limits<double>::infinity();
  for (const auto& c : parts_) w = std::min(w, c.width);
  return parts_.empty() ? 0.0 : w;
}

double LocalizedPotential::peak() const {
  double p = 0.0;
  for (const auto& c : parts_) p = std::max(p, std::abs(c.depth));
  return p;
}

bool LocalizedPotential::is_zero() const {
  return parts_.empty() || peak() == 0.0;
}

CellGrid::CellGrid(int dimension, int points_per_dim)
    : dim_(dimension), n_(points_per_dim) {
  check_dimension(dimension);
  if (points_per_dim < 2) throw DomainError("cell grid needs >= 2 points");
  size_ = 1;
  for (int j = 0; j < dim_; ++j) size_ *= n_;
}

Eigen::VectorXd CellGrid::node(Eigen::Index flat) const {
  Eigen::VectorXd x(dim_);
  for (int j = dim_ - 1; j >= 0; --j) {
    x[j] = static_cast<double>(flat % n_) / n_;
    flat /= n_;
  }
  return x;
}

Complex cell_inner_product(const Eigen::VectorXcd& f, const Eigen::VectorXcd& g,
                           const CellGrid& grid) {
  if (f.size() != grid.size() || g.size() != grid.size()) {
    throw ShapeError("cell samples do not match the grid");
  }
  return f.dot(g) / static_cast<double>(grid.size());
}

}  // namespace bandgap
