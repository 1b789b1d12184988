#include <doctest.h>

#include <cmath>

#include "bandgap/effective_mass.hpp"
#include "bandgap/homogenized.hpp"
#include "oracles.hpp"

using namespace bandgap;

namespace {

Eigen::VectorXd k1(double v) {
  Eigen::VectorXd k(1);
  k[0] = v;
  return k;
}

double scalar_inner_mass(double amplitude, double kstar, int band = 0) {
  PeriodicPotential v = PeriodicPotential::cosine(1, {amplitude});
  BandEdge edge(v, band, k1(kstar), 16);
  return effective_mass_inner_product(edge).A(0, 0);
}

}  // namespace

TEST_CASE("free particle tensor is the identity for both methods") {
  for (int d : {1, 2}) {
    PeriodicPotential v0 = PeriodicPotential::zero(d);
    Eigen::VectorXd k = Eigen::VectorXd::Zero(d);
    BandEdge edge(v0, 0, k, d == 1 ? 16 : 8);
    EffectiveMassTensor inner = effective_mass_inner_product(edge);
    EffectiveMassTensor hess = effective_mass_hessian(v0, 0, k, d == 1 ? 16 : 8);
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    CHECK((inner.A - id).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((hess.A - id).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(inner.definiteness == EffectiveMassTensor::Definiteness::Positive);
    CHECK(inner.sign() == 1);
    // Boundary case: the correction term vanishes identically, I - A = 0.
    CHECK(std::abs(check_I_minus_A(inner)) < 1e-12);
  }
}

TEST_CASE("dual-method agreement on certified 1D edges") {
  PeriodicPotential v = PeriodicPotential::cosine(1, {10.0});
  for (double ks : {0.0, 0.5}) {
    BandEdge edge(v, 0, k1(ks), 16);
    EffectiveMassTensor inner = effective_mass_inner_product(edge);
    EffectiveMassTensor hess = effective_mass_hessian(v, 0, k1(ks), 16);
    double scale = inner.A.cwiseAbs().maxCoeff();
    CHECK((inner.A - hess.A).cwiseAbs().maxCoeff() / scale < 1e-5);
    CHECK(inner.asymmetry < 1e-6);
    CHECK(hess.asymmetry < 1e-6);
    if (ks == 0.0) {
      CHECK(inner.A(0, 0) > 0.0);
      CHECK(inner.A(0, 0) < 1.0);
      CHECK(inner.sign() == 1);
    } else {
      CHECK(inner.A(0, 0) < 0.0);  // top of the band curves down
      CHECK(inner.sign() == -1);
    }
  }
}

TEST_CASE("2D separable tensor is diagonal with the 1D entries") {
  PeriodicPotential v2 = PeriodicPotential::cosine(2, {10.0, 10.0});
  BandEdge edge(v2, 0, Eigen::Vector2d(0.0, 0.0), 10);
  EffectiveMassTensor inner = effective_mass_inner_product(edge);
  double a1d = scalar_inner_mass(10.0, 0.0);
  CHECK(std::abs(inner.A(0, 1)) < 1e-10);
  CHECK(std::abs(inner.A(1, 0)) < 1e-10);
  CHECK(inner.A(0, 0) == doctest::Approx(a1d).epsilon(1e-8));
  CHECK(inner.A(1, 1) == doctest::Approx(a1d).epsilon(1e-8));
  CHECK(inner.definiteness == EffectiveMassTensor::Definiteness::Positive);

  EffectiveMassTensor hess = effective_mass_hessian(
      v2, 0, Eigen::Vector2d(0.0, 0.0), 10);
  double scale = inner.A.cwiseAbs().maxCoeff();
  CHECK((inner.A - hess.A).cwiseAbs().maxCoeff() / scale < 1e-5);
}

TEST_CASE("mixed saddle edge of a separable potential is indefinite") {
  PeriodicPotential v2 = PeriodicPotential::cosine(2, {10.0, 10.0});
  // Band 0 at the corner (1/2, 0): down-curving along x, up-curving along y.
  BandEdge edge(v2, 0, Eigen::Vector2d(0.5, 0.0), 10);
  EffectiveMassTensor inner = effective_mass_inner_product(edge);
  CHECK(inner.definiteness == EffectiveMassTensor::Definiteness::Indefinite);
  CHECK(inner.eigenvalues.minCoeff() < 0.0);
  CHECK(inner.eigenvalues.maxCoeff() > 0.0);
  CHECK_THROWS_AS(inner.sign(), HypothesisError);

  HypothesisReport r = certify_hypotheses(edge, inner, {});
  CHECK(r.h2a);
  CHECK(r.h2b);
  CHECK_FALSE(r.h2c);
  CHECK(r.first_failure() == "H2(c)");
}

TEST_CASE("I - A is positive definite at the lowest edge") {
  double strong = scalar_inner_mass(10.0, 0.0);
  double weak = scalar_inner_mass(2.0, 0.0);
  CHECK(1.0 - strong > 0.0);
  CHECK(1.0 - weak > 0.0);
  // A perturbatively close to 1 for weak potentials: correction smaller.
  CHECK(1.0 - weak < 1.0 - strong);

  PeriodicPotential v2 = PeriodicPotential::cosine(2, {10.0, 4.0});
  BandEdge edge(v2, 0, Eigen::Vector2d(0.0, 0.0), 10);
  EffectiveMassTensor inner = effective_mass_inner_product(edge);
  CHECK(check_I_minus_A(inner) > 0.0);
}

TEST_CASE("hypothesis report on a certified pipeline") {
  PeriodicPotential v = PeriodicPotential::cosine(1, {10.0});
  BandEdge edge(v, 0, k1(0.0), 16);
  EffectiveMassTensor a = effective_mass_inner_product(edge);
  HomogenizedProblem problem(a, LocalizedPotential::sech_squared(1, -2.0, 1.0),
                             20.0, 0.05);
  std::vector<HomogenizedEigenpair> eigs = solve_homogenized(problem, 2);
  HypothesisReport r = certify_hypotheses(edge, a, eigs);
  CHECK(r.h2a);
  CHECK(r.h2b);
  CHECK(r.h2c);
  CHECK(r.h3);
  CHECK(r.all());
  CHECK(r.sign_times_e < 0.0);

  // No defect eigenpair available: H3 cannot hold (report-only path).
  HypothesisReport r0 = certify_hypotheses(edge, a, {});
  CHECK_FALSE(r0.h3);
}
