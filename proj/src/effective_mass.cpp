#include "bandgap/effective_mass.hpp"

#include <cmath>
#include <numbers>

#include "bandgap/homogenized.hpp"

namespace bandgap {

namespace {
constexpr double kEightPiSq = 8.0 * std::numbers::pi * std::numbers::pi;
}

int EffectiveMassTensor::sign() const {
  switch (definiteness) {
    case Definiteness::Positive:
      return +1;
    case Definiteness::Negative:
      return -1;
    case Definiteness::Indefinite:
      throw HypothesisError("H2(c)",
                            "effective mass tensor is not sign definite");
  }
  return 0;
}

EffectiveMassTensor EffectiveMassTensor::identity(int dimension) {
  return from_matrix(Eigen::MatrixXd::Identity(dimension, dimension),
                     Method::InnerProduct);
}

EffectiveMassTensor EffectiveMassTensor::from_matrix(const Eigen::MatrixXd& A,
                                                     Method m, double asymmetry,
                                                     const Tolerances& tol) {
  EffectiveMassTensor t;
  t.A = 0.5 * (A + A.transpose());
  t.method = m;
  t.asymmetry = std::max(asymmetry,
                         (A - A.transpose()).cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t.A);
  t.eigenvalues = es.eigenvalues();
  Eigen::MatrixXd ima =
      Eigen::MatrixXd::Identity(A.rows(), A.cols()) - t.A;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esi(ima);
  t.eigenvalues_I_minus_A = esi.eigenvalues();
  if (t.eigenvalues.minCoeff() > tol.definiteness) {
    t.definiteness = Definiteness::Positive;
  } else if (t.eigenvalues.maxCoeff() < -tol.definiteness) {
    t.definiteness = Definiteness::Negative;
  } else {
    t.definiteness = Definiteness::Indefinite;
  }
  return t;
}

EffectiveMassTensor effective_mass_inner_product(const BandEdge& edge) {
  const int d = edge.basis().dimension();
  const CellCoeffs& w = edge.w();
  std::vector<CellCoeffs> dw(d), inv_dw(d);
  for (int j = 0; j < d; ++j) {
    dw[j] = pw_derivative(edge.basis(), w, j);
    try {
      inv_dw[j] = edge.apply_deflated_inverse(dw[j]);
    } catch (const SolvabilityError& e) {
      throw HypothesisError(
          "H2", std::string("upstream solvability failure while forming the "
                            "effective mass tensor: ") +
                    e.what());
    }
  }
  Eigen::MatrixXd A(d, d);
  for (int j = 0; j < d; ++j) {
    for (int l = 0; l < d; ++l) {
      Complex corr = pw_inner(dw[j], inv_dw[l]);
      A(j, l) = (j == l ? 1.0 : 0.0) - 4.0 * corr.real();
    }
  }
  return EffectiveMassTensor::from_matrix(
      A, EffectiveMassTensor::Method::InnerProduct, 0.0, edge.tolerances());
}

EffectiveMassTensor effective_mass_hessian(const PeriodicPotential& V,
                                           int band,
                                           const Eigen::VectorXd& k_star,
                                           int pw_cutoff, double h,
                                           const Tolerances& tol) {
  Dispersion disp = dispersion_derivatives(V, band, k_star, pw_cutoff, h, tol);
  return EffectiveMassTensor::from_matrix(
      disp.hessian / kEightPiSq, EffectiveMassTensor::Method::Hessian,
      disp.asymmetry / kEightPiSq, tol);
}

double check_I_minus_A(const EffectiveMassTensor& A) {
  return A.eigenvalues_I_minus_A.minCoeff();
}

std::string HypothesisReport::first_failure() const {
  if (!h2a) return "H2(a)";
  if (!h2b) return "H2(b)";
  if (!h2c) return "H2(c)";
  if (!h3) return "H3";
  return "";
}

HypothesisReport certify_hypotheses(
    const BandEdge& edge, const EffectiveMassTensor& A,
    const std::vector<HomogenizedEigenpair>& homogenized_eigs) {
  HypothesisReport r;
  const Tolerances& tol = edge.tolerances();
  r.simplicity_gap = edge.simplicity_gap();
  r.gradient_residual = edge.gradient_residual();
  r.h2a = r.simplicity_gap > tol.simple(edge.energy());
  r.h2b = r.gradient_residual < tol.grad;
  r.a_eigenvalues = A.eigenvalues;
  r.h2c = A.is_definite();
  r.h3 = false;
  if (r.h2c) {
    int s = A.sign();
    for (const auto& pair : homogenized_eigs) {
      double se = s * pair.e;
      if (pair.discrete && se < 0.0) {
        r.h3 = true;
        r.sign_times_e = se;
        break;
      }
      if (!r.h3) r.sign_times_e = se;
    }
  }
  return r;
}

}  // namespace bandgap
