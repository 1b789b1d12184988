#include <doctest.h>

#include <cmath>

#include "bandgap/multiscale.hpp"
#include "oracles.hpp"

using namespace bandgap;

namespace {

struct Pipeline {
  PeriodicPotential V;
  BandEdge edge;
  EffectiveMassTensor A;
  HomogenizedProblem problem;
  HomogenizedEigenpair ground;

  Pipeline(PeriodicPotential v, const Eigen::VectorXd& kstar,
           LocalizedPotential q, double half_width = 20.0,
           double spacing = 0.05)
      : V(std::move(v)),
        edge(V, 0, kstar, 16),
        A(effective_mass_inner_product(edge)),
        problem(A, std::move(q), half_width, spacing),
        ground(solve_homogenized(problem, 1)[0]) {}
};

Pipeline reference_pipeline() {
  return Pipeline(PeriodicPotential::cosine(1, {10.0}),
                  Eigen::VectorXd::Zero(1),
                  LocalizedPotential::gaussian(1, -2.0, 1.0));
}

// Test-local composition helpers, independent of the builder's bookkeeping.
TwoScaleSum test_gdg(const TwoScaleSum& terms, const PlaneWaveBasis& basis,
                     const BoxGrid& grid) {
  TwoScaleSum out;
  for (const auto& t : terms) {
    for (int j = 0; j < basis.dimension(); ++j) {
      out.push_back({std::make_shared<CellCoeffs>(
                         pw_derivative(basis, *t.cell, j)),
                     2.0 * (grid.d1(j) * t.env),
                     {0, 0, 0}});
    }
  }
  return out;
}

TwoScaleSum test_yop(const TwoScaleSum& terms, const BoxGrid& grid,
                     const Eigen::VectorXd& q_samples, double shift) {
  TwoScaleSum out;
  for (const auto& t : terms) {
    Eigen::VectorXd env = q_samples.cwiseProduct(t.env) - shift * t.env;
    for (int j = 0; j < grid.dimension(); ++j) env -= grid.d2(j, j) * t.env;
    out.push_back({t.cell, env, {0, 0, 0}});
  }
  return out;
}

void append_scaled(TwoScaleSum& dst, const TwoScaleSum& src, double s) {
  for (const auto& t : src) dst.push_back({t.cell, s * t.env, t.env_dindex});
}

}  // namespace

TEST_CASE("free-particle expansion collapses to the leading order") {
  PeriodicPotential v0 = PeriodicPotential::zero(1);
  Pipeline p(v0, Eigen::VectorXd::Zero(1),
             LocalizedPotential::sech_squared(1, -2.0, 1.0));
  MultiscaleExpansion exp(p.edge, p.problem, p.ground, 4);
  CHECK(std::abs(exp.mu(1)) < 1e-14);
  CHECK(std::abs(exp.mu(2) - p.ground.e) < 1e-12);
  CHECK(std::abs(exp.mu(3)) < 1e-12);
  CHECK(std::abs(exp.mu(4)) < 1e-12);
  CHECK(two_scale_norm(exp.order_terms(0), p.problem.grid) ==
        doctest::Approx(1.0).epsilon(1e-10));
  for (int n = 1; n <= 4; ++n) {
    CHECK(two_scale_norm(exp.order_terms(n), p.problem.grid) < 1e-9);
  }
  // mu^{(N)} = E_* + eps^2 e exactly in the collapsed expansion.
  for (double eps : {0.2, 0.1, 0.05}) {
    CHECK(std::abs(exp.mu_of(eps, 4) - (p.edge.energy() + eps * eps * p.ground.e)) <
          1e-13);
  }
  // The sampled approximation is the envelope itself (w = 1).
  std::vector<Eigen::VectorXd> pts;
  for (double x : {-3.0, 0.0, 1.7, 12.3}) {
    pts.push_back(Eigen::VectorXd::Constant(1, x));
  }
  Eigen::VectorXd s = exp.sample(0.1, 4, pts);
  for (size_t i = 0; i < pts.size(); ++i) {
    CHECK(s[static_cast<Eigen::Index>(i)] ==
          doctest::Approx(interpolate_envelope(p.problem.grid, p.ground.F,
                                               0.1 * pts[i]))
              .epsilon(1e-9));
  }
}

TEST_CASE("reference expansion: eigenvalue corrections and ledger") {
  Pipeline p = reference_pipeline();
  MultiscaleExpansion exp(p.edge, p.problem, p.ground, 4);

  // mu_1 = 0 witnessed by the vanishing solvability integrals.
  CHECK(exp.mu1_witness().maxCoeff() < 1e-10);
  CHECK(exp.mu(1) == 0.0);
  // mu_2 reproduces the homogenized eigenvalue.
  CHECK(std::abs(exp.mu(2) - p.ground.e) < 1e-7);
  // mu_3 vanishes (deflated-inverse range and antisymmetric contraction).
  CHECK(std::abs(exp.mu(3)) < 1e-10);
  // mu_4 is genuinely nonzero and reproducible; its value is cross-checked
  // against the direct eigensolve in the acceptance suite.
  CHECK(exp.mu(4) == doctest::Approx(-0.0031370571685).epsilon(1e-4));

  // Defining-equation residuals and the Fredholm defect ledger.
  CHECK(exp.max_order_residual() < 1e-6);
  CHECK(exp.max_solvability_defect() < 1e-7);
  CHECK(exp.log(0).residual < 1e-8);

  // F_1 vanishes and is orthogonal to F_0 either way.
  CHECK(p.problem.grid.norm(exp.envelope(1)) < 1e-9);
  CHECK(std::abs(p.problem.grid.inner(exp.envelope(0), exp.envelope(1))) <
        1e-9);

  // Term counts stay bounded and norms finite.
  for (int n = 0; n <= 4; ++n) {
    CHECK(exp.log(n).term_count <= 16);
    double norm = two_scale_norm(exp.order_terms(n), p.problem.grid);
    CHECK(std::isfinite(norm));
  }
}

TEST_CASE("first-order cell factor matches the quadrature formula") {
  Pipeline p = reference_pipeline();
  MultiscaleExpansion exp(p.edge, p.problem, p.ground, 2);

  // U_1 = 2 (deflated inverse){w'} x d_y F_0; extract the cell factor.
  const TwoScaleSum& u1 = exp.order_terms(1);
  REQUIRE(u1.size() == 1);

  auto w_eval = [&](double x) {
    Eigen::VectorXd xv(1);
    xv[0] = x;
    return pw_eval(p.edge.basis(), p.edge.w(), xv).real();
  };
  CHECK(w_eval(0.0) > 0.0);  // ground state in the positive gauge

  std::vector<double> xs;
  for (int i = 0; i < 97; ++i) xs.push_back(i / 97.0);
  Eigen::VectorXd expected = oracles::first_order_cell_solution(w_eval, xs);

  Eigen::VectorXd got(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    Eigen::VectorXd xv(1);
    xv[0] = xs[i];
    got[static_cast<Eigen::Index>(i)] =
        2.0 * pw_eval(p.edge.basis(), *u1[0].cell, xv).real();
  }
  CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("asymmetric potentials: corrections stay consistent") {
  std::map<WaveIndex, Complex> c;
  c[{1, 0, 0}] = 5.0;
  c[{-1, 0, 0}] = 5.0;
  c[{2, 0, 0}] = Complex(0.0, -1.5);  // 3 sin(4 pi x)
  c[{-2, 0, 0}] = Complex(0.0, 1.5);
  std::vector<LocalizedPotential::Component> parts(2);
  parts[0] = {-2.0, 1.0, Eigen::VectorXd::Zero(1)};
  parts[1] = {-1.0, 0.8, Eigen::VectorXd::Constant(1, 1.3)};
  Pipeline p(PeriodicPotential(1, 2, c), Eigen::VectorXd::Zero(1),
             LocalizedPotential::sum_of_gaussians(1, parts));
  MultiscaleExpansion exp(p.edge, p.problem, p.ground, 4);
  // Even without any symmetry the third-order correction vanishes
  // identically (measured; see the fourth-order coefficient instead).
  CHECK(std::abs(exp.mu(3)) < 1e-10);
  CHECK(std::abs(exp.mu(4)) > 1e-4);
  CHECK(exp.max_order_residual() < 1e-6);
  CHECK(exp.max_solvability_defect() < 1e-7);
}

TEST_CASE("antiperiodic edge expansion (k* = 1/2, up-defect)") {
  Eigen::VectorXd kh(1);
  kh[0] = 0.5;
  Pipeline p(PeriodicPotential::cosine(1, {10.0}), kh,
             LocalizedPotential::gaussian(1, 2.0, 1.0));
  CHECK(p.A.A(0, 0) < 0.0);
  CHECK(p.ground.e > 0.0);
  CHECK(p.ground.discrete);
  MultiscaleExpansion exp(p.edge, p.problem, p.ground, 3);
  CHECK(exp.mu1_witness().maxCoeff() < 1e-10);
  CHECK(std::abs(exp.mu(2) - p.ground.e) < 1e-7);
  CHECK(std::abs(exp.mu(3)) < 1e-10);
  CHECK(exp.max_order_residual() < 1e-6);
}

TEST_CASE("order-4 right-hand side recomposed independently") {
  Pipeline p = reference_pipeline();
  MultiscaleExpansion exp(p.edge, p.problem, p.ground, 4);
  const BoxGrid& grid = p.problem.grid;
  const PlaneWaveBasis& basis = p.edge.basis();
  Eigen::VectorXd q = grid.sample(p.problem.Q);
  const double e = exp.mu(2);

  // RHS_4 from the defining hierarchy, composed here from the finalized
  // orders without the builder's incremental bookkeeping.  The second
  // derivative of the gradient-envelope piece pairs into the assembled
  // stencil, as in the solvability elimination.
  TwoScaleSum rhs;
  {
    // 2 grad.grad U_3: homogeneous envelope F_3 = 0 (closure), gradient
    // envelope uses F_2, particular part W_3 generic.
    for (int j = 0; j < 1; ++j) {
      for (int l = 0; l < 1; ++l) {
        CellCoeffs cell = pw_derivative(
            basis, p.edge.apply_deflated_inverse(
                       pw_derivative(basis, p.edge.w(), l)),
            j);
        rhs.push_back({std::make_shared<CellCoeffs>(cell),
                       4.0 * (grid.d2(j, l) * exp.envelope(2)),
                       {0, 0, 0}});
      }
    }
    append_scaled(rhs, test_gdg(exp.particular_terms(3), basis, grid), 1.0);
    // -[-Lap + Q - mu_2] U_2 with U_2 = w F_2 + gradenv(F_1 = 0) + W_2.
    TwoScaleSum u2 = exp.particular_terms(2);
    u2.push_back({std::make_shared<CellCoeffs>(p.edge.w()), exp.envelope(2),
                  {0, 0, 0}});
    append_scaled(rhs, test_yop(u2, grid, q, e), -1.0);
    // mu_3 U_1 + mu_4 U_0.
    append_scaled(rhs, exp.order_terms(1), exp.mu(3));
    append_scaled(rhs, exp.order_terms(0), exp.mu(4));
  }

  // L_* U_4 against the recomposed right-hand side.
  TwoScaleSum lhs;
  for (const auto& t : exp.order_terms(4)) {
    lhs.push_back({std::make_shared<CellCoeffs>(
                       p.edge.shifted_matrix() * *t.cell),
                   t.env,
                   {0, 0, 0}});
  }
  double scale = two_scale_norm(rhs, grid);
  append_scaled(lhs, rhs, -1.0);
  CHECK(two_scale_norm(lhs, grid) < 1e-6 * scale);
}

TEST_CASE("nonseparable 2D expansion stays consistent through order 4") {
  // Couples the axes so the cross-derivative envelope terms carry data.
  std::map<WaveIndex, Complex> c;
  c[{1, 0, 0}] = 5.0;
  c[{-1, 0, 0}] = 5.0;
  c[{0, 1, 0}] = 5.0;
  c[{0, -1, 0}] = 5.0;
  c[{1, 1, 0}] = 1.5;
  c[{-1, -1, 0}] = 1.5;
  PeriodicPotential v(2, 1, c);
  BandEdge edge(v, 0, Eigen::Vector2d(0.0, 0.0), 8);
  EffectiveMassTensor a = effective_mass_inner_product(edge);
  CHECK(a.definiteness == EffectiveMassTensor::Definiteness::Positive);
  CHECK(std::abs(a.A(0, 1)) > 1e-6);  // genuinely coupled

  LocalizedPotential q = LocalizedPotential::gaussian(2, -3.0, 1.6);
  HomogenizedProblem problem(a, q, 8.0, 0.1);
  HomogenizedEigenpair ground = solve_homogenized(problem, 1)[0];
  CHECK(ground.discrete);

  MultiscaleExpansion exp(edge, problem, ground, 4);
  CHECK(exp.mu1_witness().maxCoeff() < 1e-10);
  CHECK(std::abs(exp.mu(2) - ground.e) < 1e-7);
  CHECK(std::abs(exp.mu(3)) < 1e-9);
  CHECK(std::abs(exp.mu(4)) > 1e-6);
  CHECK(exp.max_order_residual() < 1e-6);
  CHECK(exp.max_solvability_defect() < 1e-7);
}

TEST_CASE("residual of the assembled approximation follows the ladder") {
  Pipeline p = reference_pipeline();
  MultiscaleExpansion exp(p.edge, p.problem, p.ground, 2);
  double r1 = exp.residual_norm(0.2, 2);
  double r2 = exp.residual_norm(0.1, 2);
  double ratio = r1 / r2;  // eps^3 ladder: ratio 8 under halving
  CHECK(ratio > 6.0);
  CHECK(ratio < 10.0);
}

TEST_CASE("domain rules") {
  Pipeline p = reference_pipeline();
  MultiscaleExpansion exp(p.edge, p.problem, p.ground, 2);
  CHECK_THROWS_AS(exp.mu_of(0.0, 2), DomainError);
  CHECK_THROWS_AS(exp.mu_of(-0.1, 2), DomainError);
  CHECK_THROWS_AS(exp.sample(0.0, 2, {}), DomainError);
  CHECK_THROWS_AS(exp.residual_norm(0.0, 2), DomainError);
  CHECK_THROWS_AS(MultiscaleExpansion(p.edge, p.problem, p.ground, 1),
                  DomainError);
  CHECK_THROWS_AS(MultiscaleExpansion(p.edge, p.problem, p.ground, 7),
                  DomainError);

  // Non-discrete eigenpair is rejected up front.
  HomogenizedEigenpair fake = p.ground;
  fake.discrete = false;
  CHECK_THROWS_AS(MultiscaleExpansion(p.edge, p.problem, fake, 2),
                  HypothesisError);
}
