#include <doctest.h>

#include <cmath>
#include <random>

#include "bandgap/validator.hpp"
#include "oracles.hpp"

using namespace bandgap;

namespace {

constexpr double kPi2 = M_PI * M_PI;

Eigen::VectorXd k1(double v) {
  Eigen::VectorXd k(1);
  k[0] = v;
  return k;
}

struct Reference {
  PeriodicPotential V = PeriodicPotential::cosine(1, {10.0});
  LocalizedPotential Q = LocalizedPotential::gaussian(1, -2.0, 1.0);
  BandEdge edge{V, 0, k1(0.0), 16};
  EffectiveMassTensor A = effective_mass_inner_product(edge);
  HomogenizedProblem problem{A, Q, 20.0, 0.05};
  HomogenizedEigenpair ground = solve_homogenized(problem, 1)[0];

  double refined_e() const {
    double e1 = solve_homogenized(HomogenizedProblem(A, Q, 20.0, 0.01), 1)[0].e;
    double e2 =
        solve_homogenized(HomogenizedProblem(A, Q, 20.0, 0.005), 1)[0].e;
    return (4.0 * e2 - e1) / 3.0;
  }
};

}  // namespace

TEST_CASE("direct assembly: box modes, symmetry, budget") {
  PeriodicPotential v0 = PeriodicPotential::zero(1);
  LocalizedPotential q0 = LocalizedPotential::zero(1);
  for (int M : {5, 10}) {
    DirectGrid grid(1, M, 32, 2);
    Eigen::SparseMatrix<double> H =
        assemble_direct(DirectProblem(v0, q0, 0.1, grid));
    // Pure Dirichlet Laplacian: lowest eigenvalue near pi^2/(2M)^2.
    double expected = kPi2 / (4.0 * M * M);
    CHECK(eigencount_below(H, 0.9 * expected) == 0);
    CHECK(eigencount_below(H, 1.1 * expected) == 1);
  }

  for (int order : {2, 4}) {
    DirectGrid grid(1, 4, 24, order);
    Eigen::SparseMatrix<double> H = assemble_direct(
        DirectProblem(PeriodicPotential::cosine(1, {3.0}),
                      LocalizedPotential::gaussian(1, -1.0, 0.5), 0.2, grid));
    Eigen::SparseMatrix<double> D = Eigen::SparseMatrix<double>(H.transpose()) - H;
    CHECK(D.coeffs().cwiseAbs().maxCoeff() == 0.0);
  }

  DirectGrid big(1, 200, 64, 2);
  CHECK_THROWS_AS(
      assemble_direct(DirectProblem(v0, q0, 0.1, big, /*budget=*/1000)),
      DomainError);
}

TEST_CASE("weak defect on the free background scales exactly") {
  // For V = 0 the defect mode is F(eps x) with eigenvalue eps^2 e exactly.
  PeriodicPotential v0 = PeriodicPotential::zero(1);
  LocalizedPotential q = LocalizedPotential::sech_squared(1, -2.0, 1.0);
  double eps = 0.1;
  DirectGrid grid(1, 80, 32, 4);
  Eigen::SparseMatrix<double> H = assemble_direct(DirectProblem(v0, q, eps, grid));
  GapInterval gap;
  gap.upper = 0.0;
  gap.side = GapSide::Below;
  GapModeSearch found = find_gap_eigenvalues(H, grid, gap, -eps * eps, 1);
  REQUIRE(found.accepted.size() == 1);
  CHECK(std::abs(found.accepted[0].mu + eps * eps) < 0.05 * eps * eps);
  CHECK(found.accepted[0].boundary_mass < 1e-6);
}

TEST_CASE("no defect, no gap eigenvalue") {
  Reference r;
  std::vector<Eigen::VectorXd> ks;
  for (int i = 0; i <= 128; ++i) ks.push_back(k1(-0.5 + i / 128.0));
  BandStructure bands = solve_bands(r.V, ks, 3, 16);
  BandEdge top(r.V, 0, k1(0.5), 16);
  GapInterval gap = spectral_gap(bands, top, GapSide::Above);

  DirectGrid grid(1, 20, 32, 4);
  Eigen::SparseMatrix<double> H = assemble_direct(
      DirectProblem(r.V, LocalizedPotential::zero(1), 0.1, grid));
  double sigma = 0.5 * (*gap.lower + *gap.upper);
  GapModeSearch found = find_gap_eigenvalues(H, grid, gap, sigma, 2);
  CHECK(found.accepted.empty());
}

TEST_CASE("direction law and exhaustive slicing in the gap") {
  // Part 1: positive-definite A with a down-defect, mode below the edge.
  Reference r;
  double eps = 0.1;
  double e_ref = r.refined_e();
  GapInterval below;
  below.upper = r.edge.energy();
  below.side = GapSide::Below;
  int M = static_cast<int>(std::ceil(10.0 * std::sqrt(r.A.A(0, 0) /
                                                      std::abs(e_ref)) / eps));
  DirectGrid grid(1, M, 128, 4);
  Eigen::SparseMatrix<double> H =
      assemble_direct(DirectProblem(r.V, r.Q, eps, grid));
  double sigma = r.edge.energy() + eps * eps * e_ref;
  GapModeSearch found = find_gap_eigenvalues(H, grid, below, sigma, 2);
  REQUIRE_FALSE(found.accepted.empty());
  const GapMode& mode = found.accepted[0];
  CHECK(mode.mu < r.edge.energy());
  CHECK(below.contains(mode.mu));
  CHECK(mode.boundary_mass < 1e-6);
  // Exactly one eigenvalue in a window around sigma.
  double w = 0.5 * eps * eps * std::abs(e_ref);
  CHECK(eigencount_below(H, std::min(sigma + w, r.edge.energy() - 1e-9)) -
            eigencount_below(H, sigma - w) ==
        1);
  // Rayleigh quotient self-consistency at the computed eigenvector.
  CHECK(std::abs(rayleigh_quotient(mode.u, H, r.edge.energy()) -
                 (mode.mu - r.edge.energy())) < 1e-8);

  // Part 2: negative-definite A with an up-defect, mode above the edge.
  BandEdge top(r.V, 0, k1(0.5), 16);
  EffectiveMassTensor At = effective_mass_inner_product(top);
  CHECK(At.sign() == -1);
  LocalizedPotential qup = LocalizedPotential::gaussian(1, 2.0, 1.0);
  HomogenizedProblem ptop(At, qup, 20.0, 0.05);
  HomogenizedEigenpair gtop = solve_homogenized(ptop, 1)[0];
  CHECK(gtop.e > 0.0);
  std::vector<Eigen::VectorXd> ks;
  for (int i = 0; i <= 128; ++i) ks.push_back(k1(-0.5 + i / 128.0));
  GapInterval above = spectral_gap(solve_bands(r.V, ks, 3, 16), top,
                                   GapSide::Above);
  int Mt = static_cast<int>(
      std::ceil(10.0 * std::sqrt(std::abs(At.A(0, 0)) / gtop.e) / eps));
  DirectGrid gt(1, Mt, 128, 4);
  Eigen::SparseMatrix<double> Ht =
      assemble_direct(DirectProblem(r.V, qup, eps, gt));
  double sigma_t = top.energy() + eps * eps * gtop.e;
  GapModeSearch ft = find_gap_eigenvalues(Ht, gt, above, sigma_t, 2);
  REQUIRE_FALSE(ft.accepted.empty());
  CHECK(ft.accepted[0].mu > top.energy());
  CHECK(above.contains(ft.accepted[0].mu));
}

TEST_CASE("rayleigh quotient domain and variational bound") {
  Reference r;
  DirectGrid grid(1, 10, 32, 4);
  Eigen::SparseMatrix<double> H =
      assemble_direct(DirectProblem(r.V, r.Q, 0.2, grid));
  CHECK_THROWS_AS(
      rayleigh_quotient(Eigen::VectorXd::Zero(grid.size()), H, 0.0),
      DomainError);

  GapInterval below;
  below.upper = r.edge.energy();
  below.side = GapSide::Below;
  GapModeSearch found = find_gap_eigenvalues(
      H, grid, below, r.edge.energy() + 0.04 * r.ground.e, 1);
  REQUIRE_FALSE(found.accepted.empty());
  double mu_min = found.accepted[0].mu;
  std::mt19937 rng(5);
  std::normal_distribution<double> g;
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd u(grid.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = g(rng);
    CHECK(rayleigh_quotient(u, H, r.edge.energy()) >=
          mu_min - r.edge.energy() - 1e-12);
  }
}

TEST_CASE("convergence study on the reference pipeline") {
  Reference r;
  MultiscaleExpansion exp(r.edge, r.problem, r.ground, 4);
  std::vector<Eigen::VectorXd> ks;
  for (int i = 0; i <= 128; ++i) ks.push_back(k1(-0.5 + i / 128.0));
  GapInterval gap = spectral_gap(solve_bands(r.V, ks, 3, 16), r.edge,
                                 GapSide::Below);
  StudyOptions opts;
  opts.n_per_cell = 256;
  opts.domain_scale = 12.0;
  opts.e_reference = r.refined_e();
  ConvergenceReport rep =
      convergence_study(exp, gap, {0.2, 0.1, 0.07}, 4, opts);

  CHECK(rep.monotone);
  CHECK_FALSE(rep.at_floor);
  CHECK(rep.slope_order2 > 2.5);
  CHECK(rep.slope_order2 < 4.5);
  CHECK(rep.slope_order3 >= 3.5);
  CHECK(rep.resolution_ok);
  for (const auto& row : rep.rows) {
    CHECK(row.rayleigh_check < 1e-8);
    CHECK(row.overlap > 0.99);
    CHECK(gap.contains(row.mu_direct));
    // The truncation residual stays well below the order-2 level.
    CHECK(row.residual < 1e-3);
  }
  // At order 4 the eigenfunction comparison sits at the envelope grid's
  // own discretization floor; the eigenvalue slopes above carry the ladder.
  CHECK(rep.rows[2].eigenfunction_err < 1e-3);

  CHECK_THROWS_AS(convergence_study(exp, gap, {0.2, 0.1}, 4, opts),
                  ConfigError);
  CHECK_THROWS_AS(convergence_study(exp, gap, {0.1, 0.2, 0.3}, 4, opts),
                  ConfigError);
}

TEST_CASE("variational chain at the lowest edge") {
  Reference r;
  HomogenizedProblem pi(EffectiveMassTensor::identity(1), r.Q, 20.0, 0.05);
  HomogenizedEigenpair gi = solve_homogenized(pi, 1)[0];
  StudyOptions opts;
  opts.n_per_cell = 96;
  VariationalChain ch = variational_chain(r.edge, r.problem, r.ground, gi,
                                          0.1, opts);
  CHECK(ch.holds);
  CHECK(ch.energy_two_term < ch.energy_one_term);
  CHECK(ch.energy_one_term < 0.0);
  // The scaled energies approach the homogenized eigenvalues.
  CHECK(std::abs(ch.energy_two_term / 0.01 - r.ground.e) <
        0.05 * std::abs(r.ground.e));
  CHECK(std::abs(ch.energy_one_term / 0.01 - gi.e) < 0.05 * std::abs(gi.e));
}

TEST_CASE("averaging errors decay with the envelope smoothness") {
  PeriodicPotential p = PeriodicPotential::cosine(1, {1.0});

  // Mean mode only: the two quadratures coincide exactly.
  std::map<WaveIndex, Complex> c;
  c[{0, 0, 0}] = 1.0;
  AveragingReport flat = averaging_check(
      PeriodicPotential(1, 0, c), [](double y) { return std::exp(-0.5 * y * y); },
      8.58, {0.5, 0.4, 0.3});
  for (double e : flat.error) CHECK(e == 0.0);

  // Gaussian envelope: superalgebraic decay while measurable, then floor.
  AveragingReport smooth = averaging_check(
      p, [](double y) { return std::exp(-0.5 * y * y); }, 8.58,
      {2.0, 1.5, 1.2});
  CHECK(smooth.slope > 6.0);
  AveragingReport floored = averaging_check(
      p, [](double y) { return std::exp(-0.5 * y * y); }, 8.58, {0.5, 0.4});
  for (double e : floored.error) CHECK(e < 1e-13);

  // C^2 bump with a third-derivative jump: algebraic slope near 3.
  AveragingReport bump =
      averaging_check(p, oracles::c2_bump, 1.0, {0.5, 0.35, 0.25});
  CHECK(bump.slope >= 2.0);
  CHECK(bump.slope < 3.5);
}
