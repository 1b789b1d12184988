#include "bandgap/validator.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>

namespace bandgap {

DirectGrid::DirectGrid(int dimension, int cells_half_width, int n_per_cell,
                       int fd_order)
    : dim_(dimension),
      M_(cells_half_width),
      n_cell_(n_per_cell),
      fd_order_(fd_order) {
  if (dimension < 1 || dimension > 3) {
    throw DomainError("direct grid dimension must be 1, 2 or 3");
  }
  if (cells_half_width < 1) throw DomainError("domain must cover >= 1 cell");
  if (n_per_cell < 16) {
    throw DomainError("need >= 16 points per cell on the direct grid");
  }
  if (fd_order != 2 && fd_order != 4) {
    throw DomainError("finite-difference order must be 2 or 4");
  }
  h_ = 1.0 / n_cell_;
  n_ = 2 * M_ * n_cell_ - 1;
  size_ = 1;
  for (int j = 0; j < dim_; ++j) size_ *= n_;
  stride_[dim_ - 1] = 1;
  for (int j = dim_ - 2; j >= 0; --j) stride_[j] = stride_[j + 1] * n_;
}

Eigen::VectorXd DirectGrid::node(Eigen::Index flat) const {
  Eigen::VectorXd x(dim_);
  for (int j = 0; j < dim_; ++j) {
    int i = static_cast<int>(flat / stride_[j]);
    flat %= stride_[j];
    x[j] = -M_ + (i + 1) * h_;
  }
  return x;
}

std::vector<Eigen::VectorXd> DirectGrid::nodes() const {
  std::vector<Eigen::VectorXd> out(size_);
  for (Eigen::Index i = 0; i < size_; ++i) out[i] = node(i);
  return out;
}

double DirectGrid::quad_weight() const {
  double w = 1.0;
  for (int j = 0; j < dim_; ++j) w *= h_;
  return w;
}

double DirectGrid::boundary_mass(const Eigen::VectorXd& u) const {
  if (u.size() != size_) throw ShapeError("grid function size mismatch");
  const double shell = 0.9 * M_;
  double inside = 0.0;
  for (Eigen::Index i = 0; i < size_; ++i) {
    if (node(i).cwiseAbs().maxCoeff() > shell) inside += u[i] * u[i];
  }
  return quad_weight() * inside;
}

DirectProblem::DirectProblem(PeriodicPotential v, LocalizedPotential q,
                             double eps_, DirectGrid g, Eigen::Index budget)
    : V(std::move(v)), Q(std::move(q)), eps(eps_), grid(std::move(g)),
      memory_budget(budget) {
  if (eps <= 0.0) throw DomainError("eps must be positive");
  if (V.dimension() != grid.dimension() || Q.dimension() != grid.dimension()) {
    throw ShapeError("potential dimensions do not match the grid");
  }
}

Eigen::SparseMatrix<double> assemble_direct(const DirectProblem& p) {
  const DirectGrid& g = p.grid;
  if (g.size() > p.memory_budget) {
    throw DomainError("direct matrix would need " + std::to_string(g.size()) +
                      " unknowns; budget is " +
                      std::to_string(p.memory_budget) +
                      " (raise the budget or shrink the grid)");
  }
  const int d = g.dimension();
  const int n = g.nodes_per_dim();
  const double h2 = g.spacing() * g.spacing();
  Eigen::Index stride[3] = {1, 1, 1};
  for (int j = d - 2; j >= 0; --j) {
    stride[j] = stride[j + 1] * n;
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve((2 * d * (g.fd_order() == 4 ? 2 : 1) + 1) * g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    Eigen::VectorXd x = g.node(i);
    double diag = p.V(x) + p.eps * p.eps * p.Q(p.eps * x);
    for (int j = 0; j < d; ++j) {
      int ij = static_cast<int>((i / stride[j]) % n);
      if (g.fd_order() == 2) {
        diag += 2.0 / h2;
        if (ij + 1 < n) trip.emplace_back(i, i + stride[j], -1.0 / h2);
        if (ij - 1 >= 0) trip.emplace_back(i, i - stride[j], -1.0 / h2);
      } else {
        diag += 30.0 / (12.0 * h2);
        if (ij + 1 < n) trip.emplace_back(i, i + stride[j], -16.0 / (12.0 * h2));
        if (ij - 1 >= 0) trip.emplace_back(i, i - stride[j], -16.0 / (12.0 * h2));
        if (ij + 2 < n) trip.emplace_back(i, i + 2 * stride[j], 1.0 / (12.0 * h2));
        if (ij - 2 >= 0) trip.emplace_back(i, i - 2 * stride[j], 1.0 / (12.0 * h2));
      }
    }
    trip.emplace_back(i, i, diag);
  }
  Eigen::SparseMatrix<double> H(g.size(), g.size());
  H.setFromTriplets(trip.begin(), trip.end());
  H.makeCompressed();
  return H;
}

namespace {

Eigen::MatrixXd deterministic_block(Eigen::Index n, int p) {
  Eigen::MatrixXd X(n, p);
  X.col(0).setOnes();
  for (int q = 1; q < p; ++q) {
    for (Eigen::Index i = 0; i < n; ++i) {
      X(i, q) = std::sin(0.61803398875 * (q + 1) * (i + 1) + 0.1 * q);
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
}

}  // namespace

GapModeSearch find_gap_eigenvalues(const Eigen::SparseMatrix<double>& H,
                                   const DirectGrid& grid,
                                   const GapInterval& gap, double sigma,
                                   int n_want) {
  const Eigen::Index n = H.rows();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  double shift = sigma;
  for (int attempt = 0;; ++attempt) {
    Eigen::SparseMatrix<double> shifted = H;
    for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= shift;
    shifted.makeCompressed();
    lu.compute(shifted);
    if (lu.info() == Eigen::Success) break;
    if (attempt >= 3) {
      throw SolverError("shift-invert factorization failed near sigma = " +
                        std::to_string(sigma));
    }
    shift += 1e-8 * std::max(1.0, std::abs(sigma));
  }

  const int block = std::min<Eigen::Index>(n, n_want + 2);
  Eigen::MatrixXd X = deterministic_block(n, block);
  Eigen::VectorXd ritz_prev = Eigen::VectorXd::Constant(block, 1e30);
  Eigen::VectorXd ritz;
  Eigen::MatrixXd vectors;
  for (int it = 0; it < 60; ++it) {
    X = lu.solve(X);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    X = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
    Eigen::MatrixXd HX = H * X;
    Eigen::MatrixXd small = X.transpose() * HX;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(small);
    // Order Ritz pairs by distance to the shift.
    std::vector<int> order(block);
    for (int q = 0; q < block; ++q) order[q] = q;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return std::abs(es.eigenvalues()[a] - shift) <
             std::abs(es.eigenvalues()[b] - shift);
    });
    Eigen::MatrixXd rot(block, block);
    ritz.resize(block);
    for (int q = 0; q < block; ++q) {
      rot.col(q) = es.eigenvectors().col(order[q]);
      ritz[q] = es.eigenvalues()[order[q]];
    }
    X = X * rot;
    vectors = X;
    double scale = std::max(1.0, ritz.cwiseAbs().maxCoeff());
    if (it >= 2 && (ritz - ritz_prev).cwiseAbs().maxCoeff() < 1e-11 * scale) {
      break;
    }
    ritz_prev = ritz;
  }

  GapModeSearch out;
  for (int q = 0; q < block && static_cast<int>(out.accepted.size()) < n_want;
       ++q) {
    double mu = ritz[q];
    if (!gap.contains(mu)) continue;
    Eigen::VectorXd v = vectors.col(q);
    double res = (H * v - mu * v).norm() / std::max(1.0, std::abs(mu));
    if (res > 1e-7) continue;  // unconverged Ritz directions are skipped
    double bm = grid.boundary_mass(v / (std::sqrt(grid.quad_weight()) * v.norm()));
    if (bm > 1e-3) {
      ++out.discarded_spurious;
      continue;
    }
    GapMode m;
    m.mu = mu;
    m.u = v / (std::sqrt(grid.quad_weight()) * v.norm());
    if (m.u.sum() < 0.0) m.u = -m.u;
    m.boundary_mass = bm;
    m.residual = res;
    out.accepted.push_back(std::move(m));
  }
  std::sort(out.accepted.begin(), out.accepted.end(),
            [&](const GapMode& a, const GapMode& b) {
              return std::abs(a.mu - sigma) < std::abs(b.mu - sigma);
            });
  return out;
}

Eigen::Index eigencount_below(const Eigen::SparseMatrix<double>& H,
                              double sigma) {
  double shift = sigma;
  for (int attempt = 0;; ++attempt) {
    Eigen::SparseMatrix<double> shifted = H;
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
      shifted.coeffRef(i, i) -= shift;
    }
    shifted.makeCompressed();
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted);
    if (ldlt.info() == Eigen::Success) {
      Eigen::VectorXd D = ldlt.vectorD();
      Eigen::Index count = 0;
      bool clean = true;
      for (Eigen::Index i = 0; i < D.size(); ++i) {
        if (!std::isfinite(D[i]) || D[i] == 0.0) {
          clean = false;
          break;
        }
        if (D[i] < 0.0) ++count;
      }
      if (clean) return count;
    }
    if (attempt >= 3) {
      throw SolverError("inertia count failed near sigma = " +
                        std::to_string(sigma));
    }
    shift += 1e-8 * std::max(1.0, std::abs(sigma));
  }
}

double rayleigh_quotient(const Eigen::VectorXd& u,
                         const Eigen::SparseMatrix<double>& H, double e_ref) {
  double nn = u.squaredNorm();
  if (nn == 0.0) throw DomainError("Rayleigh quotient of the zero vector");
  return u.dot(H * u) / nn - e_ref;
}

double fit_slope(const std::vector<double>& eps, const std::vector<double>& err,
                 double floor) {
  std::vector<double> lx, ly;
  for (size_t i = 0; i < eps.size(); ++i) {
    if (err[i] > floor) {
      lx.push_back(std::log(eps[i]));
      ly.push_back(std::log(err[i]));
    }
  }
  if (lx.size() < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= lx.size();
  my /= ly.size();
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  return sxy / sxx;
}

namespace {

// Domain half-width in whole cells: domain_scale times the envelope decay
// length, inflated by 1/eps.
int domain_cells(const MultiscaleExpansion& exp, double eps, double scale) {
  const EffectiveMassTensor& A = exp.problem().A;
  double a_min = A.eigenvalues.cwiseAbs().minCoeff();
  double decay_length = std::sqrt(a_min / std::abs(exp.ground().e));
  int M = static_cast<int>(std::ceil(scale * decay_length / eps));
  return std::max(M, 2);
}

struct DirectSolve {
  double mu;
  Eigen::VectorXd u;
  DirectGrid grid;
  Eigen::SparseMatrix<double> H;
  double rayleigh_check;
};

DirectSolve solve_one(const MultiscaleExpansion& exp, const GapInterval& gap,
                      double eps, int n_per_cell, const StudyOptions& opts) {
  const BandEdge& edge = exp.edge();
  DirectGrid grid(edge.basis().dimension(), domain_cells(exp, eps, opts.domain_scale),
                  n_per_cell, opts.fd_order);
  DirectProblem prob(edge.potential(), exp.problem().Q, eps, grid,
                     opts.memory_budget);
  Eigen::SparseMatrix<double> H = assemble_direct(prob);
  double e_hom = opts.e_reference.value_or(exp.ground().e);
  double sigma = edge.energy() + eps * eps * e_hom;
  GapModeSearch search = find_gap_eigenvalues(H, grid, gap, sigma, 2);
  if (search.accepted.empty()) {
    throw SolverError("no gap eigenvalue found near sigma = " +
                      std::to_string(sigma) + " at eps = " +
                      std::to_string(eps));
  }
  DirectSolve out{search.accepted[0].mu, search.accepted[0].u, grid,
                  std::move(H), 0.0};
  out.rayleigh_check = std::abs(
      rayleigh_quotient(out.u, out.H, edge.energy()) -
      (out.mu - edge.energy()));
  return out;
}

}  // namespace

ConvergenceReport convergence_study(const MultiscaleExpansion& expansion,
                                    const GapInterval& gap,
                                    const std::vector<double>& eps_list,
                                    int order, const StudyOptions& opts) {
  if (eps_list.size() < 3) {
    throw ConfigError("convergence study needs >= 3 eps values");
  }
  for (size_t i = 0; i < eps_list.size(); ++i) {
    if (eps_list[i] <= 0.0 ||
        (i + 1 < eps_list.size() && eps_list[i + 1] >= eps_list[i])) {
      throw ConfigError("eps list must be strictly positive and decreasing");
    }
  }
  const BandEdge& edge = expansion.edge();
  const double e_hom = opts.e_reference.value_or(expansion.ground().e);
  // Replacing the grid eigenvalue by the refined one shifts every truncated
  // eigenvalue series by the same eps^2 amount.
  const double e_shift = e_hom - expansion.ground().e;

  ConvergenceReport report;
  for (double eps : eps_list) {
    DirectSolve sol = solve_one(expansion, gap, eps, opts.n_per_cell, opts);
    ConvergenceRow row;
    row.eps = eps;
    row.cells_half_width = sol.grid.cells_half_width();
    row.mu_direct = sol.mu;
    row.mu_n = expansion.mu_of(eps, order) + eps * eps * e_shift;
    row.err_order2 = std::abs(sol.mu - (edge.energy() + eps * eps * e_hom));
    row.err_order3 = std::abs(
        sol.mu - expansion.mu_of(eps, std::min(order, 3)) -
        eps * eps * e_shift);
    row.rayleigh_check = sol.rayleigh_check;

    Eigen::VectorXd approx =
        expansion.sample(eps, order, sol.grid.nodes());
    double an = sol.grid.norm(approx);
    if (an > 0.0) approx /= an;
    double overlap = sol.grid.quad_weight() * sol.u.dot(approx);
    if (overlap < 0.0) {
      approx = -approx;
      overlap = -overlap;
    }
    row.overlap = overlap;
    row.eigenfunction_err = sol.grid.norm(sol.u - approx);
    row.residual = expansion.residual_norm(eps, order);
    report.rows.push_back(row);
  }

  for (size_t i = 1; i < report.rows.size(); ++i) {
    if (report.rows[i].err_order2 > report.rows[i - 1].err_order2) {
      report.monotone = false;
    }
  }
  std::vector<double> eps_v, e2, e3, ef, rs;
  for (const auto& r : report.rows) {
    eps_v.push_back(r.eps);
    e2.push_back(r.err_order2);
    e3.push_back(r.err_order3);
    ef.push_back(r.eigenfunction_err);
    rs.push_back(r.residual);
  }
  const double floor = 1e-13 * std::max(1.0, std::abs(edge.energy()));
  report.at_floor =
      *std::max_element(e2.begin(), e2.end()) <= 10.0 * floor;
  report.slope_order2 = fit_slope(eps_v, e2, floor);
  report.slope_order3 = fit_slope(eps_v, e3, floor);
  report.slope_eigenfunction = fit_slope(eps_v, ef, floor);
  report.slope_residual = fit_slope(eps_v, rs, floor);

  if (opts.check_resolution && !report.at_floor) {
    double eps_min = eps_list.back();
    DirectSolve refined =
        solve_one(expansion, gap, eps_min, 2 * opts.n_per_cell, opts);
    report.resolution_change =
        std::abs(report.rows.back().mu_direct - refined.mu);
    double smallest_err = *std::min_element(e2.begin(), e2.end());
    report.resolution_ok =
        report.resolution_change < std::max(smallest_err / 10.0, 1e-13);
  }
  return report;
}

VariationalChain variational_chain(const BandEdge& edge,
                                   const HomogenizedProblem& problem_a,
                                   const HomogenizedEigenpair& ground_a,
                                   const HomogenizedEigenpair& ground_i,
                                   double eps, const StudyOptions& opts) {
  const int d = edge.basis().dimension();
  const BoxGrid& box = problem_a.grid;
  double a_min = problem_a.A.eigenvalues.cwiseAbs().minCoeff();
  // The identity-tensor envelope decays the slowest; size the domain for it.
  double decay = std::max(std::sqrt(a_min / std::abs(ground_a.e)),
                          std::sqrt(1.0 / std::abs(ground_i.e)));
  int M = std::max(2, static_cast<int>(std::ceil(opts.domain_scale * decay / eps)));
  DirectGrid grid(d, M, opts.n_per_cell, opts.fd_order);
  DirectProblem prob(edge.potential(), problem_a.Q, eps, grid,
                     opts.memory_budget);
  Eigen::SparseMatrix<double> H = assemble_direct(prob);

  auto sample_trial = [&](const TwoScaleSum& terms) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      Eigen::VectorXd x = grid.node(i);
      for (const auto& t : terms) {
        double env = interpolate_envelope(box, t.env, eps * x);
        if (env == 0.0) continue;
        out[i] += env * pw_eval(edge.basis(), *t.cell, x).real();
      }
    }
    return out;
  };

  TwoScaleSum one_term{{std::make_shared<CellCoeffs>(edge.w()), ground_i.F,
                        {0, 0, 0}}};
  TwoScaleSum two_term{{std::make_shared<CellCoeffs>(edge.w()), ground_a.F,
                        {0, 0, 0}}};
  for (int j = 0; j < d; ++j) {
    CellCoeffs dw = pw_derivative(edge.basis(), edge.w(), j);
    // Physical-variable gradient of the envelope: chain rule brings eps.
    two_term.push_back({std::make_shared<CellCoeffs>(
                            edge.apply_deflated_inverse(dw)),
                        2.0 * eps * (box.d1(j) * ground_a.F),
                        {0, 0, 0}});
  }

  VariationalChain out;
  out.energy_one_term =
      rayleigh_quotient(sample_trial(one_term), H, edge.energy());
  out.energy_two_term =
      rayleigh_quotient(sample_trial(two_term), H, edge.energy());
  out.holds = out.energy_two_term < out.energy_one_term &&
              out.energy_one_term < 0.0;
  return out;
}

AveragingReport averaging_check(const PeriodicPotential& p,
                                const std::function<double(double)>& G,
                                double support_radius,
                                const std::vector<double>& eps_list) {
  if (p.dimension() != 1) {
    throw DomainError("averaging check is implemented for d = 1");
  }
  AveragingReport report;
  const double mean = p.average();
  for (double eps : eps_list) {
    const double xmax = support_radius / eps;
    const double step = 5e-3;
    const Eigen::Index m = static_cast<Eigen::Index>(std::ceil(xmax / step));
    // Trapezoid on [-m*step, m*step]; G decays inside, so boundary terms of
    // the Euler-Maclaurin expansion vanish and the rule is spectrally
    // accurate for smooth integrands.
    double lhs = 0.0, genv = 0.0;
    Eigen::VectorXd xv(1);
    for (Eigen::Index i = -m; i <= m; ++i) {
      double x = i * step;
      double gval = G(eps * x);
      xv[0] = x;
      double w = (i == -m || i == m) ? 0.5 : 1.0;
      lhs += w * p(xv) * gval;
      genv += w * gval;
    }
    lhs *= step;
    genv *= step;
    report.eps.push_back(eps);
    report.error.push_back(std::abs(lhs - mean * genv));
  }
  report.slope = fit_slope(report.eps, report.error, report.floor);
  return report;
}

}  // namespace bandgap
