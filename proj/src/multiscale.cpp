#include "bandgap/multiscale.hpp"

#include <cmath>

namespace bandgap {

namespace {

// Group terms by cell factor (structural sharing makes pointer identity
// meaningful) and sum their envelopes.
TwoScaleSum merged(const TwoScaleSum& terms) {
  TwoScaleSum out;
  for (const auto& t : terms) {
    bool found = false;
    for (auto& o : out) {
      if (o.cell == t.cell) {
        o.env += t.env;
        o.env_dindex = {0, 0, 0};
        found = true;
        break;
      }
    }
    if (!found) out.push_back(t);
  }
  // Drop numerically empty terms.
  TwoScaleSum kept;
  for (auto& t : out) {
    if (t.env.cwiseAbs().maxCoeff() > 0.0 && t.cell->norm() > 0.0) {
      kept.push_back(std::move(t));
    }
  }
  return kept;
}

void append(TwoScaleSum& dst, const TwoScaleSum& src, double scale = 1.0) {
  for (const auto& t : src) {
    dst.push_back({t.cell, scale * t.env, t.env_dindex});
  }
}

}  // namespace

double two_scale_norm(const TwoScaleSum& terms, const BoxGrid& grid) {
  // ||sum_i c_i g_i||^2 over Omega x box = sum_ij <c_i,c_j> <g_i,g_j>.
  double acc = 0.0;
  for (size_t i = 0; i < terms.size(); ++i) {
    for (size_t j = 0; j < terms.size(); ++j) {
      double cij = pw_inner(*terms[i].cell, *terms[j].cell).real();
      if (cij == 0.0) continue;
      acc += cij * grid.inner(terms[i].env, terms[j].env);
    }
  }
  return std::sqrt(std::max(0.0, acc));
}

// Cache of derived cell factors keyed by (operation, source); keeps cell
// pointers canonical so term merging works by identity.
struct MultiscaleExpansion::CellOps {
  const BandEdge* edge;
  std::shared_ptr<const CellCoeffs> w;
  std::map<std::pair<int, const CellCoeffs*>,
           std::shared_ptr<const CellCoeffs>>
      cache;

  enum { kDx0 = 0, kDx1 = 1, kDx2 = 2, kInverse = 3 };

  std::shared_ptr<const CellCoeffs> apply(
      int op, const std::shared_ptr<const CellCoeffs>& c) {
    auto key = std::make_pair(op, c.get());
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::shared_ptr<const CellCoeffs> out;
    if (op == kInverse) {
      out = std::make_shared<CellCoeffs>(edge->deflated_solve(*c));
    } else {
      out = std::make_shared<CellCoeffs>(
          pw_derivative(edge->basis(), *c, op - kDx0));
    }
    cache.emplace(key, out);
    return out;
  }

  std::shared_ptr<const CellCoeffs> dx(int axis,
                                       const std::shared_ptr<const CellCoeffs>& c) {
    return apply(kDx0 + axis, c);
  }
  std::shared_ptr<const CellCoeffs> inverse(
      const std::shared_ptr<const CellCoeffs>& c) {
    return apply(kInverse, c);
  }
};

MultiscaleExpansion::MultiscaleExpansion(const BandEdge& edge,
                                         const HomogenizedProblem& problem,
                                         const HomogenizedEigenpair& ground,
                                         int order)
    : edge_(&edge), problem_(&problem), ground_(&ground), order_(order) {
  if (order < 2 || order > 6) {
    throw DomainError("expansion order must lie in 2..6");
  }
  if (edge.basis().dimension() != problem.grid.dimension()) {
    throw ShapeError("edge and homogenized problem dimensions differ");
  }
  if (!ground.discrete) {
    throw HypothesisError("H3",
                          "the supplied homogenized eigenpair is not a "
                          "discrete eigenvalue");
  }
  ops_ = std::make_shared<CellOps>();
  ops_->edge = edge_;
  ops_->w = std::make_shared<CellCoeffs>(edge.w());
  q_samples_ = problem.grid.sample(problem.Q);
  build();
}

TwoScaleSum MultiscaleExpansion::grad_dot_grad(const TwoScaleSum& terms) const {
  const int d = edge_->basis().dimension();
  TwoScaleSum out;
  for (const auto& t : terms) {
    for (int j = 0; j < d; ++j) {
      SeparableTerm nt;
      nt.cell = ops_->dx(j, t.cell);
      nt.env = 2.0 * (problem_->grid.d1(j) * t.env);
      nt.env_dindex = t.env_dindex;
      nt.env_dindex[j] += 1;
      out.push_back(std::move(nt));
    }
  }
  return merged(out);
}

TwoScaleSum MultiscaleExpansion::apply_envelope_operator(
    const TwoScaleSum& terms, double shift) const {
  const int d = problem_->grid.dimension();
  TwoScaleSum out;
  for (const auto& t : terms) {
    SeparableTerm nt;
    nt.cell = t.cell;
    Eigen::VectorXd env = q_samples_.cwiseProduct(t.env) - shift * t.env;
    for (int j = 0; j < d; ++j) env -= problem_->grid.d2(j, j) * t.env;
    nt.env = std::move(env);
    out.push_back(std::move(nt));
  }
  return merged(out);
}

Eigen::VectorXd MultiscaleExpansion::cell_projection(const TwoScaleSum& terms,
                                                     double* max_imag) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(problem_->grid.size());
  double mi = 0.0;
  for (const auto& t : terms) {
    Complex p = pw_inner(*ops_->w, *t.cell);
    mi = std::max(mi, std::abs(p.imag()) * t.env.cwiseAbs().maxCoeff());
    out += p.real() * t.env;
  }
  if (max_imag) *max_imag = mi;
  return out;
}

TwoScaleSum MultiscaleExpansion::apply_deflated_inverse(
    const TwoScaleSum& terms, double* defect) const {
  if (defect) {
    double total = two_scale_norm(terms, problem_->grid);
    Eigen::VectorXd proj = cell_projection(terms);
    *defect = (total == 0.0) ? 0.0 : problem_->grid.norm(proj) / total;
  }
  TwoScaleSum out;
  for (const auto& t : terms) {
    out.push_back({ops_->inverse(t.cell), t.env, t.env_dindex});
  }
  return merged(out);
}

void MultiscaleExpansion::build() {
  const int N = order_;
  const int d = edge_->basis().dimension();
  const BoxGrid& grid = problem_->grid;
  const double e = ground_->e;

  particular_.assign(N + 1, {});
  full_.assign(N + 1, {});
  F_.assign(N + 1, Eigen::VectorXd::Zero(grid.size()));
  mu_.assign(N + 1, 0.0);
  F_[0] = ground_->F;

  // mu_1 = 0, witnessed by the per-axis solvability integrals <w, 2 d_j w>
  // which vanish for the real-gauged edge state.
  mu1_witness_.resize(d);
  for (int j = 0; j < d; ++j) {
    mu1_witness_[j] =
        std::abs(pw_inner(*ops_->w, 2.0 * *ops_->dx(j, ops_->w)));
  }
  if (mu1_witness_.maxCoeff() > 1e-10) {
    throw HypothesisError("H2(a)",
                          "gauge error: <w, d_j w> = " +
                              std::to_string(mu1_witness_.maxCoeff()) +
                              " (edge state not real)");
  }
  mu_[1] = 0.0;
  logs_[0] = OrderLog{};
  logs_[1] = OrderLog{};

  // Pre-derived cell factors used by the explicit pending pieces.
  std::vector<std::shared_ptr<const CellCoeffs>> inv_dw(d);
  for (int j = 0; j < d; ++j) inv_dw[j] = ops_->inverse(ops_->dx(j, ops_->w));

  // gdg of the gradient-envelope piece of U_{m}: the diagonal second
  // derivatives pair into the assembled 3-point stencils so the discrete
  // solvability identity matches the homogenized operator exactly.
  auto gdg_gradenv = [&](const Eigen::VectorXd& F) {
    TwoScaleSum out;
    for (int j = 0; j < d; ++j) {
      for (int l = 0; l < d; ++l) {
        SeparableTerm t;
        t.cell = ops_->dx(j, inv_dw[l]);
        t.env = 4.0 * (grid.d2(j, l) * F);
        t.env_dindex[j] += 1;
        t.env_dindex[l] += 1;
        out.push_back(std::move(t));
      }
    }
    return merged(out);
  };
  // -[-Lap + Q - e] applied to the gradient-envelope piece of U_{m}.
  auto gradenv_yop = [&](const Eigen::VectorXd& F) {
    TwoScaleSum out;
    for (int l = 0; l < d; ++l) {
      SeparableTerm t;
      t.cell = inv_dw[l];
      Eigen::VectorXd g = grid.d1(l) * F;
      Eigen::VectorXd env = q_samples_.cwiseProduct(g) - e * g;
      for (int j = 0; j < d; ++j) env -= grid.d2(j, j) * g;
      t.env = -2.0 * env;
      t.env_dindex[l] = 1;
      out.push_back(std::move(t));
    }
    return merged(out);
  };
  auto homog_term = [&](const Eigen::VectorXd& F) {
    return TwoScaleSum{{ops_->w, F, {0, 0, 0}}};
  };

  // U_0 = w F_0 and the (empty) particular parts of orders 0 and 1.
  full_[0] = homog_term(F_[0]);
  logs_[0].term_count = 1;

  for (int n = 2; n <= N; ++n) {
    // Known part K_n of the order-n right-hand side.
    TwoScaleSum K = grad_dot_grad(particular_[n - 1]);
    if (n == 2) {
      // F_0 is already determined, so its pending pieces are concrete here.
      append(K, gdg_gradenv(F_[0]));
      TwoScaleSum yop_u0 = apply_envelope_operator(homog_term(F_[0]), e);
      append(K, yop_u0, -1.0);
    } else {
      append(K, gradenv_yop(F_[n - 3]));
      TwoScaleSum yop_w = apply_envelope_operator(particular_[n - 2], e);
      append(K, yop_w, -1.0);
      for (int j = 3; j <= n - 1; ++j) {
        if (mu_[j] != 0.0) append(K, full_[n - j], mu_[j]);
      }
    }
    K = merged(K);

    // Solvability in the cell variable fixes mu_n (and, for n >= 3, the
    // envelope F_{n-2} through the homogenized deflated inverse).
    OrderLog log;
    Eigen::VectorXd proj = cell_projection(K);
    double mu_extra = -grid.inner(F_[0], proj);
    TwoScaleSum rhs = K;
    if (n == 2) {
      mu_[2] = e + mu_extra;  // measured deviation from the homogenized
                              // eigenvalue is the solvability defect
      append(rhs, homog_term(mu_extra * F_[0]));
    } else {
      mu_[n] = mu_extra;
      Eigen::VectorXd env_rhs = proj + mu_[n] * F_[0];
      if (grid.norm(env_rhs) < 1e-12) {
        // Collapsed order (free background): nothing to solve.
        F_[n - 2].setZero();
      } else {
        if (!laq_inverse_) {
          laq_inverse_ = std::make_shared<HomogenizedInverse>(
              *problem_, *ground_, edge_->tolerances());
        }
        log.laq_defect = laq_inverse_->solvability_defect(env_rhs);
        if (log.laq_defect > 1e2 * edge_->tolerances().solvability) {
          throw SolverError(
              "numerical inconsistency: envelope-side Fredholm defect " +
              std::to_string(log.laq_defect) +
              " after the eigenvalue-correction subtraction (effective mass "
              "tensor or homogenized eigenvalue mismatch between modules)");
        }
        F_[n - 2] = laq_inverse_->apply(env_rhs);
      }
      append(rhs, gdg_gradenv(F_[n - 2]));
      TwoScaleSum yop_homog =
          apply_envelope_operator(homog_term(F_[n - 2]), e);
      append(rhs, yop_homog, -1.0);
      append(rhs, homog_term(mu_[n] * F_[0]));
    }
    rhs = merged(rhs);
    particular_[n] = apply_deflated_inverse(rhs, &log.solvability_defect);
    logs_[n] = log;
    if (n >= 3) finalize_order(n - 2);
  }

  // Closure F_{N-1} = F_N = 0 completes the last two orders.
  finalize_order(N - 1);
  finalize_order(N);

  // Defining-equation residuals, order by order.
  for (int n = 0; n <= N; ++n) {
    TwoScaleSum lhs;
    for (const auto& t : full_[n]) {
      lhs.push_back({std::make_shared<CellCoeffs>(edge_->shifted_matrix() *
                                                  *t.cell),
                     t.env,
                     {0, 0, 0}});
    }
    double rhs_norm = 1.0;
    if (n == 0) {
      logs_[0].residual = two_scale_norm(lhs, grid);
    } else {
      TwoScaleSum rhs = full_rhs(n);
      rhs_norm = two_scale_norm(rhs, grid);
      append(lhs, rhs, -1.0);
      double abs_res = two_scale_norm(merged(lhs), grid);
      logs_[n].residual = (rhs_norm > 1e-12) ? abs_res / rhs_norm : abs_res;
    }
    logs_[n].term_count = static_cast<int>(full_[n].size());
  }
}

void MultiscaleExpansion::finalize_order(int n) {
  TwoScaleSum u = particular_[n];
  const BoxGrid& grid = problem_->grid;
  const int d = grid.dimension();
  if (n >= 1 && F_[n - 1].cwiseAbs().maxCoeff() > 0.0) {
    for (int l = 0; l < d; ++l) {
      SeparableTerm t;
      t.cell = ops_->inverse(ops_->dx(l, ops_->w));
      t.env = 2.0 * (grid.d1(l) * F_[n - 1]);
      t.env_dindex[l] = 1;
      u.push_back(std::move(t));
    }
  }
  if (F_[n].cwiseAbs().maxCoeff() > 0.0) {
    u.push_back({ops_->w, F_[n], {0, 0, 0}});
  }
  full_[n] = merged(u);
}

TwoScaleSum MultiscaleExpansion::full_rhs(int n) const {
  const BoxGrid& grid = problem_->grid;
  const int d = grid.dimension();

  TwoScaleSum rhs;
  // 2 grad_x . grad_y U_{n-1}: homogeneous, gradient-envelope and
  // particular pieces composed exactly as during the build.
  if (n - 1 >= 0) {
    // homog piece w F_{n-1}
    for (int j = 0; j < d; ++j) {
      SeparableTerm t;
      t.cell = ops_->dx(j, ops_->w);
      t.env = 2.0 * (grid.d1(j) * F_[n - 1]);
      rhs.push_back(std::move(t));
    }
    // gradient-envelope piece of U_{n-1} (uses F_{n-2})
    if (n - 2 >= 0) {
      for (int j = 0; j < d; ++j) {
        for (int l = 0; l < d; ++l) {
          SeparableTerm t;
          t.cell = ops_->dx(j, ops_->inverse(ops_->dx(l, ops_->w)));
          t.env = 4.0 * (grid.d2(j, l) * F_[n - 2]);
          rhs.push_back(std::move(t));
        }
      }
    }
    append(rhs, grad_dot_grad(particular_[n - 1]));
  }
  // -[-Lap_y + Q - mu_2] U_{n-2}
  if (n - 2 >= 0) {
    TwoScaleSum u2 = particular_[n - 2];
    if (n - 3 >= 0) {
      for (int l = 0; l < d; ++l) {
        SeparableTerm t;
        t.cell = ops_->inverse(ops_->dx(l, ops_->w));
        t.env = 2.0 * (grid.d1(l) * F_[n - 3]);
        u2.push_back(std::move(t));
      }
    }
    u2.push_back({ops_->w, F_[n - 2], {0, 0, 0}});
    append(rhs, apply_envelope_operator(merged(u2), mu_[2]), -1.0);
  }
  // mu_j U_{n-j} for 3 <= j <= n-1, plus mu_n U_0 (for n = 2 the correction
  // enters through the bracket above, not as a separate term).
  for (int j = 3; j <= n - 1; ++j) {
    if (mu_[j] != 0.0) append(rhs, full_[n - j], mu_[j]);
  }
  if ((n == 1 || n >= 3) && mu_[n] != 0.0) {
    rhs.push_back({ops_->w, mu_[n] * F_[0], {0, 0, 0}});
  }
  return merged(rhs);
}

const TwoScaleSum& MultiscaleExpansion::order_terms(int n) const {
  if (n < 0 || n > order_) throw DomainError("order out of range");
  return full_[n];
}

const TwoScaleSum& MultiscaleExpansion::particular_terms(int n) const {
  if (n < 0 || n > order_) throw DomainError("order out of range");
  return particular_[n];
}

double MultiscaleExpansion::mu(int n) const {
  if (n < 1 || n > order_) throw DomainError("order out of range");
  return mu_[n];
}

const Eigen::VectorXd& MultiscaleExpansion::envelope(int n) const {
  if (n < 0 || n > order_) throw DomainError("order out of range");
  return F_[n];
}

double MultiscaleExpansion::max_solvability_defect() const {
  double m = 0.0;
  for (const auto& [n, log] : logs_) {
    m = std::max({m, log.solvability_defect, log.laq_defect});
  }
  return m;
}

double MultiscaleExpansion::max_order_residual() const {
  double m = 0.0;
  for (const auto& [n, log] : logs_) m = std::max(m, log.residual);
  return m;
}

double MultiscaleExpansion::mu_of(double eps, int n_max) const {
  if (eps <= 0.0) throw DomainError("eps must be positive");
  if (n_max > order_) throw DomainError("order out of range");
  double mu = edge_->energy();
  double ep = 1.0;
  for (int n = 1; n <= n_max; ++n) {
    ep *= eps;
    mu += ep * mu_[n];
  }
  return mu;
}

Eigen::VectorXd MultiscaleExpansion::sample(
    double eps, int n_max, const std::vector<Eigen::VectorXd>& points) const {
  if (eps <= 0.0) throw DomainError("eps must be positive");
  if (n_max > order_) throw DomainError("order out of range");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(points.size());
  double ep = 1.0;
  for (int n = 0; n <= n_max; ++n) {
    for (const auto& t : full_[n]) {
      for (size_t i = 0; i < points.size(); ++i) {
        double env = interpolate_envelope(problem_->grid, t.env,
                                          eps * points[i]);
        if (env == 0.0) continue;
        out[i] += ep * env * pw_eval(edge_->basis(), *t.cell, points[i]).real();
      }
    }
    ep *= eps;
  }
  return out;
}

MultiscaleExpansion::ResidualForm MultiscaleExpansion::residual_form(
    double eps, int n_max) const {
  if (eps <= 0.0) throw DomainError("eps must be positive");
  if (n_max > order_) throw DomainError("order out of range");
  const BoxGrid& grid = problem_->grid;
  const int d = grid.dimension();
  const double mu = mu_of(eps, n_max);
  // Enlarged basis so the cell operator acts exactly.
  auto basis = std::make_shared<PlaneWaveBasis>(
      d, edge_->basis().cutoff() + std::max(1, edge_->potential().cutoff()),
      edge_->k_star());
  Eigen::MatrixXcd M =
      assemble_bloch_matrix(edge_->potential(), edge_->k_star(),
                            basis->cutoff());
  M.diagonal().array() -= Complex(mu, 0.0);

  std::map<const CellCoeffs*, std::shared_ptr<const CellCoeffs>> embedded;
  auto embed = [&](const std::shared_ptr<const CellCoeffs>& c) {
    auto it = embedded.find(c.get());
    if (it != embedded.end()) return it->second;
    auto e = std::make_shared<CellCoeffs>(pw_embed(edge_->basis(), *c, *basis));
    embedded.emplace(c.get(), e);
    return std::shared_ptr<const CellCoeffs>(e);
  };

  TwoScaleSum res;
  double ep = 1.0;
  for (int n = 0; n <= n_max; ++n) {
    for (const auto& t : full_[n]) {
      auto c = embed(t.cell);
      // (-Lap_x + V - mu) c times the envelope.
      res.push_back({std::make_shared<CellCoeffs>(M * *c), ep * t.env,
                     {0, 0, 0}});
      // -2 eps d_j c  x  d_j env.
      for (int j = 0; j < d; ++j) {
        res.push_back({std::make_shared<CellCoeffs>(
                           pw_derivative(*basis, *c, j)),
                       -2.0 * eps * ep * (grid.d1(j) * t.env),
                       {0, 0, 0}});
      }
      // eps^2 c x (-Lap_y + Q) env.
      Eigen::VectorXd env = q_samples_.cwiseProduct(t.env);
      for (int j = 0; j < d; ++j) env -= grid.d2(j, j) * t.env;
      res.push_back({c, eps * eps * ep * env, {0, 0, 0}});
    }
    ep *= eps;
  }
  ResidualForm out;
  out.terms = merged(res);
  out.basis = basis;
  return out;
}

double MultiscaleExpansion::residual_norm(double eps, int n_max) const {
  ResidualForm rf = residual_form(eps, n_max);
  double num = two_scale_norm(rf.terms, problem_->grid);
  TwoScaleSum u;
  double ep = 1.0;
  for (int n = 0; n <= n_max; ++n) {
    append(u, full_[n], ep);
    ep *= eps;
  }
  double den = two_scale_norm(merged(u), problem_->grid);
  return (den == 0.0) ? num : num / den;
}

double interpolate_envelope(const BoxGrid& grid, const Eigen::VectorXd& values,
                            const Eigen::VectorXd& y) {
  const int d = grid.dimension();
  const int n = grid.nodes_per_dim();
  const double h = grid.spacing();
  // Catmull-Rom weights per axis over a 4-node stencil; zero beyond the box.
  int base[3] = {0, 0, 0};
  double wgt[3][4];
  for (int j = 0; j < d; ++j) {
    double s = (y[j] + grid.half_width()) / h - 1.0;  // node index coordinate
    double fl = std::floor(s);
    int i0 = static_cast<int>(fl);
    double t = s - fl;
    if (i0 < -2 || i0 > n) return 0.0;
    base[j] = i0 - 1;
    double t2 = t * t, t3 = t2 * t;
    wgt[j][0] = 0.5 * (-t3 + 2.0 * t2 - t);
    wgt[j][1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
    wgt[j][2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
    wgt[j][3] = 0.5 * (t3 - t2);
  }
  Eigen::Index stride[3] = {1, 1, 1};
  for (int j = d - 2; j >= 0; --j) {
    stride[j] = stride[j + 1] * n;
  }
  double acc = 0.0;
  int reps[3] = {d > 0 ? 4 : 1, d > 1 ? 4 : 1, d > 2 ? 4 : 1};
  for (int a = 0; a < reps[0]; ++a) {
    for (int b = 0; b < reps[1]; ++b) {
      for (int c = 0; c < reps[2]; ++c) {
        int idx[3] = {base[0] + a, base[1] + b, base[2] + c};
        double w = wgt[0][a];
        if (d > 1) w *= wgt[1][b];
        if (d > 2) w *= wgt[2][c];
        bool inside = true;
        Eigen::Index flat = 0;
        for (int j = 0; j < d; ++j) {
          if (idx[j] < 0 || idx[j] >= n) {
            inside = false;  // Dirichlet: zero outside
            break;
          }
          flat += idx[j] * stride[j];
        }
        if (inside) acc += w * values[flat];
      }
    }
  }
  return acc;
}

}  // namespace bandgap
