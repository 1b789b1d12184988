#include "bandgap/homogenized.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>

namespace bandgap {

BoxGrid::BoxGrid(int dimension, double half_width, double spacing)
    : dim_(dimension), half_width_(half_width), h_(spacing) {
  if (dimension < 1 || dimension > 3) {
    throw DomainError("box grid dimension must be 1, 2 or 3");
  }
  if (half_width <= 0.0 || spacing <= 0.0) {
    throw DomainError("box grid needs positive half-width and spacing");
  }
  n_ = static_cast<int>(std::lround(2.0 * half_width / spacing)) - 1;
  if (n_ < 3) throw DomainError("box grid too coarse");
  size_ = 1;
  for (int j = 0; j < dim_; ++j) size_ *= n_;
  stride_[dim_ - 1] = 1;
  for (int j = dim_ - 2; j >= 0; --j) stride_[j] = stride_[j + 1] * n_;
}

Eigen::VectorXd BoxGrid::node(Eigen::Index flat) const {
  Eigen::VectorXd y(dim_);
  for (int j = 0; j < dim_; ++j) {
    y[j] = coordinate(static_cast<int>(flat / stride_[j]));
    flat %= stride_[j];
  }
  return y;
}

double BoxGrid::quad_weight() const {
  double w = 1.0;
  for (int j = 0; j < dim_; ++j) w *= h_;
  return w;
}

const Eigen::SparseMatrix<double>& BoxGrid::d1(int j) const {
  if (!d1_[j]) {
    auto M = std::make_shared<Eigen::SparseMatrix<double>>(size_, size_);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(2 * size_);
    const double c = 1.0 / (2.0 * h_);
    for (Eigen::Index i = 0; i < size_; ++i) {
      int ij = static_cast<int>((i / stride_[j]) % n_);
      if (ij + 1 < n_) trip.emplace_back(i, i + stride_[j], c);
      if (ij - 1 >= 0) trip.emplace_back(i, i - stride_[j], -c);
    }
    M->setFromTriplets(trip.begin(), trip.end());
    d1_[j] = M;
  }
  return *d1_[j];
}

const Eigen::SparseMatrix<double>& BoxGrid::d2(int j, int l) const {
  if (!d2_[j][l]) {
    auto M = std::make_shared<Eigen::SparseMatrix<double>>(size_, size_);
    std::vector<Eigen::Triplet<double>> trip;
    if (j == l) {
      const double c = 1.0 / (h_ * h_);
      trip.reserve(3 * size_);
      for (Eigen::Index i = 0; i < size_; ++i) {
        int ij = static_cast<int>((i / stride_[j]) % n_);
        trip.emplace_back(i, i, -2.0 * c);
        if (ij + 1 < n_) trip.emplace_back(i, i + stride_[j], c);
        if (ij - 1 >= 0) trip.emplace_back(i, i - stride_[j], c);
      }
    } else {
      const double c = 1.0 / (4.0 * h_ * h_);
      trip.reserve(4 * size_);
      for (Eigen::Index i = 0; i < size_; ++i) {
        int ij = static_cast<int>((i / stride_[j]) % n_);
        int il = static_cast<int>((i / stride_[l]) % n_);
        auto add = [&](int dj, int dl, double v) {
          if (ij + dj < 0 || ij + dj >= n_ || il + dl < 0 || il + dl >= n_) {
            return;
          }
          trip.emplace_back(i, i + dj * stride_[j] + dl * stride_[l], v);
        };
        add(+1, +1, c);
        add(-1, -1, c);
        add(+1, -1, -c);
        add(-1, +1, -c);
      }
    }
    M->setFromTriplets(trip.begin(), trip.end());
    d2_[j][l] = M;
  }
  return *d2_[j][l];
}

Eigen::VectorXd BoxGrid::sample(const LocalizedPotential& Q) const {
  Eigen::VectorXd q(size_);
  for (Eigen::Index i = 0; i < size_; ++i) q[i] = Q(node(i));
  return q;
}

double BoxGrid::boundary_mass(const Eigen::VectorXd& f) const {
  if (f.size() != size_) throw ShapeError("grid function size mismatch");
  const double shell = 0.9 * half_width_;
  double inside = 0.0, total = 0.0;
  for (Eigen::Index i = 0; i < size_; ++i) {
    double m = f[i] * f[i];
    total += m;
    if (node(i).cwiseAbs().maxCoeff() > shell) inside += m;
  }
  return total == 0.0 ? 0.0 : quad_weight() * inside;
}

HomogenizedProblem::HomogenizedProblem(EffectiveMassTensor a,
                                       LocalizedPotential q, double half_width,
                                       double spacing)
    : A(std::move(a)), Q(std::move(q)), grid(Q.dimension(), half_width, spacing) {
  if (A.dimension() != Q.dimension()) {
    throw ShapeError("tensor and defect dimensions differ");
  }
  if (!Q.is_zero()) {
    if (half_width < 4.0 * Q.width()) {
      throw DomainError("box half-width must be >= 4 defect length scales");
    }
    if (Q.width() / spacing < 16.0) {
      throw DomainError("grid must resolve the defect width with >= 16 points");
    }
  }
}

Eigen::SparseMatrix<double> assemble_homogenized(const HomogenizedProblem& p) {
  if (!p.A.is_definite()) {
    throw HypothesisError("H2(c)",
                          "effective mass tensor is indefinite; the "
                          "homogenized operator is not assembled");
  }
  const int d = p.grid.dimension();
  Eigen::SparseMatrix<double> K(p.grid.size(), p.grid.size());
  for (int j = 0; j < d; ++j) {
    for (int l = 0; l < d; ++l) {
      if (p.A.A(j, l) != 0.0) K -= p.A.A(j, l) * p.grid.d2(j, l);
    }
  }
  Eigen::VectorXd q = p.grid.sample(p.Q);
  Eigen::SparseMatrix<double> diag(p.grid.size(), p.grid.size());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(p.grid.size());
  for (Eigen::Index i = 0; i < p.grid.size(); ++i) {
    trip.emplace_back(i, i, q[i]);
  }
  diag.setFromTriplets(trip.begin(), trip.end());
  K += diag;
  K.makeCompressed();
  return K;
}

namespace {

// Deterministic orthonormal start block for the subspace iteration: the
// all-ones vector plus fixed oscillatory patterns (so every symmetry sector
// is reachable).
Eigen::MatrixXd start_block(Eigen::Index n, int p) {
  Eigen::MatrixXd X(n, p);
  X.col(0).setOnes();
  for (int q = 1; q < p; ++q) {
    for (Eigen::Index i = 0; i < n; ++i) {
      X(i, q) = std::sin(0.754877 * (q + 1) * (i + 1) + 0.2 * q);
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
}

struct RitzResult {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

// Smallest eigenpairs of the sparse symmetric K by inverse subspace
// iteration with a shift strictly below the spectrum.
RitzResult smallest_eigenpairs(const Eigen::SparseMatrix<double>& K,
                               double sigma, int n_want) {
  const Eigen::Index n = K.rows();
  const int block = std::min<Eigen::Index>(n, n_want + 3);
  Eigen::SparseMatrix<double> shifted = K;
  for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= sigma;
  shifted.makeCompressed();
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(shifted);
  if (llt.info() != Eigen::Success) {
    throw SolverError("factorization of the shifted homogenized operator "
                      "failed (shift not below the spectrum?)");
  }
  Eigen::MatrixXd X = start_block(n, block);
  RitzResult out;
  const int max_iter = 800;
  for (int it = 0; it < max_iter; ++it) {
    X = llt.solve(X);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    X = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
    Eigen::MatrixXd KX = K * X;
    Eigen::MatrixXd small = X.transpose() * KX;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(small);
    X = X * es.eigenvectors();
    out.values = es.eigenvalues().head(n_want);
    out.vectors = X.leftCols(n_want);
    if (it < 3) continue;
    // Discrete eigenvalues (negative side) must converge tightly; the
    // positive-side values are Dirichlet-box continuum artifacts where loose
    // residuals suffice for sign classification.
    bool done = true;
    for (int i = 0; i < n_want && done; ++i) {
      double lambda = out.values[i];
      double res = (K * out.vectors.col(i) - lambda * out.vectors.col(i)).norm();
      double tol = (lambda < -1e-8) ? 1e-9 : 1e-5;
      if (res > tol * std::max(1.0, std::abs(lambda))) done = false;
    }
    if (done) return out;
  }
  throw SolverError("homogenized eigensolver did not converge in " +
                    std::to_string(max_iter) + " subspace iterations");
}

}  // namespace

std::vector<HomogenizedEigenpair> solve_homogenized(
    const HomogenizedProblem& p, int n_eigs, const Tolerances& tol) {
  const int sign = p.A.sign();
  // Reflection trick: for negative definite A solve with (-A, -Q) and negate
  // the spectrum (e(-A,-Q) = -e(A,Q), same eigenfunctions).
  const HomogenizedProblem* prob = &p;
  std::unique_ptr<HomogenizedProblem> reflected;
  if (sign < 0) {
    EffectiveMassTensor negA = EffectiveMassTensor::from_matrix(
        -p.A.A, p.A.method, p.A.asymmetry, tol);
    reflected = std::make_unique<HomogenizedProblem>(
        negA, p.Q.negated(), p.grid.half_width(), p.grid.spacing());
    prob = reflected.get();
  }

  Eigen::SparseMatrix<double> K = assemble_homogenized(*prob);
  // -div(A grad) >= 0 for definite (reflected) A, so the spectrum is bounded
  // below by min Q; shift strictly under it.
  double qmin = prob->grid.sample(prob->Q).minCoeff();
  double sigma = std::min(0.0, qmin) - 1.0;
  RitzResult ritz = smallest_eigenpairs(K, sigma, n_eigs);

  std::vector<HomogenizedEigenpair> out(n_eigs);
  const double wq = std::sqrt(p.grid.quad_weight());
  for (int i = 0; i < n_eigs; ++i) {
    HomogenizedEigenpair& pair = out[i];
    pair.e = (sign < 0) ? -ritz.values[i] : ritz.values[i];
    pair.F = ritz.vectors.col(i) / (wq * ritz.vectors.col(i).norm());
    // Deterministic sign: positive mean (ground states) or positive first
    // significant component.
    double mean = pair.F.sum();
    if (std::abs(mean) > 1e-8 * pair.F.cwiseAbs().maxCoeff() * pair.F.size()) {
      if (mean < 0.0) pair.F = -pair.F;
    } else {
      for (Eigen::Index j = 0; j < pair.F.size(); ++j) {
        if (std::abs(pair.F[j]) > 1e-6 * pair.F.cwiseAbs().maxCoeff()) {
          if (pair.F[j] < 0.0) pair.F = -pair.F;
          break;
        }
      }
    }
    pair.boundary_mass = p.grid.boundary_mass(pair.F);
    pair.discrete = sign * pair.e < 0.0;
  }
  // Multiplicity: group by cluster tolerance.
  for (int i = 0; i < n_eigs; ++i) {
    int m = 1;
    for (int j = 0; j < n_eigs; ++j) {
      if (j != i && std::abs(out[j].e - out[i].e) < tol.cluster(out[i].e)) {
        ++m;
      }
    }
    out[i].multiplicity = m;
  }
  if (std::none_of(out.begin(), out.end(),
                   [](const HomogenizedEigenpair& p) { return p.discrete; })) {
    throw HypothesisError(
        "H3", "no discrete homogenized eigenvalue found (sgn(A) e < 0 fails "
              "for the computed spectrum)");
  }
  return out;
}

HomogenizedInverse::HomogenizedInverse(const HomogenizedProblem& p,
                                       const HomogenizedEigenpair& pair,
                                       const Tolerances& tol)
    : grid_(p.grid), F_(pair.F), e_(pair.e), tol_(tol) {
  Eigen::SparseMatrix<double> K = assemble_homogenized(p);
  const Eigen::Index n = grid_.size();
  // Bordered system [[K - e, F], [F^T, 0]]: nonsingular exactly when e is a
  // simple eigenvalue with eigenvector F.
  shifted_ = K;
  for (Eigen::Index i = 0; i < n; ++i) shifted_.coeffRef(i, i) -= e_;
  shifted_.makeCompressed();
  Eigen::SparseMatrix<double> B(n + 1, n + 1);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(shifted_.nonZeros() + 2 * n);
  for (int k = 0; k < shifted_.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(shifted_, k); it; ++it) {
      trip.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    trip.emplace_back(i, n, F_[i]);
    trip.emplace_back(n, i, F_[i]);
  }
  B.setFromTriplets(trip.begin(), trip.end());
  B.makeCompressed();
  lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
  lu_->compute(B);
  if (lu_->info() != Eigen::Success) {
    throw SolverError("bordered homogenized factorization failed");
  }
}

double HomogenizedInverse::solvability_defect(
    const Eigen::VectorXd& rhs) const {
  double nrm = grid_.norm(rhs);
  if (nrm == 0.0) return 0.0;
  return std::abs(grid_.inner(F_, rhs)) / nrm;
}

Eigen::VectorXd HomogenizedInverse::apply(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != grid_.size()) throw ShapeError("grid size mismatch");
  double nrm = grid_.norm(rhs);
  if (nrm == 0.0) return Eigen::VectorXd::Zero(rhs.size());
  double defect = solvability_defect(rhs);
  if (defect > tol_.solvability) {
    throw SolvabilityError(
        "Fredholm solvability violated: |<F, rhs>| / ||rhs|| = " +
        std::to_string(defect) +
        " (right-hand side has a component along the homogenized "
        "eigenfunction)");
  }
  const Eigen::Index n = grid_.size();
  Eigen::VectorXd b(n + 1);
  b.head(n) = rhs;
  b[n] = 0.0;
  Eigen::VectorXd sol = lu_->solve(b);
  Eigen::VectorXd u = sol.head(n);
  u -= F_ * (grid_.inner(F_, u) / grid_.inner(F_, F_));
  // Residual against the deflated right-hand side.
  Eigen::VectorXd rhs_perp =
      rhs - F_ * (grid_.inner(F_, rhs) / grid_.inner(F_, F_));
  double res = grid_.norm(shifted_ * u - rhs_perp) / nrm;
  if (res > 1e-7) {
    throw SolverError("deflated homogenized solve residual " +
                      std::to_string(res) + " exceeds 1e-7");
  }
  return u;
}

}  // namespace bandgap
