#include "bandgap/bloch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace bandgap {

namespace {

constexpr double kFourPiSq = 4.0 * std::numbers::pi * std::numbers::pi;

Eigen::VectorXd require_corner(const Eigen::VectorXd& k) {
  for (Eigen::Index j = 0; j < k.size(); ++j) {
    if (k[j] != 0.0 && k[j] != 0.5) {
      throw DomainError(
          "band edge quasimomentum components must lie in {0, 1/2}");
    }
  }
  return k;
}

}  // namespace

Eigen::MatrixXcd assemble_bloch_matrix(const PeriodicPotential& V,
                                       const Eigen::VectorXd& k,
                                       int pw_cutoff) {
  PlaneWaveBasis basis(V.dimension(), pw_cutoff, k);
  const Eigen::Index n = basis.size();
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index row = 0; row < n; ++row) {
    WaveIndex m = basis.index_to_wave(row);
    double kin = 0.0;
    for (int j = 0; j < V.dimension(); ++j) {
      double nu = m[j] + k[j];
      kin += nu * nu;
    }
    M(row, row) = Complex(kFourPiSq * kin, 0.0);
  }
  // Potential part: V_{m - m'}; walking the sparse coefficient map once per
  // row is cheaper than a dense double loop for the small cutoffs used here.
  for (Eigen::Index row = 0; row < n; ++row) {
    WaveIndex m = basis.index_to_wave(row);
    for (const auto& [z, v] : V.coefficients()) {
      WaveIndex mp{m[0] - z[0], m[1] - z[1], m[2] - z[2]};
      Eigen::Index col = basis.wave_to_index(mp);
      if (col >= 0) M(row, col) += v;
    }
  }
  return M;
}

BandStructure solve_bands(const PeriodicPotential& V,
                          const std::vector<Eigen::VectorXd>& k_list,
                          int n_bands, int pw_cutoff, bool keep_eigenvectors) {
  BandStructure bs;
  bs.k_grid = k_list;
  bs.pw_cutoff = pw_cutoff;
  PlaneWaveBasis probe(V.dimension(), pw_cutoff, Eigen::VectorXd());
  if (n_bands < 1 || n_bands > probe.size()) {
    throw DomainError("n_bands must be between 1 and the matrix dimension");
  }
  bs.energies.resize(static_cast<Eigen::Index>(k_list.size()), n_bands);
  if (keep_eigenvectors) bs.eigenvectors.resize(k_list.size());
  for (size_t i = 0; i < k_list.size(); ++i) {
    Eigen::MatrixXcd M = assemble_bloch_matrix(V, k_list[i], pw_cutoff);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M);
    if (es.info() != Eigen::Success) {
      throw SolverError("cell eigensolver failed at k = (" +
                        std::to_string(k_list[i][0]) + ", ...), dimension " +
                        std::to_string(M.rows()));
    }
    bs.energies.row(static_cast<Eigen::Index>(i)) =
        es.eigenvalues().head(n_bands).transpose();
    if (keep_eigenvectors) {
      bs.eigenvectors[i] = es.eigenvectors().leftCols(n_bands);
    }
  }
  return bs;
}

namespace {

// Full spectrum + eigenvectors at one k; shared by the edge constructor and
// the dispersion stencil.
struct CellSolve {
  Eigen::VectorXd energies;
  Eigen::MatrixXcd vectors;
};

CellSolve solve_cell(const PeriodicPotential& V, const Eigen::VectorXd& k,
                     int pw_cutoff, bool need_vectors) {
  Eigen::MatrixXcd M = assemble_bloch_matrix(V, k, pw_cutoff);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
      M, need_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw SolverError("cell eigensolver failed");
  }
  CellSolve out;
  out.energies = es.eigenvalues();
  if (need_vectors) out.vectors = es.eigenvectors();
  return out;
}

// Eigenvalue tracked by continuity: the one closest to e_ref.  Raises
// BandCrossingError when the tracked value is not isolated from its
// neighbors.
double tracked_energy(const Eigen::VectorXd& energies, double e_ref,
                      const Tolerances& tol) {
  Eigen::Index best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index b = 0; b < energies.size(); ++b) {
    double d = std::abs(energies[b] - e_ref);
    if (d < best_dist) {
      best_dist = d;
      best = b;
    }
  }
  double sep = std::numeric_limits<double>::infinity();
  if (best > 0) sep = std::min(sep, energies[best] - energies[best - 1]);
  if (best + 1 < energies.size()) {
    sep = std::min(sep, energies[best + 1] - energies[best]);
  }
  if (sep < tol.simple(energies[best])) {
    throw BandCrossingError(
        "band crossing inside the finite-difference stencil (eigenvalue gap " +
        std::to_string(sep) + ")");
  }
  return energies[best];
}

}  // namespace

BandEdge::BandEdge(const PeriodicPotential& V, int band,
                   const Eigen::VectorXd& k_star, int pw_cutoff,
                   const Tolerances& tol)
    : V_(V),
      band_(band),
      kstar_(require_corner(k_star)),
      basis_(V.dimension(), pw_cutoff, k_star),
      tol_(tol) {
  CellSolve sol = solve_cell(V_, kstar_, pw_cutoff, true);
  if (band < 0 || band >= sol.energies.size()) {
    throw DomainError("band index out of range");
  }
  energy_ = sol.energies[band];

  simplicity_gap_ = std::numeric_limits<double>::infinity();
  if (band > 0) {
    simplicity_gap_ =
        std::min(simplicity_gap_, energy_ - sol.energies[band - 1]);
  }
  if (band + 1 < sol.energies.size()) {
    simplicity_gap_ =
        std::min(simplicity_gap_, sol.energies[band + 1] - energy_);
  }
  if (simplicity_gap_ < tol_.simple(energy_)) {
    throw HypothesisError("H2(a)", "degenerate edge: nearest eigenvalue within " +
                                       std::to_string(simplicity_gap_) +
                                       " of E = " + std::to_string(energy_));
  }

  // Gradient residual by central differences of the neighboring solves.
  // E_b(k) is even about every corner (real V), so the central difference is
  // noise-limited; h = 1e-3 keeps the eigensolver noise well below tol.grad.
  const double h = 1e-3;
  double grad2 = 0.0;
  for (int j = 0; j < V.dimension(); ++j) {
    Eigen::VectorXd kp = kstar_, km = kstar_;
    kp[j] += h;
    km[j] -= h;
    double ep = tracked_energy(solve_cell(V_, kp, pw_cutoff, false).energies,
                               energy_, tol_);
    double em = tracked_energy(solve_cell(V_, km, pw_cutoff, false).energies,
                               energy_, tol_);
    double g = (ep - em) / (2.0 * h);
    grad2 += g * g;
  }
  gradient_residual_ = std::sqrt(grad2);
  if (gradient_residual_ >= tol_.grad) {
    throw HypothesisError(
        "H2(b)", "not a critical point: |grad E| = " +
                     std::to_string(gradient_residual_) + " at the edge");
  }

  // Real gauge: for w = exp(i phi) r with r real-valued, the pairing sum
  // sum_m w_m w_{rho(m)} equals exp(2 i phi) ||r||^2, which fixes the global
  // phase; afterwards project onto real-valued functions and certify.
  CellCoeffs w = sol.vectors.col(band);
  Complex pairing(0.0);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    Eigen::Index p = basis_.conjugate_partner(i);
    if (p >= 0) pairing += w[i] * w[p];
  }
  if (std::abs(pairing) > 0.5) {
    w *= std::polar(1.0, -0.5 * std::arg(pairing));
  }
  Eigen::Index peak;
  w.cwiseAbs().maxCoeff(&peak);
  w = pw_project_real(basis_, w, &realness_defect_);
  if (realness_defect_ > 1e-10) {
    throw HypothesisError("H2(a)",
                          "edge eigenfunction could not be gauged real "
                          "(defect " +
                              std::to_string(realness_defect_) + ")");
  }
  w /= w.norm();
  if (w[peak].real() < 0.0) w = -w;
  w_ = w;

  shifted_ = assemble_bloch_matrix(V_, kstar_, pw_cutoff);
  shifted_.diagonal().array() -= Complex(energy_, 0.0);
  // Deflated operator M + w w^H is nonsingular on the whole space.
  Eigen::MatrixXcd deflated = shifted_ + w_ * w_.adjoint();
  deflated_lu_ = std::make_shared<Eigen::PartialPivLU<Eigen::MatrixXcd>>(
      std::move(deflated));
}

CellCoeffs BandEdge::apply_deflated_inverse(const CellCoeffs& g) const {
  if (g.size() != basis_.size()) {
    throw ShapeError("right-hand side does not match the edge basis");
  }
  double gnorm = g.norm();
  if (gnorm == 0.0) return CellCoeffs::Zero(g.size());
  double defect = std::abs(pw_inner(w_, g));
  if (defect > tol_.solvability * gnorm) {
    throw SolvabilityError(
        "Fredholm solvability violated: |<w, g>| / ||g|| = " +
        std::to_string(defect / gnorm) +
        " (right-hand side has a component along the edge eigenfunction)");
  }
  CellCoeffs u = deflated_solve(g);
  double residual = (shifted_ * u - g).norm() / gnorm;
  if (residual > 1e-8) {
    throw SolverError("deflated cell solve residual " +
                      std::to_string(residual) + " exceeds 1e-8");
  }
  return u;
}

CellCoeffs BandEdge::deflated_solve(const CellCoeffs& g) const {
  if (g.size() != basis_.size()) {
    throw ShapeError("right-hand side does not match the edge basis");
  }
  CellCoeffs u = deflated_lu_->solve(g);
  u -= w_ * pw_inner(w_, u);  // exact orthogonality of the output
  double gnorm = g.norm();
  if (gnorm > 0.0) {
    CellCoeffs g_perp = g - w_ * pw_inner(w_, g);
    double residual = (shifted_ * u - g_perp).norm() / gnorm;
    if (residual > 1e-8) {
      throw SolverError("deflated cell solve residual " +
                        std::to_string(residual) + " exceeds 1e-8");
    }
  }
  return u;
}

double BandEdge::solvability_defect(const CellCoeffs& g) const {
  double gnorm = g.norm();
  if (gnorm == 0.0) return 0.0;
  return std::abs(pw_inner(w_, g)) / gnorm;
}

Dispersion dispersion_derivatives(const PeriodicPotential& V, int band,
                                  const Eigen::VectorXd& k_star, int pw_cutoff,
                                  double h, const Tolerances& tol) {
  const int d = V.dimension();
  if (k_star.size() != d) throw ShapeError("k has wrong dimension");
  if (h <= 0.0) throw DomainError("stencil step must be positive");

  CellSolve center = solve_cell(V, k_star, pw_cutoff, false);
  if (band < 0 || band >= center.energies.size()) {
    throw DomainError("band index out of range");
  }
  const double e_ref = center.energies[band];

  std::map<std::array<long, 3>, double> cache;
  auto energy_at = [&](const Eigen::VectorXd& k) {
    std::array<long, 3> key{0, 0, 0};
    for (int j = 0; j < d; ++j) key[j] = std::lround(k[j] * 1e12);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    double e = tracked_energy(solve_cell(V, k, pw_cutoff, false).energies,
                              e_ref, tol);
    cache[key] = e;
    return e;
  };

  auto stencil = [&](double step) {
    Dispersion out;
    out.gradient.resize(d);
    out.hessian.resize(d, d);
    for (int j = 0; j < d; ++j) {
      Eigen::VectorXd kp = k_star, km = k_star;
      kp[j] += step;
      km[j] -= step;
      double ep = energy_at(kp), em = energy_at(km);
      out.gradient[j] = (ep - em) / (2.0 * step);
      out.hessian(j, j) = (ep - 2.0 * e_ref + em) / (step * step);
    }
    for (int j = 0; j < d; ++j) {
      for (int l = j + 1; l < d; ++l) {
        Eigen::VectorXd kpp = k_star, kpm = k_star, kmp = k_star, kmm = k_star;
        kpp[j] += step;
        kpp[l] += step;
        kpm[j] += step;
        kpm[l] -= step;
        kmp[j] -= step;
        kmp[l] += step;
        kmm[j] -= step;
        kmm[l] -= step;
        double v = (energy_at(kpp) - energy_at(kpm) - energy_at(kmp) +
                    energy_at(kmm)) /
                   (4.0 * step * step);
        out.hessian(j, l) = v;
        out.hessian(l, j) = v;
      }
    }
    return out;
  };

  Dispersion coarse = stencil(h);
  Dispersion fine = stencil(h / 2.0);
  Dispersion out;
  // One Richardson step for the second-order central differences.
  out.gradient = (4.0 * fine.gradient - coarse.gradient) / 3.0;
  Eigen::MatrixXd H = (4.0 * fine.hessian - coarse.hessian) / 3.0;
  out.asymmetry = (H - H.transpose()).cwiseAbs().maxCoeff();
  out.hessian = 0.5 * (H + H.transpose());
  return out;
}

double GapInterval::width() const {
  if (!lower || !upper) return std::numeric_limits<double>::infinity();
  return *upper - *lower;
}

bool GapInterval::contains(double e) const {
  return (!lower || e > *lower) && (!upper || e < *upper);
}

GapInterval spectral_gap(const BandStructure& bands, const BandEdge& edge,
                         GapSide side) {
  const double e_star = edge.energy();
  const double tol = 1e-10 * std::max(1.0, std::abs(e_star));
  // Spectrum approximated by the union of per-band sampled ranges.
  std::vector<std::pair<double, double>> intervals;
  for (int b = 0; b < bands.n_bands(); ++b) {
    intervals.emplace_back(bands.energies.col(b).minCoeff(),
                           bands.energies.col(b).maxCoeff());
  }
  std::sort(intervals.begin(), intervals.end());
  GapInterval gap;
  gap.side = side;
  if (side == GapSide::Below) {
    gap.upper = e_star;
    double lower = -std::numeric_limits<double>::infinity();
    for (const auto& [lo, hi] : intervals) {
      if (hi < e_star - tol) lower = std::max(lower, hi);
      // A band covering energies just below the edge closes the gap.
      if (lo < e_star - tol && hi >= e_star - tol) {
        throw GaplessError("gapless edge: spectrum reaches " +
                           std::to_string(hi) + " just below E = " +
                           std::to_string(e_star));
      }
    }
    if (std::isfinite(lower)) gap.lower = lower;
  } else {
    gap.lower = e_star;
    double upper = std::numeric_limits<double>::infinity();
    bool found = false;
    for (const auto& [lo, hi] : intervals) {
      if (lo > e_star + tol) {
        upper = std::min(upper, lo);
        found = true;
      }
      if (hi > e_star + tol && lo <= e_star + tol) {
        throw GaplessError("gapless edge: spectrum reaches " +
                           std::to_string(lo) + " just above E = " +
                           std::to_string(e_star));
      }
    }
    if (found) {
      gap.upper = upper;
    } else {
      throw GaplessError("no spectral band found above the edge");
    }
  }
  if (gap.width() < 1e-10) {
    throw GaplessError("gapless edge: interval width " +
                       std::to_string(gap.width()));
  }
  return gap;
}

}  // namespace bandgap
