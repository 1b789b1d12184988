#include "oracles.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <stdexcept>

namespace oracles {

namespace {

// Smallest `count` eigenvalues of the twisted finite-difference matrix by
// shift-invert power iteration with deflation.
std::vector<double> fd_eigs(const std::function<double(double)>& V, double k,
                            int n, int count) {
  const double h = 1.0 / n;
  double wrap;
  if (k == 0.0) {
    wrap = 1.0;
  } else if (k == 0.5) {
    wrap = -1.0;
  } else {
    throw std::invalid_argument("oracle supports k in {0, 1/2}");
  }
  double vmin = 0.0;
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < n; ++i) {
    double v = V(i * h);
    vmin = std::min(vmin, v);
    trip.emplace_back(i, i, 2.0 / (h * h) + v);
    int ip = (i + 1) % n, im = (i - 1 + n) % n;
    double sp = (i + 1 == n) ? wrap : 1.0;
    double sm = (i == 0) ? wrap : 1.0;
    trip.emplace_back(i, ip, -sp / (h * h));
    trip.emplace_back(i, im, -sm / (h * h));
  }
  Eigen::SparseMatrix<double> H(n, n);
  H.setFromTriplets(trip.begin(), trip.end());
  double sigma = vmin - 1.0;
  Eigen::SparseMatrix<double> S = H;
  for (int i = 0; i < n; ++i) S.coeffRef(i, i) -= sigma;
  S.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(S);
  if (lu.info() != Eigen::Success) {
    throw std::runtime_error("oracle factorization failed");
  }

  std::vector<Eigen::VectorXd> found;
  std::vector<double> eigs;
  for (int want = 0; want < count; ++want) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) {
      v[i] = std::sin(0.37 * (i + 1) + 0.71 * (want + 1)) + 1e-3;
    }
    for (const auto& f : found) v -= f * f.dot(v);
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 500; ++it) {
      Eigen::VectorXd w = lu.solve(v);
      for (const auto& f : found) w -= f * f.dot(w);
      w.normalize();
      double next = w.dot(H * w);
      double res = (H * w - next * w).norm();
      v = w;
      lambda = next;
      if (res < 1e-11 * std::max(1.0, std::abs(next))) break;
    }
    found.push_back(v);
    eigs.push_back(lambda);
  }
  std::sort(eigs.begin(), eigs.end());
  return eigs;
}

}  // namespace

std::vector<double> periodic_eigenvalues_1d(
    const std::function<double(double)>& V, double k, int n, int count) {
  std::vector<double> coarse = fd_eigs(V, k, n, count);
  std::vector<double> fine = fd_eigs(V, k, 2 * n, count);
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) {
    out[i] = (4.0 * fine[i] - coarse[i]) / 3.0;
  }
  return out;
}

Eigen::VectorXd first_order_cell_solution(
    const std::function<double(double)>& w, const std::vector<double>& x) {
  // Cumulative trapezoid of w^-2 on a fine uniform grid of the unit cell.
  const int n = 20000;
  const double h = 1.0 / n;
  std::vector<double> cum(n + 1, 0.0);
  auto integrand = [&](double t) {
    double wt = w(t);
    return 1.0 / (wt * wt);
  };
  for (int i = 0; i < n; ++i) {
    cum[i + 1] = cum[i] + 0.5 * h * (integrand(i * h) + integrand((i + 1) * h));
  }
  const double total = cum[n];

  auto cum_at = [&](double t) {
    // Whole periods plus the fractional remainder (the integrand is
    // periodic).
    double periods = std::floor(t);
    double frac = t - periods;
    double s = frac * n;
    int i = std::min(static_cast<int>(s), n - 1);
    double loc = cum[i] + (s - i) * (cum[i + 1] - cum[i]);
    return periods * total + loc;
  };

  Eigen::VectorXd g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    g[i] = w(x[i]) * (-x[i] + cum_at(x[i]) / total);
  }
  // Remove the w-component (the library's deflated solve returns the
  // representative orthogonal to w).
  Eigen::VectorXd ws(x.size());
  for (size_t i = 0; i < x.size(); ++i) ws[i] = w(x[i]);
  g -= ws * (ws.dot(g) / ws.dot(ws));
  return g;
}

}  // namespace oracles
