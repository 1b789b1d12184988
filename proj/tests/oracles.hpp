#pragma once

// Independent oracles used by the unit and acceptance tests.  Everything here
// deliberately avoids the library's plane-wave solvers: finite differences,
// quadrature and analytic solutions only.

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace oracles {

// Smallest `count` eigenvalues of -u'' + V(x) u on the unit cell with twisted
// boundary u(x+1) = exp(2 pi i k) u(x), k in {0, 1/2}, by second-order finite
// differences on n points plus one Richardson step (n and 2n).
std::vector<double> periodic_eigenvalues_1d(
    const std::function<double(double)>& V, double k, int n, int count);

// Ground state of -F'' - 2 sech(y)^2 F: e = -1, F(y) = sech(y)/sqrt(2).
inline double poschl_teller_energy() { return -1.0; }
inline double poschl_teller_state(double y) {
  return 1.0 / std::cosh(y) / std::sqrt(2.0);
}

// Closed-form solution of the first-order cell problem in 1D at a positive
// ground state w: returns samples of w(x) (-x + int_0^x w^-2 / int_0^1 w^-2)
// on the given abscissae, with the w-component removed.
Eigen::VectorXd first_order_cell_solution(
    const std::function<double(double)>& w, const std::vector<double>& x);

// C^2 bump with a jump in the third derivative at |y| = 1.
inline double c2_bump(double y) {
  double t = 1.0 - y * y;
  return (t > 0.0) ? t * t * t : 0.0;
}

}  // namespace oracles
