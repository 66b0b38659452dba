#include "cail/tabular.hpp"

#include <cmath>

namespace cail {

TabularResult tabular_fixed_point(const std::array<double, 2>& rho_e,
                                  const std::array<double, 2>& rho_theta,
                                  double lr, int max_iters, double grad_tol) {
  // Full-batch gradient descent on
  //   L(z) = -sum_s rho_e[s] log sigma(z_s) + rho_theta[s] log(1 - sigma(z_s)),
  // convex in each z_s with minimizer sigma(z_s) = rho_e/(rho_e + rho_theta).
  std::array<double, 2> z{0.0, 0.0};
  TabularResult out;
  for (out.iterations = 0; out.iterations < max_iters; ++out.iterations) {
    double max_grad = 0.0;
    for (int s = 0; s < 2; ++s) {
      const double p = 1.0 / (1.0 + std::exp(-z[s]));
      const double grad = -rho_e[s] * (1.0 - p) + rho_theta[s] * p;
      z[s] -= lr * grad;
      max_grad = std::max(max_grad, std::abs(grad));
    }
    if (max_grad < grad_tol) break;
  }
  for (int s = 0; s < 2; ++s) out.d[s] = 1.0 / (1.0 + std::exp(-z[s]));
  return out;
}

}  // namespace cail
