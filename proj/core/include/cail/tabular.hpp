#pragma once

#include <array>

namespace cail {

// Closed-form sanity check for the discriminator objective: trained to
// convergence on two fixed occupancy measures, a per-state sigmoid
// discriminator must land on D*(s) = rho_e / (rho_e + rho_theta).
struct TabularResult {
  std::array<double, 2> d{};
  int iterations = 0;
};

TabularResult tabular_fixed_point(const std::array<double, 2>& rho_e,
                                  const std::array<double, 2>& rho_theta,
                                  double lr = 2.0, int max_iters = 50000,
                                  double grad_tol = 1e-12);

}  // namespace cail
