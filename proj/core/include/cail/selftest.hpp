#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace cail::selftest {

// Fast property suite backing `cail selftest` and reused (at larger scale)
// by the acceptance harness. Every check is offline and self-contained.

struct CheckResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

CheckResult check_frozen_loss_values();
CheckResult check_contrastive_oracle(int batches_per_case, std::uint64_t seed);
CheckResult check_closed_forms();
CheckResult check_alpha_affine(std::uint64_t seed);
CheckResult check_cail_wiring();
CheckResult check_permutation_invariance(std::uint64_t seed);
CheckResult check_loss_gradients(std::uint64_t seed);
CheckResult check_network_gradients(std::uint64_t seed);
CheckResult check_gradient_routing();
CheckResult check_tabular_fixed_point();
CheckResult check_env_basics();

std::vector<CheckResult> run_all();

// Prints one line per check; returns true iff everything passed.
bool run(std::ostream& os);

}  // namespace cail::selftest
