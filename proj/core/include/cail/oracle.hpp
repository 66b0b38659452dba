#pragma once

#include <Eigen/Core>
#include <vector>

namespace cail::oracle {

// Brute-force reference for the three contrastive losses: literal nested
// loops over the per-anchor definitions, double precision, no batching and
// no code shared with the production implementations. The batched losses
// must match these within 1e-6.
//
// Inputs are the already-projected embeddings:
//   z_unsup: the 2N agent views through the unsupervised head,
//            pair[i] giving each view's sibling index;
//   z_sup:   all 3N views through the supervised head, agent views first
//            (same order as z_unsup), expert views last.
struct ContrastiveValues {
  double unsup = 0.0;
  double sup = 0.0;
  double csup = 0.0;
};

ContrastiveValues contrastive(const std::vector<Eigen::VectorXd>& z_unsup,
                              const std::vector<Eigen::VectorXd>& z_sup,
                              const std::vector<int>& pair, int n, double alpha,
                              double tau);

}  // namespace cail::oracle
