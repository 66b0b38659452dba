#pragma once

#include <Eigen/Core>
#include <vector>

#include "cail/nn.hpp"

namespace cail {

// Contrastive loss hyperparameters.
struct ContrastConfig {
  double tau = 0.1;       // temperature
  double lambda1 = 1.0;   // weight of the unsupervised term
  double lambda2 = 1.0;   // weight of the calibrated supervised term
  double alpha = 0.3;     // mixture weight in [0, 1]

  void validate() const;
};

// ---------------------------------------------------------------------------
// Reference-level scalar operations (double precision), used directly by
// tests and the self test. The batched implementations below are the
// training path.

double cosine_sim(const Eigen::VectorXd& u, const Eigen::VectorXd& w);

// -log( exp(sim(anchor,pos)/tau) / sum_j exp(sim(anchor,contrast_j)/tau) )
double info_nce(const Eigen::VectorXd& anchor, const Eigen::VectorXd& positive,
                const std::vector<Eigen::VectorXd>& contrast_set, double tau);

// Mean info_nce over the positive set (all sharing one contrast set).
double sup_single(const Eigen::VectorXd& anchor,
                  const std::vector<Eigen::VectorXd>& positive_set,
                  const std::vector<Eigen::VectorXd>& contrast_set, double tau);

// (1/N) sum_i [ -log p_e_i - log(1 - p_a_i) ]; probs must already be clamped.
double dis_loss(const std::vector<double>& expert_probs,
                const std::vector<double>& agent_probs);

// -log(1 - p), clipped to [0, 10].
double disc_reward(double p);

// ---------------------------------------------------------------------------
// Batched losses over unit-norm embedding columns. Column layout convention:
//   z_agent: D x 2N, the two augmentations of source k at columns 2k, 2k+1;
//   z_all:   D x 3N, agent views first (same pairing), expert views last.
// Each returns the loss and, when dz is non-null, writes d(loss)/d(z).

template <class S>
S unsup_con_loss_batched(const Eigen::Ref<const nn::Mat<S>>& z_agent, S tau,
                         nn::Mat<S>* dz);

template <class S>
S sup_con_loss_batched(const Eigen::Ref<const nn::Mat<S>>& z_all, int n, S tau,
                       nn::Mat<S>* dz);

template <class S>
S c_sup_con_loss_batched(const Eigen::Ref<const nn::Mat<S>>& z_all, int n,
                         S alpha, S tau, nn::Mat<S>* dz);

// Discrimination loss evaluated from head logits (value identical to
// dis_loss on the clamped probabilities). Gradients are exact derivatives
// of the clamped objective: zero where the clamp is active.
template <class S>
S dis_loss_from_logits(const Eigen::Ref<const nn::Mat<S>>& logit_e,
                       const Eigen::Ref<const nn::Mat<S>>& logit_a,
                       nn::Mat<S>* dlogit_e, nn::Mat<S>* dlogit_a);

// total = dis + lambda1 * unsup + lambda2 * csup
struct LossComponents {
  double dis = 0.0;
  double unsup = 0.0;
  double csup = 0.0;
  double total() const;
  double total(double lambda1, double lambda2) const;
};

}  // namespace cail
