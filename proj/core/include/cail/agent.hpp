#pragma once

#include <optional>
#include <vector>

#include "cail/augment.hpp"
#include "cail/demo.hpp"
#include "cail/losses.hpp"
#include "cail/model.hpp"
#include "cail/replay.hpp"

namespace cail {

// ---------------------------------------------------------------------------
// Objective evaluations shared by the optimizer steps, the gradient checks
// and the self test. Each consumes a prefilled Encoder::Acts input buffer
// (column layout documented per function), returns the loss value, and when
// `with_grads` is set accumulates parameter gradients for the touched nets
// (callers zero grads first).

// Eq.-(8)-style combined objective. Layout when `contrastive`: 2n agent
// views (pairs at 2k, 2k+1) then n expert views; otherwise n agent states
// then n expert states. The discrimination term always sees n expert probs
// and n agent probs (first augmentation of each pair in the contrastive
// layout).
template <class S>
LossComponents disc_objective(Nets<S>& nets, typename Encoder<S>::Acts& acts,
                              int n, bool contrastive, S alpha, S tau,
                              S lambda1, S lambda2, bool calibrated,
                              bool with_grads);

// TD loss toward fixed targets y (targets are constants by definition).
// `actions` is 1 x B. Touches {f, Q1, Q2} when with_grads. Pass
// run_forward = false when acts_v.r already holds the current encoding.
template <class S>
S td_objective(Nets<S>& nets, typename Encoder<S>::Acts& acts_v,
               const nn::Mat<S>& actions, const nn::Vec<S>& y, bool with_grads,
               bool run_forward = true);

// Actor objective -mean_i min(Q1, Q2)(v_i, pi(v_i) + eps_i) with the noise
// vector held fixed. Touches actor parameters only.
template <class S>
S actor_objective(Nets<S>& nets, typename Encoder<S>::Acts& acts_v,
                  const nn::Mat<S>& eps, bool with_grads);

// ---------------------------------------------------------------------------

struct UpdateConfig {
  double gamma = 0.99;
  double tau = 0.1;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double sigma = 0.2;
  double noise_clip = 0.3;
  double ema_rate = 0.99;
  bool calibrated = true;  // false: plain SupCon in place of C-SupCon
  AugMode aug = AugMode::Shift;
};

// One optimization step per sub-network, with the gradient routing fixed:
// the discriminator step trains {f_disc, h_d, h_unsup, h_sup}; the critic
// step trains {f, Q1, Q2}; the actor step trains the actor alone; the
// target step only moves the EMA critics.
template <class S>
class Agent {
 public:
  Agent(Nets<S>& nets, double lr);

  LossComponents update_discriminator(
      const std::vector<const Transition*>& batch,
      const std::vector<VisualState>& expert_states, double alpha,
      const UpdateConfig& cfg, RngStream& aug_rng);

  // Rewards are recomputed from the current discriminator before the TD
  // step; the stored transition rewards are never used.
  double update_critic(const std::vector<const Transition*>& batch,
                       const UpdateConfig& cfg, RngStream& noise_rng);

  double update_actor(const std::vector<const Transition*>& batch,
                      const UpdateConfig& cfg, RngStream& noise_rng);

  void update_targets(double ema_rate);

  // Behavioral cloning step (MSE regression); trains {f, actor}.
  double update_bc(const std::vector<const VisualState*>& states,
                   const std::vector<float>& actions);

  // Forward-only Eq. (8) evaluation on an existing view batch.
  LossComponents eval_cail_loss(const ViewBatch& views, double alpha,
                                const UpdateConfig& cfg);

  Nets<S>& nets() { return nets_; }

 private:
  void fill_acts(typename Encoder<S>::Acts& acts,
                 const std::vector<const VisualState*>& states,
                 Encoder<S>& enc);

  Nets<S>& nets_;
  std::optional<nn::Adam<S>> adam_disc_, adam_critic_, adam_actor_, adam_bc_;
  typename Encoder<S>::Acts acts_a_, acts_b_, acts_disc_;
};

double alpha_schedule(long step, long total_steps, double alpha_start,
                      double alpha_end);

}  // namespace cail
