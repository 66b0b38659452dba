#include "cail/agent.hpp"

#include <algorithm>
#include <cmath>

#include "cail/errors.hpp"

namespace cail {

namespace {

template <class S>
void fill_input_slice(typename Encoder<S>::Acts& acts, std::size_t col,
                      std::size_t stride, const VisualState& v) {
  v.to_float(acts.in.data() + col * stride);
}

}  // namespace

// ---------------------------------------------------------------------------
// Objectives

template <class S>
LossComponents disc_objective(Nets<S>& nets, typename Encoder<S>::Acts& acts,
                              int n, bool contrastive, S alpha, S tau,
                              S lambda1, S lambda2, bool calibrated,
                              bool with_grads) {
  Encoder<S>& enc = nets.discriminator_encoder();
  enc.fwd(acts);
  const auto& r = acts.r;
  const int m = static_cast<int>(r.cols());

  typename DiscHead<S>::Acts d_acts;
  nets.disc.fwd(r, d_acts);

  // Select the n expert and n agent logits feeding L_dis.
  nn::Mat<S> logit_e(1, n), logit_a(1, n);
  const int expert_base = contrastive ? 2 * n : n;
  for (int i = 0; i < n; ++i) {
    logit_e(0, i) = d_acts.logit(0, expert_base + i);
    logit_a(0, i) = d_acts.logit(0, contrastive ? 2 * i : i);
  }

  LossComponents out;
  nn::Mat<S> dle, dla;
  out.dis = double(dis_loss_from_logits<S>(logit_e, logit_a,
                                           with_grads ? &dle : nullptr,
                                           with_grads ? &dla : nullptr));

  typename ProjHead<S>::Acts u_acts, s_acts;
  nn::Mat<S> dzu, dzs;
  if (contrastive && lambda1 > S(0)) {
    nets.proj_unsup.fwd(r.leftCols(2 * n), u_acts);
    out.unsup = double(unsup_con_loss_batched<S>(u_acts.norm.z, tau,
                                                 with_grads ? &dzu : nullptr));
  }
  if (contrastive && lambda2 > S(0)) {
    nets.proj_sup.fwd(r, s_acts);
    out.csup = double(
        calibrated
            ? c_sup_con_loss_batched<S>(s_acts.norm.z, n, alpha, tau,
                                        with_grads ? &dzs : nullptr)
            : sup_con_loss_batched<S>(s_acts.norm.z, n, tau,
                                      with_grads ? &dzs : nullptr));
  }

  if (with_grads) {
    nn::Mat<S> dR = nn::Mat<S>::Zero(r.rows(), m);
    nn::Mat<S> dlogit = nn::Mat<S>::Zero(1, m);
    for (int i = 0; i < n; ++i) {
      dlogit(0, expert_base + i) = dle(0, i);
      dlogit(0, contrastive ? 2 * i : i) = dla(0, i);
    }
    nn::Mat<S> dr_head;
    nets.disc.bwd(r, d_acts, dlogit, dr_head);
    dR += dr_head;
    if (contrastive && lambda1 > S(0)) {
      dzu *= lambda1;
      nets.proj_unsup.bwd(r.leftCols(2 * n), u_acts, dzu, dr_head);
      dR.leftCols(2 * n) += dr_head;
    }
    if (contrastive && lambda2 > S(0)) {
      dzs *= lambda2;
      nets.proj_sup.bwd(r, s_acts, dzs, dr_head);
      dR += dr_head;
    }
    enc.bwd(acts, dR);
  }
  return out;
}

template <class S>
S td_objective(Nets<S>& nets, typename Encoder<S>::Acts& acts_v,
               const nn::Mat<S>& actions, const nn::Vec<S>& y, bool with_grads,
               bool run_forward) {
  if (run_forward) nets.encoder.fwd(acts_v);
  const auto& r = acts_v.r;
  const int b = static_cast<int>(r.cols());

  typename Critic<S>::Acts c1, c2;
  nets.q1.fwd(r, actions, c1);
  nets.q2.fwd(r, actions, c2);

  S loss = S(0);
  for (int i = 0; i < b; ++i) {
    const S e1 = c1.q(0, i) - y[i];
    const S e2 = c2.q(0, i) - y[i];
    loss += e1 * e1 + e2 * e2;
  }
  loss /= S(2 * b);

  if (with_grads) {
    nn::Mat<S> dq1(1, b), dq2(1, b);
    for (int i = 0; i < b; ++i) {
      dq1(0, i) = (c1.q(0, i) - y[i]) / S(b);
      dq2(0, i) = (c2.q(0, i) - y[i]) / S(b);
    }
    nn::Mat<S> dx1, dx2;
    nets.q1.bwd(c1, dq1, &dx1);
    nets.q2.bwd(c2, dq2, &dx2);
    nn::Mat<S> dR =
        dx1.topRows(r.rows()) + dx2.topRows(r.rows());
    nets.encoder.bwd(acts_v, dR);
  }
  return loss;
}

template <class S>
S actor_objective(Nets<S>& nets, typename Encoder<S>::Acts& acts_v,
                  const nn::Mat<S>& eps, bool with_grads) {
  nets.encoder.fwd(acts_v);
  const auto& r = acts_v.r;
  const int b = static_cast<int>(r.cols());

  typename Actor<S>::Acts a_acts;
  nets.actor.fwd(r, a_acts);
  nn::Mat<S> a = a_acts.a + eps;

  typename Critic<S>::Acts c1, c2;
  nets.q1.fwd(r, a, c1);
  nets.q2.fwd(r, a, c2);

  S loss = S(0);
  for (int i = 0; i < b; ++i) loss += std::min(c1.q(0, i), c2.q(0, i));
  loss = -loss / S(b);

  if (with_grads) {
    nn::Mat<S> dq1 = nn::Mat<S>::Zero(1, b), dq2 = nn::Mat<S>::Zero(1, b);
    for (int i = 0; i < b; ++i) {
      if (c1.q(0, i) <= c2.q(0, i))
        dq1(0, i) = S(-1) / S(b);
      else
        dq2(0, i) = S(-1) / S(b);
    }
    // Route through the critics without touching their parameters, then
    // through the actor; the encoder stays out of the path entirely.
    nn::Mat<S> dx1, dx2;
    nets.q1.bwd(c1, dq1, &dx1, /*accum_params=*/false);
    nets.q2.bwd(c2, dq2, &dx2, /*accum_params=*/false);
    nn::Mat<S> dA = dx1.bottomRows(1) + dx2.bottomRows(1);
    nets.actor.bwd(r, a_acts, dA, nullptr);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Agent

template <class S>
Agent<S>::Agent(Nets<S>& nets, double lr) : nets_(nets) {
  if (nets_.algo == Algo::Bc) {
    nn::ParamList<S> bc;
    nets_.encoder.register_params(bc, "encoder");
    nets_.actor.register_params(bc, "actor");
    adam_bc_.emplace(std::move(bc), lr);
  } else {
    adam_disc_.emplace(nets_.disc_group(), lr);
    adam_critic_.emplace(nets_.critic_group(), lr);
    adam_actor_.emplace(nets_.actor_group(), lr);
  }
}

template <class S>
void Agent<S>::fill_acts(typename Encoder<S>::Acts& acts,
                         const std::vector<const VisualState*>& states,
                         Encoder<S>& enc) {
  enc.prepare(acts, static_cast<int>(states.size()));
  const std::size_t stride = std::size_t(enc.cfg.frame_size) *
                             enc.cfg.frame_size * enc.cfg.frame_stack;
  nn::parallel_chunks(
      static_cast<std::int64_t>(states.size()),
      [&](int, std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i)
          fill_input_slice<S>(acts, std::size_t(i), stride, *states[i]);
      });
}

template <class S>
LossComponents Agent<S>::update_discriminator(
    const std::vector<const Transition*>& batch,
    const std::vector<VisualState>& expert_states, double alpha,
    const UpdateConfig& cfg, RngStream& aug_rng) {
  const int n = static_cast<int>(batch.size());
  if (n < 2) throw BatchTooSmallError("discriminator update needs N >= 2");
  if (static_cast<int>(expert_states.size()) != n)
    throw BatchTooSmallError("expert batch size mismatch");

  const bool contrastive = cfg.lambda1 > 0.0 || cfg.lambda2 > 0.0;
  Encoder<S>& enc = nets_.discriminator_encoder();

  std::vector<const VisualState*> cols;
  ViewBatch views;
  std::vector<VisualState> single_views;
  if (contrastive) {
    std::vector<VisualState> agent_src;
    agent_src.reserve(n);
    for (const auto* t : batch) agent_src.push_back(t->v);
    views = make_views(agent_src, expert_states, cfg.aug, aug_rng);
    cols.reserve(3 * n);
    for (const auto& v : views.agent_views) cols.push_back(&v);
    for (const auto& v : views.expert_views) cols.push_back(&v);
  } else {
    single_views.reserve(2 * n);
    for (const auto* t : batch)
      single_views.push_back(augment(t->v, cfg.aug, aug_rng));
    for (const auto& e : expert_states)
      single_views.push_back(augment(e, cfg.aug, aug_rng));
    cols.reserve(2 * n);
    for (const auto& v : single_views) cols.push_back(&v);
  }

  fill_acts(acts_a_, cols, enc);
  nn::zero_grads(adam_disc_->params());
  const LossComponents out = disc_objective<S>(
      nets_, acts_a_, n, contrastive, S(alpha), S(cfg.tau), S(cfg.lambda1),
      S(cfg.lambda2), cfg.calibrated, /*with_grads=*/true);
  adam_disc_->step();
  return out;
}

template <class S>
double Agent<S>::update_critic(const std::vector<const Transition*>& batch,
                               const UpdateConfig& cfg, RngStream& noise_rng) {
  const int b = static_cast<int>(batch.size());
  if (b < 1) throw BatchTooSmallError("critic update needs a nonempty batch");

  std::vector<const VisualState*> v_cols, vn_cols;
  v_cols.reserve(b);
  vn_cols.reserve(b);
  for (const auto* t : batch) {
    v_cols.push_back(&t->v);
    vn_cols.push_back(&t->v_next);
  }

  // Reward relabeling with the current discriminator.
  nn::Vec<S> rewards(b);
  if (nets_.disc_encoder) {
    fill_acts(acts_disc_, v_cols, *nets_.disc_encoder);
    nets_.disc_encoder->fwd(acts_disc_);
    typename DiscHead<S>::Acts d_acts;
    nets_.disc.fwd(acts_disc_.r, d_acts);
    for (int i = 0; i < b; ++i)
      rewards[i] = S(disc_reward(double(d_acts.p[i])));
  }

  fill_acts(acts_a_, v_cols, nets_.encoder);
  nets_.encoder.fwd(acts_a_);
  if (!nets_.disc_encoder) {
    typename DiscHead<S>::Acts d_acts;
    nets_.disc.fwd(acts_a_.r, d_acts);
    for (int i = 0; i < b; ++i)
      rewards[i] = S(disc_reward(double(d_acts.p[i])));
  }

  // Bootstrap targets from the EMA critics and the smoothed target action.
  fill_acts(acts_b_, vn_cols, nets_.encoder);
  nets_.encoder.fwd(acts_b_);
  typename Actor<S>::Acts a_acts;
  nets_.actor.fwd(acts_b_.r, a_acts);
  nn::Mat<S> a_next = a_acts.a;
  for (int i = 0; i < b; ++i) {
    const double eps =
        std::clamp(noise_rng.gauss(0.0, cfg.sigma), -cfg.noise_clip, cfg.noise_clip);
    a_next(0, i) += S(eps);
  }
  typename Critic<S>::Acts t1, t2;
  nets_.q1_target.fwd(acts_b_.r, a_next, t1);
  nets_.q2_target.fwd(acts_b_.r, a_next, t2);

  nn::Vec<S> y(b);
  nn::Mat<S> actions(1, b);
  for (int i = 0; i < b; ++i) {
    const S gam = std::min(t1.q(0, i), t2.q(0, i));
    y[i] = rewards[i] +
           S(cfg.gamma) * (S(1) - S(batch[i]->done)) * gam;
    actions(0, i) = S(batch[i]->action);
  }

  nn::zero_grads(adam_critic_->params());
  const S loss = td_objective<S>(nets_, acts_a_, actions, y, /*with_grads=*/true,
                                 /*run_forward=*/false);
  adam_critic_->step();
  return double(loss);
}

template <class S>
double Agent<S>::update_actor(const std::vector<const Transition*>& batch,
                              const UpdateConfig& cfg, RngStream& noise_rng) {
  const int b = static_cast<int>(batch.size());
  if (b < 1) throw BatchTooSmallError("actor update needs a nonempty batch");
  std::vector<const VisualState*> v_cols;
  v_cols.reserve(b);
  for (const auto* t : batch) v_cols.push_back(&t->v);
  fill_acts(acts_a_, v_cols, nets_.encoder);

  nn::Mat<S> eps(1, b);
  for (int i = 0; i < b; ++i)
    eps(0, i) = S(std::clamp(noise_rng.gauss(0.0, cfg.sigma), -cfg.noise_clip,
                             cfg.noise_clip));

  nn::zero_grads(adam_actor_->params());
  const S loss = actor_objective<S>(nets_, acts_a_, eps, /*with_grads=*/true);
  adam_actor_->step();
  return double(loss);
}

template <class S>
void Agent<S>::update_targets(double ema_rate) {
  nn::ParamList<S> online;
  nets_.q1.register_params(online, "q1");
  nets_.q2.register_params(online, "q2");
  nn::ema_update(nets_.target_params(), online, S(ema_rate));
}

template <class S>
double Agent<S>::update_bc(const std::vector<const VisualState*>& states,
                           const std::vector<float>& actions) {
  const int b = static_cast<int>(states.size());
  if (b < 1) throw BatchTooSmallError("bc update needs a nonempty batch");
  fill_acts(acts_a_, states, nets_.encoder);
  nets_.encoder.fwd(acts_a_);
  typename Actor<S>::Acts a_acts;
  nets_.actor.fwd(acts_a_.r, a_acts);

  S loss = S(0);
  nn::Mat<S> dA(1, b);
  for (int i = 0; i < b; ++i) {
    const S e = a_acts.a(0, i) - S(actions[i]);
    loss += e * e;
    dA(0, i) = S(2) * e / S(b);
  }
  loss /= S(b);

  nn::zero_grads(adam_bc_->params());
  nn::Mat<S> dR;
  nets_.actor.bwd(acts_a_.r, a_acts, dA, &dR);
  nets_.encoder.bwd(acts_a_, dR);
  adam_bc_->step();
  return double(loss);
}

template <class S>
LossComponents Agent<S>::eval_cail_loss(const ViewBatch& views, double alpha,
                                        const UpdateConfig& cfg) {
  const int n = views.n();
  std::vector<const VisualState*> cols;
  cols.reserve(3 * n);
  for (const auto& v : views.agent_views) cols.push_back(&v);
  for (const auto& v : views.expert_views) cols.push_back(&v);
  fill_acts(acts_a_, cols, nets_.discriminator_encoder());
  return disc_objective<S>(nets_, acts_a_, n, /*contrastive=*/true, S(alpha),
                           S(cfg.tau), S(cfg.lambda1), S(cfg.lambda2),
                           cfg.calibrated, /*with_grads=*/false);
}

double alpha_schedule(long step, long total_steps, double alpha_start,
                      double alpha_end) {
  if (total_steps <= 0) throw ConfigError("total_steps must be positive");
  if (step < 0 || step > total_steps)
    throw ConfigError("alpha_schedule: step out of range");
  return alpha_start +
         (alpha_end - alpha_start) * double(step) / double(total_steps);
}

template class Agent<float>;
template class Agent<double>;
template LossComponents disc_objective<float>(Nets<float>&, Encoder<float>::Acts&,
                                              int, bool, float, float, float,
                                              float, bool, bool);
template LossComponents disc_objective<double>(Nets<double>&, Encoder<double>::Acts&,
                                               int, bool, double, double, double,
                                               double, bool, bool);
template float td_objective<float>(Nets<float>&, Encoder<float>::Acts&,
                                   const nn::Mat<float>&, const nn::Vec<float>&, bool,
                                   bool);
template double td_objective<double>(Nets<double>&, Encoder<double>::Acts&,
                                     const nn::Mat<double>&, const nn::Vec<double>&,
                                     bool, bool);
template float actor_objective<float>(Nets<float>&, Encoder<float>::Acts&,
                                      const nn::Mat<float>&, bool);
template double actor_objective<double>(Nets<double>&, Encoder<double>::Acts&,
                                        const nn::Mat<double>&, bool);

}  // namespace cail
