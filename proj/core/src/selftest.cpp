#include "cail/selftest.hpp"

#include <cmath>
#include <sstream>

#include "cail/agent.hpp"
#include "cail/env.hpp"
#include "cail/losses.hpp"
#include "cail/model.hpp"
#include "cail/oracle.hpp"
#include "cail/tabular.hpp"
#include "cail/trainer.hpp"

namespace cail::selftest {

namespace {

using MatD = nn::Mat<double>;
using VecD = Eigen::VectorXd;

CheckResult pass(std::string name, std::string detail = {}) {
  return {std::move(name), true, std::move(detail)};
}

CheckResult fail(std::string name, std::string detail) {
  return {std::move(name), false, std::move(detail)};
}

VecD random_unit(int dim, RngStream& rng) {
  VecD v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.gauss();
  const double n = v.norm();
  return n > 0 ? VecD(v / n) : VecD::Unit(dim, 0);
}

struct RandomBatch {
  std::vector<VecD> z_unsup, z_sup;
  std::vector<int> pair;
  MatD zu_mat, zs_mat;
  int n = 0;
};

RandomBatch make_random_batch(int n, int dim, RngStream& rng) {
  RandomBatch b;
  b.n = n;
  for (int i = 0; i < 2 * n; ++i) b.z_unsup.push_back(random_unit(dim, rng));
  for (int i = 0; i < 3 * n; ++i) b.z_sup.push_back(random_unit(dim, rng));
  b.pair.resize(2 * n);
  for (int i = 0; i < 2 * n; ++i) b.pair[i] = i ^ 1;
  b.zu_mat.resize(dim, 2 * n);
  for (int i = 0; i < 2 * n; ++i) b.zu_mat.col(i) = b.z_unsup[i];
  b.zs_mat.resize(dim, 3 * n);
  for (int i = 0; i < 3 * n; ++i) b.zs_mat.col(i) = b.z_sup[i];
  return b;
}

ModelCfg tiny_cfg() {
  ModelCfg cfg;
  cfg.frame_size = 16;
  cfg.frame_stack = 1;
  cfg.conv_channels = 2;
  cfg.repr_dim = 3;
  cfg.head_hidden = 3;
  cfg.proj_dim = 2;
  cfg.mlp_hidden = 4;
  return cfg;
}

void fill_random_input(Encoder<double>::Acts& acts, RngStream& rng) {
  for (auto& v : acts.in) v = rng.uniform();
}

// Central finite differences against the analytic grads already stored in
// `params`. Returns the worst combined-tolerance violation ratio.
template <class Eval>
double fd_worst_ratio(const nn::ParamList<double>& params, Eval eval, double h,
                      double rtol, double atol) {
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params)
    analytic.emplace_back(p.grad, p.grad + p.size);
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].size; ++i) {
      double& w = params[k].value[i];
      const double keep = w;
      w = keep + h;
      const double lp = eval();
      w = keep - h;
      const double lm = eval();
      w = keep;
      const double fd = (lp - lm) / (2 * h);
      const double g = analytic[k][i];
      const double err = std::abs(fd - g);
      const double tol = rtol * std::max(std::abs(fd), std::abs(g)) + atol;
      worst = std::max(worst, err / tol);
    }
  }
  return worst;
}

}  // namespace

// ---------------------------------------------------------------------------

CheckResult check_frozen_loss_values() {
  const std::string name = "frozen_loss_values";
  auto near = [](double a, double b, double tol) { return std::abs(a - b) <= tol; };

  // info_nce closed forms
  VecD e1 = VecD::Unit(2, 0), e2 = VecD::Unit(2, 1);
  std::vector<VecD> seven(7, e1);
  if (!near(info_nce(e1, e1, seven, 1.0), std::log(7.0), 1e-9))
    return fail(name, "uniform-similarity info_nce != log 7");
  if (!near(info_nce(e1, e1, {e1, e2}, 1.0), 0.313261687518223, 1e-9))
    return fail(name, "two-element contrast value");
  if (!near(info_nce(e1, e2, {e2}, 1.0), 0.0, 1e-12))
    return fail(name, "singleton denominator should give 0");
  if (!near(sup_single(e1, {e1}, {e1, e2, e2}, 1.0), 0.551444713932051, 1e-9))
    return fail(name, "sup_single frozen value");

  if (!near(dis_loss({0.5}, {0.5}), 2.0 * std::log(2.0), 1e-12))
    return fail(name, "dis_loss at p=0.5");
  if (!near(dis_loss({0.8}, {0.2}), -2.0 * std::log(0.8), 1e-12))
    return fail(name, "dis_loss at (0.8, 0.2)");

  if (!near(disc_reward(0.5), std::log(2.0), 1e-12))
    return fail(name, "disc_reward at 0.5");
  if (disc_reward(1.0 - 1e-6) != 10.0)
    return fail(name, "disc_reward missing upper clip");
  if (!near(disc_reward(1e-6), 1e-6, 1e-8))
    return fail(name, "disc_reward small-p expansion");

  // cosine_sim basics
  if (!near(cosine_sim(e1, e1), 1.0, 1e-12) ||
      !near(cosine_sim(e1, e2), 0.0, 1e-12) ||
      !near(cosine_sim(e1, VecD(-e1)), -1.0, 1e-12))
    return fail(name, "cosine_sim basics");
  return pass(name);
}

CheckResult check_contrastive_oracle(int batches_per_case, std::uint64_t seed) {
  const std::string name = "contrastive_oracle_agreement";
  RngStream rng(seed, 901);
  double worst = 0.0;
  for (int n : {2, 4, 8}) {
    for (int dim : {2, 16}) {
      for (int rep = 0; rep < batches_per_case; ++rep) {
        RandomBatch b = make_random_batch(n, dim, rng);
        const double tau = 0.1 + 0.9 * rng.uniform();
        const double alpha = rng.uniform();
        const auto want =
            oracle::contrastive(b.z_unsup, b.z_sup, b.pair, n, alpha, tau);
        const double got_u = unsup_con_loss_batched<double>(b.zu_mat, tau, nullptr);
        const double got_s = sup_con_loss_batched<double>(b.zs_mat, n, tau, nullptr);
        const double got_c =
            c_sup_con_loss_batched<double>(b.zs_mat, n, alpha, tau, nullptr);
        worst = std::max({worst, std::abs(got_u - want.unsup),
                          std::abs(got_s - want.sup), std::abs(got_c - want.csup)});
      }
    }
  }
  if (worst > 1e-6) {
    std::ostringstream os;
    os << "max |batched - oracle| = " << worst;
    return fail(name, os.str());
  }
  std::ostringstream os;
  os << "max abs err " << worst;
  return pass(name, os.str());
}

CheckResult check_closed_forms() {
  const std::string name = "closed_form_degenerate_batch";
  for (int n : {2, 4, 8}) {
    for (double tau : {0.05, 0.1, 1.0}) {
      MatD zu(3, 2 * n), zs(3, 3 * n);
      for (int i = 0; i < 2 * n; ++i) zu.col(i) = VecD::Unit(3, 0);
      for (int i = 0; i < 3 * n; ++i) zs.col(i) = VecD::Unit(3, 0);
      const double u = unsup_con_loss_batched<double>(zu, tau, nullptr);
      const double s = sup_con_loss_batched<double>(zs, n, tau, nullptr);
      if (std::abs(u - std::log(2.0 * n - 1)) > 1e-9)
        return fail(name, "L_UnSupCon != log(2N-1) on all-equal projections");
      if (std::abs(s - std::log(3.0 * n - 1)) > 1e-9)
        return fail(name, "L_SupCon != log(3N-1) on all-equal projections");
    }
  }
  return pass(name);
}

CheckResult check_alpha_affine(std::uint64_t seed) {
  const std::string name = "alpha_mixture_affine";
  RngStream rng(seed, 902);
  for (int n : {2, 4}) {
    RandomBatch b = make_random_batch(n, 4, rng);
    const double tau = 0.2;
    const double at0 = c_sup_con_loss_batched<double>(b.zs_mat, n, 0.0, tau, nullptr);
    const double at1 = c_sup_con_loss_batched<double>(b.zs_mat, n, 1.0, tau, nullptr);
    for (double a : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const double got = c_sup_con_loss_batched<double>(b.zs_mat, n, a, tau, nullptr);
      const double affine = a * at1 + (1.0 - a) * at0;
      if (std::abs(got - affine) > 1e-9)
        return fail(name, "c_sup_con_loss is not affine in alpha");
    }
    // Endpoints match their standalone definitions via the oracle.
    const auto o0 = oracle::contrastive(b.z_unsup, b.z_sup, b.pair, n, 0.0, tau);
    const auto o1 = oracle::contrastive(b.z_unsup, b.z_sup, b.pair, n, 1.0, tau);
    if (std::abs(at0 - o0.csup) > 1e-9 || std::abs(at1 - o1.csup) > 1e-9)
      return fail(name, "alpha endpoints disagree with the oracle");
  }
  return pass(name);
}

CheckResult check_cail_wiring() {
  const std::string name = "cail_loss_identity";
  LossComponents c;
  c.dis = 0.5;
  c.unsup = 1.0;
  c.csup = 2.0;
  if (c.total(1.0, 1.0) != 3.5) return fail(name, "components (0.5,1,2) != 3.5");
  if (c.total(0.0, 0.0) != c.dis) return fail(name, "lambda=0 total != L_dis");
  if (c.total(1.0, 0.0) != c.dis + c.unsup)
    return fail(name, "lambda2=0 total != L_dis + L_UnSupCon");

  // Objective-level identity on a tiny net: with both lambdas zero the
  // combined objective must equal the discrimination loss bit-for-bit.
  ModelCfg cfg = tiny_cfg();
  RngStream init(7, 1);
  Nets<double> nets(cfg, Algo::Cail, init);
  const int n = 3;
  Encoder<double>::Acts acts;
  nets.encoder.prepare(acts, 3 * n);
  RngStream rng(7, 2);
  fill_random_input(acts, rng);
  const auto with = disc_objective<double>(nets, acts, n, true, 0.4, 0.2, 0.0,
                                           0.0, true, false);
  Encoder<double>::Acts acts2;
  nets.encoder.prepare(acts2, 3 * n);
  acts2.in = acts.in;
  const auto only_dis = disc_objective<double>(nets, acts2, n, true, 0.4, 0.2,
                                               1.0, 1.0, true, false);
  if (with.total(0.0, 0.0) != with.dis || with.dis != only_dis.dis)
    return fail(name, "objective-level lambda wiring broken");
  return pass(name);
}

CheckResult check_permutation_invariance(std::uint64_t seed) {
  const std::string name = "permutation_invariance";
  RngStream rng(seed, 903);
  const int n = 4, dim = 6;
  RandomBatch b = make_random_batch(n, dim, rng);
  const double tau = 0.3, alpha = 0.6;
  const double u0 = unsup_con_loss_batched<double>(b.zu_mat, tau, nullptr);
  const double s0 = sup_con_loss_batched<double>(b.zs_mat, n, tau, nullptr);
  const double c0 = c_sup_con_loss_batched<double>(b.zs_mat, n, alpha, tau, nullptr);

  // Swap agent pair blocks (0,1) <-> (2,3) and permute expert columns.
  MatD zu = b.zu_mat, zs = b.zs_mat;
  zu.col(0).swap(zu.col(2));
  zu.col(1).swap(zu.col(3));
  zs.col(0).swap(zs.col(2));
  zs.col(1).swap(zs.col(3));
  zs.col(2 * n).swap(zs.col(2 * n + 3));
  const double u1 = unsup_con_loss_batched<double>(zu, tau, nullptr);
  const double s1 = sup_con_loss_batched<double>(zs, n, tau, nullptr);
  const double c1 = c_sup_con_loss_batched<double>(zs, n, alpha, tau, nullptr);
  if (std::abs(u0 - u1) > 1e-6 || std::abs(s0 - s1) > 1e-6 ||
      std::abs(c0 - c1) > 1e-6)
    return fail(name, "batch losses change under class-preserving reordering");
  return pass(name);
}

CheckResult check_loss_gradients(std::uint64_t seed) {
  const std::string name = "loss_gradients_vs_fd";
  RngStream rng(seed, 904);
  const int n = 3, dim = 4;
  RandomBatch b = make_random_batch(n, dim, rng);
  const double tau = 0.25, alpha = 0.35, h = 1e-6;

  auto check_mat = [&](MatD& z, auto loss_of_z, const MatD& dz) -> double {
    double worst = 0.0;
    for (int c = 0; c < z.cols(); ++c)
      for (int r = 0; r < z.rows(); ++r) {
        const double keep = z(r, c);
        z(r, c) = keep + h;
        const double lp = loss_of_z();
        z(r, c) = keep - h;
        const double lm = loss_of_z();
        z(r, c) = keep;
        const double fd = (lp - lm) / (2 * h);
        const double err = std::abs(fd - dz(r, c));
        const double tol = 1e-5 * std::max(std::abs(fd), std::abs(dz(r, c))) + 1e-8;
        worst = std::max(worst, err / tol);
      }
    return worst;
  };

  MatD dz;
  unsup_con_loss_batched<double>(b.zu_mat, tau, &dz);
  double w1 = check_mat(b.zu_mat, [&] {
    return unsup_con_loss_batched<double>(b.zu_mat, tau, nullptr);
  }, dz);
  sup_con_loss_batched<double>(b.zs_mat, n, tau, &dz);
  double w2 = check_mat(b.zs_mat, [&] {
    return sup_con_loss_batched<double>(b.zs_mat, n, tau, nullptr);
  }, dz);
  c_sup_con_loss_batched<double>(b.zs_mat, n, alpha, tau, &dz);
  double w3 = check_mat(b.zs_mat, [&] {
    return c_sup_con_loss_batched<double>(b.zs_mat, n, alpha, tau, nullptr);
  }, dz);

  MatD ze(1, n), za(1, n);
  for (int i = 0; i < n; ++i) {
    ze(0, i) = rng.gauss();
    za(0, i) = rng.gauss();
  }
  MatD dze, dza;
  dis_loss_from_logits<double>(ze, za, &dze, &dza);
  double w4 = check_mat(ze, [&] {
    return dis_loss_from_logits<double>(ze, za, nullptr, nullptr);
  }, dze);
  double w5 = check_mat(za, [&] {
    return dis_loss_from_logits<double>(ze, za, nullptr, nullptr);
  }, dza);

  const double worst = std::max({w1, w2, w3, w4, w5});
  if (worst > 1.0) {
    std::ostringstream os;
    os << "worst tolerance ratio " << worst;
    return fail(name, os.str());
  }
  return pass(name);
}

namespace {

// Tiny nets occasionally land a fully-dead ReLU column or a pre-activation
// right on the kink, where central differences are meaningless. Deterministic
// reroll: bump the sub-seed until the batch is healthy.
bool healthy_projection_batch(Nets<double>& nets, Encoder<double>::Acts& acts) {
  nets.encoder.fwd(acts);
  ProjHead<double>::Acts pu, ps;
  nets.proj_unsup.fwd(acts.r, pu);
  nets.proj_sup.fwd(acts.r, ps);
  for (Eigen::Index c = 0; c < pu.y.cols(); ++c)
    if (pu.y.col(c).norm() < 1e-2) return false;
  for (Eigen::Index c = 0; c < ps.y.cols(); ++c)
    if (ps.y.col(c).norm() < 1e-2) return false;
  return true;
}

}  // namespace

CheckResult check_network_gradients(std::uint64_t seed) {
  const std::string name = "network_gradients_vs_fd";
  ModelCfg cfg = tiny_cfg();
  const double h = 1e-6;

  // Eq. (8): combined discriminator objective through encoder and heads.
  {
    RngStream init(seed, 905);
    Nets<double> nets(cfg, Algo::Cail, init);
    const int n = 3;
    Encoder<double>::Acts acts;
    nets.encoder.prepare(acts, 3 * n);
    std::uint64_t sub = 906;
    for (; sub < 906 + 64; ++sub) {
      RngStream rng(seed, sub);
      fill_random_input(acts, rng);
      if (healthy_projection_batch(nets, acts)) break;
    }
    if (sub == 906 + 64) return fail(name, "no healthy tiny batch found");
    const double alpha = 0.4, tau = 0.2, l1 = 1.0, l2 = 1.0;
    auto params = nets.disc_group();
    nn::zero_grads(params);
    disc_objective<double>(nets, acts, n, true, alpha, tau, l1, l2, true, true);
    const double worst = fd_worst_ratio(params, [&] {
      const auto c = disc_objective<double>(nets, acts, n, true, alpha, tau, l1,
                                            l2, true, false);
      return c.total(l1, l2);
    }, h, 1e-5, 1e-8);
    if (worst > 1.0) {
      std::ostringstream os;
      os << "Eq.(8) objective worst ratio " << worst;
      return fail(name, os.str());
    }
  }

  // Eq. (9): TD objective toward fixed targets.
  {
    RngStream init(seed, 907);
    Nets<double> nets(cfg, Algo::Cail, init);
    const int b = 5;
    Encoder<double>::Acts acts;
    nets.encoder.prepare(acts, b);
    RngStream rng(seed, 908);
    fill_random_input(acts, rng);
    nn::Mat<double> actions(1, b);
    nn::Vec<double> y(b);
    for (int i = 0; i < b; ++i) {
      actions(0, i) = rng.uniform(-1.0, 1.0);
      y[i] = rng.gauss();
    }
    auto params = nets.critic_group();
    nn::zero_grads(params);
    td_objective<double>(nets, acts, actions, y, true);
    const double worst = fd_worst_ratio(params, [&] {
      return td_objective<double>(nets, acts, actions, y, false);
    }, h, 1e-5, 1e-8);
    if (worst > 1.0) {
      std::ostringstream os;
      os << "Eq.(9) objective worst ratio " << worst;
      return fail(name, os.str());
    }
  }

  // Eq. (10): actor objective with fixed exploration noise.
  {
    RngStream init(seed, 909);
    Nets<double> nets(cfg, Algo::Cail, init);
    const int b = 5;
    Encoder<double>::Acts acts;
    nets.encoder.prepare(acts, b);
    RngStream rng(seed, 910);
    fill_random_input(acts, rng);
    nn::Mat<double> eps(1, b);
    for (int i = 0; i < b; ++i)
      eps(0, i) = std::clamp(rng.gauss(0.0, 0.2), -0.3, 0.3);
    auto params = nets.actor_group();
    nn::zero_grads(params);
    actor_objective<double>(nets, acts, eps, true);
    const double worst = fd_worst_ratio(params, [&] {
      return actor_objective<double>(nets, acts, eps, false);
    }, h, 1e-5, 1e-8);
    if (worst > 1.0) {
      std::ostringstream os;
      os << "Eq.(10) objective worst ratio " << worst;
      return fail(name, os.str());
    }
  }
  return pass(name);
}

CheckResult check_gradient_routing() {
  const std::string name = "gradient_routing_hashes";
  ModelCfg cfg;  // full-size observations, skinny net
  cfg.conv_channels = 4;
  cfg.repr_dim = 8;
  cfg.head_hidden = 8;
  cfg.proj_dim = 4;
  cfg.mlp_hidden = 8;

  // A couple of genuine env transitions as update fodder.
  const EnvSpec spec = EnvSpec::by_name("pendulum");
  PixelEnv env(spec, RngStream(3, 3));
  std::vector<Transition> store;
  VisualState v = env.reset();
  RngStream act_rng(3, 4);
  for (int i = 0; i < 4; ++i) {
    const double a = act_rng.uniform(-1.0, 1.0);
    const StepResult sr = env.step({a});
    store.push_back({v, float(a), 0.0f, sr.visual, std::uint8_t(sr.done)});
    v = sr.visual;
  }
  std::vector<const Transition*> batch{&store[0], &store[1], &store[2], &store[3]};
  std::vector<VisualState> experts{store[0].v_next, store[1].v_next,
                                   store[2].v_next, store[3].v_next};

  auto hashes = [](Nets<float>& nets) {
    struct H {
      std::uint64_t enc, disc_enc, hd, hu, hs, actor, q1, q2, qt;
    } h{};
    nn::ParamList<float> l;
    nets.encoder.register_params(l, "e");
    h.enc = nn::hash_params(l);
    l.clear();
    if (nets.disc_encoder) {
      nets.disc_encoder->register_params(l, "de");
      h.disc_enc = nn::hash_params(l);
      l.clear();
    }
    nets.disc.register_params(l, "d");
    h.hd = nn::hash_params(l);
    l.clear();
    nets.proj_unsup.register_params(l, "u");
    h.hu = nn::hash_params(l);
    l.clear();
    nets.proj_sup.register_params(l, "s");
    h.hs = nn::hash_params(l);
    l.clear();
    nets.actor.register_params(l, "a");
    h.actor = nn::hash_params(l);
    l.clear();
    nets.q1.register_params(l, "q1");
    h.q1 = nn::hash_params(l);
    l.clear();
    nets.q2.register_params(l, "q2");
    h.q2 = nn::hash_params(l);
    l.clear();
    nets.q1_target.register_params(l, "t1");
    nets.q2_target.register_params(l, "t2");
    h.qt = nn::hash_params(l);
    return h;
  };

  UpdateConfig ucfg;
  RngStream aug_rng(3, 5), noise_rng(3, 6), actor_rng(3, 7);

  {  // cail: disc step touches {f, h_d, h_unsup, h_sup} and nothing else
    Nets<float> nets(cfg, Algo::Cail, RngStream(3, 8));
    Agent<float> agent(nets, 1e-4);
    const auto before = hashes(nets);
    agent.update_discriminator(batch, experts, 0.4, ucfg, aug_rng);
    const auto after = hashes(nets);
    if (after.enc == before.enc || after.hd == before.hd ||
        after.hu == before.hu || after.hs == before.hs)
      return fail(name, "disc step left a trained block untouched");
    if (after.actor != before.actor || after.q1 != before.q1 ||
        after.q2 != before.q2 || after.qt != before.qt)
      return fail(name, "disc step touched actor/critic/target params");

    const auto b2 = hashes(nets);
    const double closs = agent.update_critic(batch, ucfg, noise_rng);
    (void)closs;
    const auto a2 = hashes(nets);
    if (a2.enc == b2.enc || a2.q1 == b2.q1 || a2.q2 == b2.q2)
      return fail(name, "critic step left a trained block untouched");
    if (a2.hd != b2.hd || a2.hu != b2.hu || a2.hs != b2.hs ||
        a2.actor != b2.actor || a2.qt != b2.qt)
      return fail(name, "critic step touched heads/actor/targets");

    const auto b3 = hashes(nets);
    agent.update_actor(batch, ucfg, actor_rng);
    const auto a3 = hashes(nets);
    if (a3.actor == b3.actor)
      return fail(name, "actor step did not move the actor");
    if (a3.enc != b3.enc)
      return fail(name, "actor step changed encoder parameters");
    if (a3.q1 != b3.q1 || a3.q2 != b3.q2 || a3.qt != b3.qt ||
        a3.hd != b3.hd || a3.hu != b3.hu || a3.hs != b3.hs)
      return fail(name, "actor step touched critics/heads/targets");

    const auto b4 = hashes(nets);
    agent.update_targets(0.99);
    const auto a4 = hashes(nets);
    if (a4.qt == b4.qt) return fail(name, "target step did not move targets");
    if (a4.enc != b4.enc || a4.q1 != b4.q1 || a4.q2 != b4.q2 ||
        a4.actor != b4.actor)
      return fail(name, "target step touched online params");
  }

  {  // gail-se mode: lambda = 0 leaves the projection heads untouched
    Nets<float> nets(cfg, Algo::GailSe, RngStream(3, 9));
    Agent<float> agent(nets, 1e-4);
    UpdateConfig se = ucfg;
    se.lambda1 = se.lambda2 = 0.0;
    se.aug = AugMode::None;
    const auto before = hashes(nets);
    agent.update_discriminator(batch, experts, 0.4, se, aug_rng);
    const auto after = hashes(nets);
    if (after.hu != before.hu || after.hs != before.hs)
      return fail(name, "lambda=0 disc step moved projection heads");
    if (after.enc == before.enc || after.hd == before.hd)
      return fail(name, "lambda=0 disc step must still train f and h_d");
  }

  {  // gail: the separate discriminator encoder owns the disc gradients
    Nets<float> nets(cfg, Algo::Gail, RngStream(3, 10));
    Agent<float> agent(nets, 1e-4);
    UpdateConfig g = ucfg;
    g.lambda1 = g.lambda2 = 0.0;
    g.aug = AugMode::None;
    const auto before = hashes(nets);
    agent.update_discriminator(batch, experts, 0.4, g, aug_rng);
    const auto after = hashes(nets);
    if (after.disc_enc == before.disc_enc)
      return fail(name, "gail disc step did not train its own encoder");
    if (after.enc != before.enc)
      return fail(name, "gail disc step leaked into the policy encoder");
  }
  return pass(name);
}

CheckResult check_tabular_fixed_point() {
  const std::string name = "tabular_discriminator_fixed_point";
  const auto res = tabular_fixed_point({0.8, 0.2}, {0.2, 0.8});
  const double e0 = std::abs(res.d[0] - 0.8);
  const double e1 = std::abs(res.d[1] - 0.2);
  if (e0 > 0.05 || e1 > 0.05) {
    std::ostringstream os;
    os << "D* = [" << res.d[0] << ", " << res.d[1] << "], want [0.8, 0.2]";
    return fail(name, os.str());
  }
  std::ostringstream os;
  os << "D* = [" << res.d[0] << ", " << res.d[1] << "] after " << res.iterations
     << " iters";
  return pass(name, os.str());
}

CheckResult check_env_basics() {
  const std::string name = "env_basics";
  const EnvSpec pend = EnvSpec::by_name("pendulum");
  const EnvSpec cart = EnvSpec::by_name("cartpole");

  // Expert frozen examples.
  if (scripted_expert(pend, {0, 0, 0, 0}).u != 0.0)
    return fail(name, "pendulum PD at setpoint should output 0");
  if (scripted_expert(pend, {0, 0, 3.14159265358979323846, 0}).u != 1.0)
    return fail(name, "tie-break at hanging rest should push +1");
  {
    const double u = scripted_expert(cart, {0, 0, 0.1, 0}).u;
    if (std::abs(u - 0.2) > 1e-12)
      return fail(name, "cartpole PD frozen value");
  }

  // Eval reward frozen points.
  if (eval_reward(pend, {0, 0, 0, 0}) != 1.0 ||
      std::abs(eval_reward(pend, {0, 0, 3.14159265358979323846, 0})) > 1e-12 ||
      eval_reward(cart, {0, 0, 0.25, 0}) != 0.0)
    return fail(name, "eval_reward frozen points");

  // Hand-evaluated two-step Euler recurrence from (pi, 0) with u = 1.
  {
    PixelEnv env(pend, RngStream(1, 1));
    PhysState s{0, 0, 3.14159265358979323846, 0};
    const PhysState got = env.integrate(s, {1.0});
    double theta = s.theta, theta_dot = s.theta_dot;
    for (int i = 0; i < 2; ++i) {
      const double acc = -15.0 * std::sin(theta + 3.14159265358979323846) +
                         3.0 * 2.0 * 1.0;
      const double nt = theta + theta_dot * 0.05;
      theta_dot = std::clamp(theta_dot + acc * 0.05, -8.0, 8.0);
      theta = std::fmod(nt + 3.14159265358979323846, 2 * 3.14159265358979323846);
      if (theta <= 0) theta += 2 * 3.14159265358979323846;
      theta -= 3.14159265358979323846;
    }
    if (std::abs(got.theta - theta) > 1e-12 ||
        std::abs(got.theta_dot - theta_dot) > 1e-12)
      return fail(name, "integrator disagrees with the hand recurrence");
  }

  // Determinism: same stream seed, byte-identical visuals.
  {
    PixelEnv a(pend, RngStream(5, 5)), b(pend, RngStream(5, 5));
    if (!(a.reset() == b.reset()))
      return fail(name, "same-seed resets differ");
    if (!(a.step({0.5}).visual == b.step({0.5}).visual))
      return fail(name, "same-seed steps differ");
  }

  // Energy drift at the hanging equilibrium.
  {
    PixelEnv env(pend, RngStream(1, 2));
    PhysState s{0, 0, 3.14159265358979323846, 0};
    auto energy = [&](const PhysState& p) {
      return 0.5 * p.theta_dot * p.theta_dot + pend.gravity * std::cos(p.theta);
    };
    const double e0 = energy(s);
    PhysState cur = s;
    for (int i = 0; i < 200; ++i) cur = env.integrate(cur, {0.0});
    if (std::abs(energy(cur) - e0) >= 0.5)
      return fail(name, "energy drift bound violated at dt = 0.05");
  }

  // Alpha schedule endpoints.
  if (alpha_schedule(0, 100, 0.3, 0.5) != 0.3 ||
      alpha_schedule(100, 100, 0.3, 0.5) != 0.5 ||
      std::abs(alpha_schedule(50, 100, 0.3, 0.5) - 0.4) > 1e-12)
    return fail(name, "alpha schedule endpoints");

  return pass(name);
}

std::vector<CheckResult> run_all() {
  return {
      check_frozen_loss_values(),
      check_contrastive_oracle(/*batches_per_case=*/4, /*seed=*/11),
      check_closed_forms(),
      check_alpha_affine(12),
      check_cail_wiring(),
      check_permutation_invariance(13),
      check_loss_gradients(14),
      check_network_gradients(15),
      check_gradient_routing(),
      check_tabular_fixed_point(),
      check_env_basics(),
  };
}

bool run(std::ostream& os) {
  bool all_ok = true;
  for (const auto& r : run_all()) {
    os << (r.ok ? "[ok]   " : "[FAIL] ") << r.name;
    if (!r.detail.empty()) os << " (" << r.detail << ")";
    os << "\n";
    if (!r.ok) all_ok = false;
  }
  os << (all_ok ? "selftest: all checks passed\n" : "selftest: FAILURES above\n");
  return all_ok;
}

}  // namespace cail::selftest
