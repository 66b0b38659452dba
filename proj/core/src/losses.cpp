#include "cail/losses.hpp"

#include <algorithm>
#include <cmath>

#include "cail/errors.hpp"
#include "cail/model.hpp"

namespace cail {

void ContrastConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("lambdas must be >= 0");
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must be in [0, 1]");
}

double cosine_sim(const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
  const double nu = u.norm(), nw = w.norm();
  if (nu == 0.0 || nw == 0.0)
    throw DegenerateInputError("cosine_sim on zero vector");
  return u.dot(w) / (nu * nw);
}

double info_nce(const Eigen::VectorXd& anchor, const Eigen::VectorXd& positive,
                const std::vector<Eigen::VectorXd>& contrast_set, double tau) {
  if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
  if (contrast_set.empty()) throw BatchTooSmallError("empty contrast set");
  const double pos = cosine_sim(anchor, positive) / tau;
  double m = -std::numeric_limits<double>::infinity();
  std::vector<double> sims(contrast_set.size());
  for (std::size_t j = 0; j < contrast_set.size(); ++j) {
    sims[j] = cosine_sim(anchor, contrast_set[j]) / tau;
    m = std::max(m, sims[j]);
  }
  double denom = 0.0;
  for (double s : sims) denom += std::exp(s - m);
  return -pos + m + std::log(denom);
}

double sup_single(const Eigen::VectorXd& anchor,
                  const std::vector<Eigen::VectorXd>& positive_set,
                  const std::vector<Eigen::VectorXd>& contrast_set, double tau) {
  if (positive_set.empty())
    throw BatchTooSmallError("sup_single needs at least one positive");
  double acc = 0.0;
  for (const auto& pos : positive_set)
    acc += info_nce(anchor, pos, contrast_set, tau);
  return acc / double(positive_set.size());
}

double dis_loss(const std::vector<double>& expert_probs,
                const std::vector<double>& agent_probs) {
  if (expert_probs.size() != agent_probs.size() || expert_probs.empty())
    throw BatchTooSmallError("dis_loss needs equal nonempty prob lists");
  double acc = 0.0;
  for (std::size_t i = 0; i < expert_probs.size(); ++i)
    acc += -std::log(expert_probs[i]) - std::log1p(-agent_probs[i]);
  return acc / double(expert_probs.size());
}

double disc_reward(double p) {
  return std::clamp(-std::log1p(-p), 0.0, 10.0);
}

double LossComponents::total() const { return dis + unsup + csup; }
double LossComponents::total(double lambda1, double lambda2) const {
  return dis + lambda1 * unsup + lambda2 * csup;
}

// ---------------------------------------------------------------------------
// Batched implementations. Each builds a coefficient matrix C over the
// similarity entries s_ij = z_i . z_j, so that dL/dZ = Z (C + C^T).

namespace {

template <class S>
S reduce_dz(const Eigen::Ref<const nn::Mat<S>>& z, const nn::Mat<S>& coef,
            nn::Mat<S>* dz) {
  if (dz) dz->noalias() = z * (coef + coef.transpose());
  return S(0);
}

}  // namespace

template <class S>
S unsup_con_loss_batched(const Eigen::Ref<const nn::Mat<S>>& z_agent, S tau,
                         nn::Mat<S>* dz) {
  if (!(tau > S(0))) throw ConfigError("temperature must be positive");
  const int m = static_cast<int>(z_agent.cols());
  if (m < 2 || m % 2 != 0)
    throw BatchTooSmallError("unsup loss needs an even number >= 2 of views");
  nn::Mat<S> gram = z_agent.transpose() * z_agent;
  nn::Mat<S> coef;
  if (dz) coef.setZero(m, m);

  S total = S(0);
  std::vector<S> soft(m);
  const S inv_scale = S(1) / (tau * S(m));
  for (int i = 0; i < m; ++i) {
    const int p = i ^ 1;
    S mx = -std::numeric_limits<S>::infinity();
    for (int j = 0; j < m; ++j)
      if (j != i) mx = std::max(mx, gram(i, j));
    S denom = S(0);
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      soft[j] = std::exp((gram(i, j) - mx) / tau);
      denom += soft[j];
    }
    total += -gram(i, p) / tau + mx / tau + std::log(denom);
    if (dz) {
      for (int j = 0; j < m; ++j)
        if (j != i) coef(i, j) += soft[j] / denom * inv_scale;
      coef(i, p) -= inv_scale;
    }
  }
  reduce_dz<S>(z_agent, coef, dz);
  return total / S(m);
}

template <class S>
S sup_con_loss_batched(const Eigen::Ref<const nn::Mat<S>>& z_all, int n, S tau,
                       nn::Mat<S>* dz) {
  if (!(tau > S(0))) throw ConfigError("temperature must be positive");
  if (n < 2) throw BatchTooSmallError("sup_con_loss needs N >= 2 expert views");
  const int m = 3 * n;
  if (z_all.cols() != m) throw BatchTooSmallError("sup_con_loss: bad batch layout");
  nn::Mat<S> gram = z_all.transpose() * z_all;
  nn::Mat<S> coef;
  if (dz) coef.setZero(m, m);

  S total = S(0);
  std::vector<S> soft(m);
  const S inv_scale = S(1) / (tau * S(n));
  for (int e = 2 * n; e < m; ++e) {
    S mx = -std::numeric_limits<S>::infinity();
    for (int j = 0; j < m; ++j)
      if (j != e) mx = std::max(mx, gram(e, j));
    S denom = S(0);
    for (int j = 0; j < m; ++j) {
      if (j == e) continue;
      soft[j] = std::exp((gram(e, j) - mx) / tau);
      denom += soft[j];
    }
    S pos_sum = S(0);
    for (int j = 2 * n; j < m; ++j)
      if (j != e) pos_sum += gram(e, j);
    total += -pos_sum / (S(n - 1) * tau) + mx / tau + std::log(denom);
    if (dz) {
      for (int j = 0; j < m; ++j)
        if (j != e) coef(e, j) += soft[j] / denom * inv_scale;
      for (int j = 2 * n; j < m; ++j)
        if (j != e) coef(e, j) -= inv_scale / S(n - 1);
    }
  }
  reduce_dz<S>(z_all, coef, dz);
  return total / S(n);
}

template <class S>
S c_sup_con_loss_batched(const Eigen::Ref<const nn::Mat<S>>& z_all, int n,
                         S alpha, S tau, nn::Mat<S>* dz) {
  if (!(tau > S(0))) throw ConfigError("temperature must be positive");
  if (alpha < S(0) || alpha > S(1)) throw ConfigError("alpha must be in [0, 1]");
  if (n < 1) throw BatchTooSmallError("c_sup_con_loss needs N >= 1");
  const int m = 3 * n;
  if (z_all.cols() != m) throw BatchTooSmallError("c_sup_con_loss: bad batch layout");
  nn::Mat<S> gram = z_all.transpose() * z_all;
  nn::Mat<S> coef;
  if (dz) coef.setZero(m, m);

  // Per agent anchor: the supervised term averages info_nce over positives
  // v^e u {p(i)} (N+1 of them); the InfoNCE term keeps p(i) alone. Both use
  // the full contrast set (all views but the anchor), so they share one
  // log-partition and the mixture reduces to positive-weight reweighting.
  S total = S(0);
  std::vector<S> soft(m);
  const S w_exp = alpha / S(n + 1);
  const S w_pair = alpha / S(n + 1) + (S(1) - alpha);
  const S inv_scale = S(1) / (tau * S(2 * n));
  for (int i = 0; i < 2 * n; ++i) {
    const int p = i ^ 1;
    S mx = -std::numeric_limits<S>::infinity();
    for (int j = 0; j < m; ++j)
      if (j != i) mx = std::max(mx, gram(i, j));
    S denom = S(0);
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      soft[j] = std::exp((gram(i, j) - mx) / tau);
      denom += soft[j];
    }
    S pos_sum = w_pair * gram(i, p);
    for (int j = 2 * n; j < m; ++j) pos_sum += w_exp * gram(i, j);
    total += -pos_sum / tau + mx / tau + std::log(denom);
    if (dz) {
      for (int j = 0; j < m; ++j)
        if (j != i) coef(i, j) += soft[j] / denom * inv_scale;
      for (int j = 2 * n; j < m; ++j) coef(i, j) -= w_exp * inv_scale;
      coef(i, p) -= w_pair * inv_scale;
    }
  }
  reduce_dz<S>(z_all, coef, dz);
  return total / S(2 * n);
}

template <class S>
S dis_loss_from_logits(const Eigen::Ref<const nn::Mat<S>>& logit_e,
                       const Eigen::Ref<const nn::Mat<S>>& logit_a,
                       nn::Mat<S>* dlogit_e, nn::Mat<S>* dlogit_a) {
  const auto n = logit_e.cols();
  if (n != logit_a.cols() || n == 0)
    throw BatchTooSmallError("dis_loss needs equal nonempty batches");
  const S eps = S(kProbClamp);
  const S thr = std::log((S(1) - eps) / eps);  // clamp activation threshold
  const S lo_val = -std::log(eps);             // -log p at the lower clamp
  const S hi_val = -std::log1p(-eps);          // -log p at the upper clamp
  auto softplus = [](S x) {
    return x > S(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  };

  if (dlogit_e) dlogit_e->setZero(1, n);
  if (dlogit_a) dlogit_a->setZero(1, n);
  S total = S(0);
  const S inv_n = S(1) / S(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const S ze = logit_e(0, i);
    if (ze < -thr) {
      total += lo_val;
    } else if (ze > thr) {
      total += hi_val;
    } else {
      total += softplus(-ze);
      if (dlogit_e) (*dlogit_e)(0, i) = (S(1) / (S(1) + std::exp(-ze)) - S(1)) * inv_n;
    }
    const S za = logit_a(0, i);
    if (za > thr) {
      total += lo_val;
    } else if (za < -thr) {
      total += hi_val;
    } else {
      total += softplus(za);
      if (dlogit_a) (*dlogit_a)(0, i) = (S(1) / (S(1) + std::exp(-za))) * inv_n;
    }
  }
  return total * inv_n;
}

template float unsup_con_loss_batched<float>(const Eigen::Ref<const nn::Mat<float>>&,
                                             float, nn::Mat<float>*);
template double unsup_con_loss_batched<double>(const Eigen::Ref<const nn::Mat<double>>&,
                                               double, nn::Mat<double>*);
template float sup_con_loss_batched<float>(const Eigen::Ref<const nn::Mat<float>>&, int,
                                           float, nn::Mat<float>*);
template double sup_con_loss_batched<double>(const Eigen::Ref<const nn::Mat<double>>&,
                                             int, double, nn::Mat<double>*);
template float c_sup_con_loss_batched<float>(const Eigen::Ref<const nn::Mat<float>>&,
                                             int, float, float, nn::Mat<float>*);
template double c_sup_con_loss_batched<double>(const Eigen::Ref<const nn::Mat<double>>&,
                                               int, double, double, nn::Mat<double>*);
template float dis_loss_from_logits<float>(const Eigen::Ref<const nn::Mat<float>>&,
                                           const Eigen::Ref<const nn::Mat<float>>&,
                                           nn::Mat<float>*, nn::Mat<float>*);
template double dis_loss_from_logits<double>(const Eigen::Ref<const nn::Mat<double>>&,
                                             const Eigen::Ref<const nn::Mat<double>>&,
                                             nn::Mat<double>*, nn::Mat<double>*);

}  // namespace cail
