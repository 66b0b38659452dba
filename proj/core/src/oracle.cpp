#include "cail/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace cail::oracle {

namespace {

double cos_sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

// One InfoNCE term, written exactly as the per-anchor definition reads.
double nce(const Eigen::VectorXd& anchor, const Eigen::VectorXd& positive,
           const std::vector<const Eigen::VectorXd*>& contrast, double tau) {
  const double num = std::exp(cos_sim(anchor, positive) / tau);
  double den = 0.0;
  for (const auto* c : contrast) den += std::exp(cos_sim(anchor, *c) / tau);
  return -std::log(num / den);
}

}  // namespace

ContrastiveValues contrastive(const std::vector<Eigen::VectorXd>& z_unsup,
                              const std::vector<Eigen::VectorXd>& z_sup,
                              const std::vector<int>& pair, int n, double alpha,
                              double tau) {
  const int two_n = 2 * n, three_n = 3 * n;
  if (static_cast<int>(z_unsup.size()) != two_n ||
      static_cast<int>(z_sup.size()) != three_n ||
      static_cast<int>(pair.size()) != two_n)
    throw std::invalid_argument("oracle: inconsistent batch layout");

  ContrastiveValues out;

  // Unsupervised: anchors are the 2N agent views; contrast set is the other
  // agent views only; the sibling augmentation is the sole positive.
  for (int i = 0; i < two_n; ++i) {
    std::vector<const Eigen::VectorXd*> contrast;
    for (int j = 0; j < two_n; ++j)
      if (j != i) contrast.push_back(&z_unsup[j]);
    out.unsup += nce(z_unsup[i], z_unsup[pair[i]], contrast, tau);
  }
  out.unsup /= double(two_n);

  // Supervised: anchors are the N expert views; positives the other expert
  // views; contrast everything but the anchor.
  if (n >= 2) {
    for (int e = two_n; e < three_n; ++e) {
      std::vector<const Eigen::VectorXd*> contrast;
      for (int j = 0; j < three_n; ++j)
        if (j != e) contrast.push_back(&z_sup[j]);
      double acc = 0.0;
      for (int p = two_n; p < three_n; ++p)
        if (p != e) acc += nce(z_sup[e], z_sup[p], contrast, tau);
      out.sup += acc / double(n - 1);
    }
    out.sup /= double(n);
  }

  // Calibrated: agent anchors; alpha-weighted mixture of the supervised
  // treatment (positives = experts plus the sibling) and the InfoNCE
  // treatment (positive = sibling), both over the full contrast set.
  for (int i = 0; i < two_n; ++i) {
    std::vector<const Eigen::VectorXd*> contrast;
    for (int j = 0; j < three_n; ++j)
      if (j != i) contrast.push_back(&z_sup[j]);
    double sup_term = nce(z_sup[i], z_sup[pair[i]], contrast, tau);
    for (int e = two_n; e < three_n; ++e)
      sup_term += nce(z_sup[i], z_sup[e], contrast, tau);
    sup_term /= double(n + 1);
    const double nce_term = nce(z_sup[i], z_sup[pair[i]], contrast, tau);
    out.csup += alpha * sup_term + (1.0 - alpha) * nce_term;
  }
  out.csup /= double(two_n);

  return out;
}

}  // namespace cail::oracle
