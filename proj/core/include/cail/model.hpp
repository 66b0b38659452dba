#pragma once

#include <memory>
#include <string>

#include "cail/image.hpp"
#include "cail/nn.hpp"

namespace cail {

// Architecture sizes. Defaults are the training configuration; tests shrink
// them for finite-difference checks.
struct ModelCfg {
  int frame_size = kFrameSize;
  int frame_stack = kFrameStack;
  int conv_channels = 32;
  int repr_dim = 50;
  int head_hidden = 128;
  int proj_dim = 64;
  int mlp_hidden = 256;

  int h1() const { return (frame_size - 3) / 2 + 1; }
  int h2() const { return h1() - 2; }
  int h3() const { return h2() - 2; }
  int h4() const { return h3() - 2; }
  int flat_dim() const { return h4() * h4() * conv_channels; }

  void validate() const;
  bool operator==(const ModelCfg&) const = default;
};

// Output probability clamp keeping -log(1-p) finite.
inline constexpr double kProbClamp = 1e-6;

// ---------------------------------------------------------------------------
// Shared image encoder f: conv x4 (ReLU, strides 2-1-1-1) -> linear ->
// layer norm -> tanh, so every representation component lies in (-1, 1).

template <class S>
struct Encoder {
  ModelCfg cfg;
  nn::Conv2d<S> conv1, conv2, conv3, conv4;
  nn::Linear<S> fc;
  nn::LayerNorm<S> ln;

  struct Acts {
    int batch = 0;
    std::vector<S> in;                 // B * h0*h0*F (HWC)
    std::vector<S> a1, a2, a3, a4;     // post-ReLU conv outputs
    std::vector<S> d1, d2, d3, d4;     // backward scratch
    std::vector<std::vector<S>> scratch;  // per-thread im2col workspace
    nn::Mat<S> fc_out;
    typename nn::LayerNorm<S>::Acts ln_acts;
    nn::Mat<S> r;                      // repr_dim x B, final tanh output
  };

  explicit Encoder(const ModelCfg& c = {});
  void init_weights(RngStream& rng);
  void register_params(nn::ParamList<S>& list, const std::string& prefix);

  // Caller fills acts.in (use prepare() first), then fwd computes acts.r.
  void prepare(Acts& acts, int batch) const;
  void fwd(Acts& acts) const;
  // dR is consumed; parameter grads accumulate.
  void bwd(Acts& acts, nn::Mat<S>& dR);
};

// ---------------------------------------------------------------------------
// Heads. All operate on representation columns (repr_dim x B).

template <class S>
struct DiscHead {
  nn::Linear<S> l1, l2;

  struct Acts {
    nn::Mat<S> h;       // hidden post-ReLU
    nn::Mat<S> logit;   // 1 x B
    nn::Vec<S> p;       // clamped sigmoid
  };

  DiscHead() = default;
  DiscHead(int repr, int hidden) : l1(repr, hidden), l2(hidden, 1) {}
  void init_weights(RngStream& rng) {
    l1.init_weights(rng);
    l2.init_weights(rng);
  }
  void register_params(nn::ParamList<S>& list, const std::string& prefix) {
    l1.register_params(list, prefix + ".l1");
    l2.register_params(list, prefix + ".l2");
  }

  void fwd(const Eigen::Ref<const nn::Mat<S>>& r, Acts& acts) const;
  // dlogit: gradient at the pre-sigmoid output. Writes dR (set semantics).
  void bwd(const Eigen::Ref<const nn::Mat<S>>& r, Acts& acts,
           const Eigen::Ref<const nn::Mat<S>>& dlogit, nn::Mat<S>& dR);
};

template <class S>
struct ProjHead {
  nn::Linear<S> l1, l2;

  struct Acts {
    nn::Mat<S> h;  // hidden post-ReLU
    nn::Mat<S> y;  // pre-normalization
    nn::L2NormActs<S> norm;  // norm.z holds the unit embeddings
  };

  ProjHead() = default;
  ProjHead(int repr, int hidden, int out) : l1(repr, hidden), l2(hidden, out) {}
  void init_weights(RngStream& rng) {
    l1.init_weights(rng);
    l2.init_weights(rng);
  }
  void register_params(nn::ParamList<S>& list, const std::string& prefix) {
    l1.register_params(list, prefix + ".l1");
    l2.register_params(list, prefix + ".l2");
  }

  void fwd(const Eigen::Ref<const nn::Mat<S>>& r, Acts& acts) const;
  // Writes dR (set semantics).
  void bwd(const Eigen::Ref<const nn::Mat<S>>& r, Acts& acts,
           const Eigen::Ref<const nn::Mat<S>>& dz, nn::Mat<S>& dR);
};

template <class S>
struct Actor {
  nn::Linear<S> l1, l2, l3;

  struct Acts {
    nn::Mat<S> h1, h2;
    nn::Mat<S> a;  // tanh output, 1 x B
  };

  Actor() = default;
  Actor(int repr, int hidden) : l1(repr, hidden), l2(hidden, hidden), l3(hidden, 1) {}
  void init_weights(RngStream& rng) {
    l1.init_weights(rng);
    l2.init_weights(rng);
    l3.init_weights(rng);
  }
  void register_params(nn::ParamList<S>& list, const std::string& prefix) {
    l1.register_params(list, prefix + ".l1");
    l2.register_params(list, prefix + ".l2");
    l3.register_params(list, prefix + ".l3");
  }

  void fwd(const Eigen::Ref<const nn::Mat<S>>& r, Acts& acts) const;
  // dA at the tanh output; dR optional, set semantics (the actor update
  // never trains the encoder; BC does).
  void bwd(const Eigen::Ref<const nn::Mat<S>>& r, Acts& acts,
           const Eigen::Ref<const nn::Mat<S>>& dA, nn::Mat<S>* dR);
};

template <class S>
struct Critic {
  nn::Linear<S> l1, l2, l3;

  struct Acts {
    nn::Mat<S> x;  // (repr+1) x B input cache
    nn::Mat<S> h1, h2;
    nn::Mat<S> q;  // 1 x B
  };

  Critic() = default;
  Critic(int repr, int hidden) : l1(repr + 1, hidden), l2(hidden, hidden), l3(hidden, 1) {}
  void init_weights(RngStream& rng) {
    l1.init_weights(rng);
    l2.init_weights(rng);
    l3.init_weights(rng);
  }
  void register_params(nn::ParamList<S>& list, const std::string& prefix) {
    l1.register_params(list, prefix + ".l1");
    l2.register_params(list, prefix + ".l2");
    l3.register_params(list, prefix + ".l3");
  }

  void fwd(const Eigen::Ref<const nn::Mat<S>>& r, const Eigen::Ref<const nn::Mat<S>>& a,
           Acts& acts) const;
  // dQ: 1 x B. dX optional gradient at the (repr+1) input; set accum_params
  // false to route gradients without touching critic weights (actor step).
  void bwd(Acts& acts, const Eigen::Ref<const nn::Mat<S>>& dQ, nn::Mat<S>* dX,
           bool accum_params = true);
};

// ---------------------------------------------------------------------------
// Full network bundle.

enum class Algo { Bc, Gail, GailSe, CailNoCal, Cail };

Algo algo_from_name(const std::string& name);  // throws ConfigError
std::string algo_name(Algo a);

template <class S>
struct Nets {
  ModelCfg cfg;
  Algo algo = Algo::Cail;
  Encoder<S> encoder;
  std::unique_ptr<Encoder<S>> disc_encoder;  // gail only: separate encoder
  DiscHead<S> disc;
  ProjHead<S> proj_unsup, proj_sup;
  Actor<S> actor;
  Critic<S> q1, q2, q1_target, q2_target;

  Nets(const ModelCfg& c, Algo a, RngStream init_rng);

  Encoder<S>& discriminator_encoder() {
    return disc_encoder ? *disc_encoder : encoder;
  }

  // Parameter groups used for optimizers, routing checks, checkpoints.
  nn::ParamList<S> encoder_params();
  nn::ParamList<S> disc_group();     // {f_disc, h_d, h_unsup, h_sup}
  nn::ParamList<S> critic_group();   // {f, Q1, Q2}
  nn::ParamList<S> actor_group();    // {actor}
  nn::ParamList<S> target_params();  // {Q1bar, Q2bar}
  nn::ParamList<S> all_params();

  // Greedy (or noisy) action from a single visual state.
  double act(const VisualState& v, double sigma, double clip_at, RngStream& rng,
             bool explore);

 private:
  typename Encoder<S>::Acts act_scratch_;
  typename Actor<S>::Acts actor_scratch_;
};

// Clamped sigmoid probabilities from logits.
template <class S>
void clamp_probs(const nn::Mat<S>& logits, nn::Vec<S>& p);

// Checkpoint container: save -> load -> bitwise-identical greedy actions.
void save_checkpoint(Nets<float>& nets, const std::string& env_name,
                     const std::string& path);
struct Checkpoint {
  std::unique_ptr<Nets<float>> nets;
  std::string env_name;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cail
