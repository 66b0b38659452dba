#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cail/errors.hpp"
#include "cail/rng.hpp"

// Minimal dense/conv layer kit with explicit backward passes. Layers are
// stateless with respect to activations: callers own the buffers, so one
// network can serve many batch shapes without reallocation. Templated on
// the scalar so training runs in float while gradient checks run the same
// code in double.

namespace cail::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;  // features x batch
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

int num_threads();
void set_num_threads(int n);

// Deterministic static partition of [0, n) across the configured threads.
// fn(tid, begin, end); chunk boundaries depend only on (n, thread count).
void parallel_chunks(std::int64_t n,
                     const std::function<void(int, std::int64_t, std::int64_t)>& fn);

// ---------------------------------------------------------------------------
// Parameter bookkeeping

template <class S>
struct ParamRef {
  std::string name;
  S* value = nullptr;
  S* grad = nullptr;
  std::size_t size = 0;
};

template <class S>
using ParamList = std::vector<ParamRef<S>>;

template <class S>
std::size_t param_count(const ParamList<S>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.size;
  return n;
}

template <class S>
void zero_grads(const ParamList<S>& params) {
  for (const auto& p : params)
    std::fill(p.grad, p.grad + p.size, S(0));
}

// FNV-1a over the raw parameter bytes; used by the gradient-routing checks.
template <class S>
std::uint64_t hash_params(const ParamList<S>& params) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.value);
    for (std::size_t i = 0; i < p.size * sizeof(S); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

// Orthogonal init (Gram-Schmidt on a Gaussian draw, computed in double),
// zero biases. `rows x cols` in column-major order.
void orthogonal_init(double* w, int rows, int cols, RngStream& rng);

template <class S>
void orthogonal_init_into(S* w, int rows, int cols, RngStream& rng) {
  std::vector<double> tmp(static_cast<std::size_t>(rows) * cols);
  orthogonal_init(tmp.data(), rows, cols, rng);
  for (std::size_t i = 0; i < tmp.size(); ++i) w[i] = static_cast<S>(tmp[i]);
}

// ---------------------------------------------------------------------------
// Dense layer

template <class S>
struct Linear {
  int in = 0, out = 0;
  std::vector<S> w, b, gw, gb;  // w is out x in, column-major

  Linear() = default;
  Linear(int in_dim, int out_dim) { init_shape(in_dim, out_dim); }

  void init_shape(int in_dim, int out_dim) {
    in = in_dim;
    out = out_dim;
    w.assign(std::size_t(in) * out, S(0));
    b.assign(out, S(0));
    gw.assign(w.size(), S(0));
    gb.assign(b.size(), S(0));
  }

  void init_weights(RngStream& rng) {
    orthogonal_init_into(w.data(), out, in, rng);
    std::fill(b.begin(), b.end(), S(0));
  }

  void register_params(ParamList<S>& list, const std::string& prefix) {
    list.push_back({prefix + ".w", w.data(), gw.data(), w.size()});
    list.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
  }

  Eigen::Map<const Mat<S>> W() const {
    return Eigen::Map<const Mat<S>>(w.data(), out, in);
  }

  bool wide() const { return std::size_t(in) * out >= (std::size_t(1) << 18); }

  // Y = W X + b. Wide layers split the batch across threads.
  void fwd(const Eigen::Ref<const Mat<S>>& x, Mat<S>& y) const {
    const auto cols = x.cols();
    y.resize(out, cols);
    const auto bias = Eigen::Map<const Vec<S>>(b.data(), out);
    if (!wide() || cols < 8 || num_threads() <= 1) {
      y.noalias() = W() * x;
      y.colwise() += bias;
      return;
    }
    parallel_chunks(cols, [&](int, std::int64_t lo, std::int64_t hi) {
      y.middleCols(lo, hi - lo).noalias() = W() * x.middleCols(lo, hi - lo);
      y.middleCols(lo, hi - lo).colwise() += bias;
    });
  }

  // Accumulates parameter grads; optionally produces dX.
  void bwd(const Eigen::Ref<const Mat<S>>& x, const Eigen::Ref<const Mat<S>>& dy,
           Mat<S>* dx, bool accum_params = true) {
    const auto cols = x.cols();
    const bool par = wide() && cols >= 8 && num_threads() > 1;
    if (accum_params) {
      auto gwm = Eigen::Map<Mat<S>>(gw.data(), out, in);
      if (par) {
        // Disjoint output rows per thread: deterministic without buffers.
        parallel_chunks(out, [&](int, std::int64_t lo, std::int64_t hi) {
          gwm.middleRows(lo, hi - lo).noalias() +=
              dy.middleRows(lo, hi - lo) * x.transpose();
        });
      } else {
        gwm.noalias() += dy * x.transpose();
      }
      Eigen::Map<Vec<S>>(gb.data(), out).noalias() += dy.rowwise().sum();
    }
    if (dx) {
      dx->resize(in, cols);
      if (par) {
        parallel_chunks(cols, [&](int, std::int64_t lo, std::int64_t hi) {
          dx->middleCols(lo, hi - lo).noalias() =
              W().transpose() * dy.middleCols(lo, hi - lo);
        });
      } else {
        dx->noalias() = W().transpose() * dy;
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Elementwise activations (output cached by the caller)

template <class S>
void relu_fwd(Mat<S>& x) {
  x = x.cwiseMax(S(0));
}

template <class S>
void relu_bwd(const Mat<S>& y, Mat<S>& dy) {
  dy.array() *= (y.array() > S(0)).template cast<S>();
}

template <class S>
void tanh_fwd(Mat<S>& x) {
  x = x.array().tanh().matrix();
}

template <class S>
void tanh_bwd(const Mat<S>& y, Mat<S>& dy) {
  dy.array() *= (S(1) - y.array().square());
}

// ---------------------------------------------------------------------------
// Layer normalization over the feature dimension, with affine gain/bias.

template <class S>
struct LayerNorm {
  int dim = 0;
  S eps = S(1e-5);
  std::vector<S> gamma, beta, ggamma, gbeta;

  LayerNorm() = default;
  explicit LayerNorm(int d) { init_shape(d); }

  void init_shape(int d) {
    dim = d;
    gamma.assign(d, S(1));
    beta.assign(d, S(0));
    ggamma.assign(d, S(0));
    gbeta.assign(d, S(0));
  }

  void register_params(ParamList<S>& list, const std::string& prefix) {
    list.push_back({prefix + ".gamma", gamma.data(), ggamma.data(), gamma.size()});
    list.push_back({prefix + ".beta", beta.data(), gbeta.data(), beta.size()});
  }

  struct Acts {
    Mat<S> xhat;      // dim x B
    Vec<S> inv_std;   // B
  };

  void fwd(const Eigen::Ref<const Mat<S>>& x, Acts& acts, Mat<S>& y) const {
    const auto B = x.cols();
    acts.xhat.resize(dim, B);
    acts.inv_std.resize(B);
    y.resize(dim, B);
    const auto g = Eigen::Map<const Vec<S>>(gamma.data(), dim);
    const auto bta = Eigen::Map<const Vec<S>>(beta.data(), dim);
    for (Eigen::Index c = 0; c < B; ++c) {
      const S mu = x.col(c).mean();
      const S var = (x.col(c).array() - mu).square().sum() / S(dim);
      const S inv = S(1) / std::sqrt(var + eps);
      acts.inv_std[c] = inv;
      acts.xhat.col(c) = (x.col(c).array() - mu) * inv;
      y.col(c) = acts.xhat.col(c).cwiseProduct(g) + bta;
    }
  }

  void bwd(const Acts& acts, const Eigen::Ref<const Mat<S>>& dy, Mat<S>& dx) {
    const auto B = dy.cols();
    dx.resize(dim, B);
    const auto g = Eigen::Map<const Vec<S>>(gamma.data(), dim);
    auto gg = Eigen::Map<Vec<S>>(ggamma.data(), dim);
    auto gb = Eigen::Map<Vec<S>>(gbeta.data(), dim);
    for (Eigen::Index c = 0; c < B; ++c) {
      gg.noalias() += dy.col(c).cwiseProduct(acts.xhat.col(c));
      gb.noalias() += dy.col(c);
      const Vec<S> dxhat = dy.col(c).cwiseProduct(g);
      const S m1 = dxhat.mean();
      const S m2 = dxhat.cwiseProduct(acts.xhat.col(c)).mean();
      dx.col(c) = (dxhat.array() - m1 - acts.xhat.col(c).array() * m2) *
                  acts.inv_std[c];
    }
  }
};

// ---------------------------------------------------------------------------
// 3x3 valid convolution, NHWC layout, weights [ky][kx][ic][oc].

template <class S>
struct Conv2d {
  int in_c = 0, out_c = 0, stride = 1;
  std::vector<S> w, b, gw, gb;

  Conv2d() = default;
  Conv2d(int ic, int oc, int s) { init_shape(ic, oc, s); }

  void init_shape(int ic, int oc, int s) {
    in_c = ic;
    out_c = oc;
    stride = s;
    w.assign(std::size_t(9) * ic * oc, S(0));
    b.assign(oc, S(0));
    gw.assign(w.size(), S(0));
    gb.assign(b.size(), S(0));
  }

  void init_weights(RngStream& rng) {
    // Flattened as (oc) x (9*ic); scattered back into [ky][kx][ic][oc].
    std::vector<double> flat(w.size());
    orthogonal_init(flat.data(), out_c, 9 * in_c, rng);
    for (int t = 0; t < 9 * in_c; ++t)
      for (int oc = 0; oc < out_c; ++oc)
        w[std::size_t(t) * out_c + oc] = static_cast<S>(flat[std::size_t(t) * out_c + oc]);
    std::fill(b.begin(), b.end(), S(0));
  }

  void register_params(ParamList<S>& list, const std::string& prefix) {
    list.push_back({prefix + ".w", w.data(), gw.data(), w.size()});
    list.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
  }

  static int out_dim(int in_dim, int stride) { return (in_dim - 3) / stride + 1; }

  // Buffer sizes (in scalars) the per-image scratch must provide.
  std::size_t scratch_size(int h, int w_in) const {
    return std::size_t(9) * in_c * out_dim(h, stride) * out_dim(w_in, stride);
  }

  // The kernels lower onto GEMM: with NHWC activations and [ky][kx][ic][oc]
  // weights, the weight tensor is exactly a column-major (out_c x 9*in_c)
  // matrix and the output image a column-major (out_c x pixels) matrix.

  // Forward for one image, fused bias + optional ReLU.
  void fwd_one(const S* in, int h, int w_in, S* out, bool relu, S* scratch) const;

  // dIn for one image from the (already ReLU-masked) output gradient.
  void bwd_input_one(const S* dout, int h, int w_in, S* din, S* scratch) const;

  // Accumulate weight/bias grads for one image into caller-owned buffers
  // (per-thread, reduced deterministically by the caller).
  void bwd_params_one(const S* in, const S* dout, int h, int w_in, S* gw_acc,
                      S* gb_acc, S* scratch) const;

 private:
  void im2col(const S* in, int h, int w_in, S* col) const;
};

// ---------------------------------------------------------------------------
// L2 normalization of column embeddings.

template <class S>
struct L2NormActs {
  Mat<S> z;          // unit columns
  Vec<S> inv_norm;   // 1 / ||y||
};

template <class S>
void l2norm_fwd(const Eigen::Ref<const Mat<S>>& y, L2NormActs<S>& acts) {
  const auto B = y.cols();
  acts.z.resize(y.rows(), B);
  acts.inv_norm.resize(B);
  // Epsilon floor keeps a fully-dead ReLU column from dividing by zero; at
  // any realistic head width the norm never lands in this regime.
  constexpr S kNormFloor = S(1e-12);
  for (Eigen::Index c = 0; c < B; ++c) {
    const S n = std::max(y.col(c).norm(), kNormFloor);
    acts.inv_norm[c] = S(1) / n;
    acts.z.col(c) = y.col(c) * acts.inv_norm[c];
  }
}

template <class S>
void l2norm_bwd(const L2NormActs<S>& acts, const Eigen::Ref<const Mat<S>>& dz,
                Mat<S>& dy) {
  const auto B = dz.cols();
  dy.resize(dz.rows(), B);
  for (Eigen::Index c = 0; c < B; ++c) {
    const S dot = acts.z.col(c).dot(dz.col(c));
    dy.col(c) = (dz.col(c) - acts.z.col(c) * dot) * acts.inv_norm[c];
  }
}

// ---------------------------------------------------------------------------
// Adam (beta1 = 0.9, beta2 = 0.999, eps = 1e-8) over a parameter list.

template <class S>
class Adam {
 public:
  Adam() = default;
  explicit Adam(ParamList<S> params, double lr = 1e-4)
      : params_(std::move(params)), lr_(lr) {
    for (const auto& p : params_) {
      m_.emplace_back(p.size, S(0));
      v_.emplace_back(p.size, S(0));
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    const S alpha = S(lr_ * std::sqrt(bc2) / bc1);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      S* m = m_[k].data();
      S* v = v_[k].data();
      for (std::size_t i = 0; i < p.size; ++i) {
        const S g = p.grad[i];
        m[i] = S(beta1_) * m[i] + S(1.0 - beta1_) * g;
        v[i] = S(beta2_) * v[i] + S(1.0 - beta2_) * g * g;
        p.value[i] -= alpha * m[i] / (std::sqrt(v[i]) + S(eps_));
      }
    }
  }

  const ParamList<S>& params() const { return params_; }
  double lr() const { return lr_; }

 private:
  ParamList<S> params_;
  std::vector<std::vector<S>> m_, v_;
  double lr_ = 1e-4;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
};

// target <- rho * target + (1 - rho) * online, elementwise exact.
template <class S>
void ema_update(const ParamList<S>& target, const ParamList<S>& online, S rho) {
  if (target.size() != online.size()) throw ModelError("ema: param list mismatch");
  for (std::size_t k = 0; k < target.size(); ++k) {
    if (target[k].size != online[k].size) throw ModelError("ema: shape mismatch");
    for (std::size_t i = 0; i < target[k].size; ++i)
      target[k].value[i] = rho * target[k].value[i] + (S(1) - rho) * online[k].value[i];
  }
}

template <class S>
void copy_params(const ParamList<S>& dst, const ParamList<S>& src) {
  if (dst.size() != src.size()) throw ModelError("copy: param list mismatch");
  for (std::size_t k = 0; k < dst.size(); ++k)
    std::copy(src[k].value, src[k].value + src[k].size, dst[k].value);
}

}  // namespace cail::nn
