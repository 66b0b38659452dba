#include "cail/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

namespace cail::nn {

namespace {
std::atomic<int> g_threads{0};  // 0 = hardware concurrency
}

int num_threads() {
  const int t = g_threads.load(std::memory_order_relaxed);
  if (t > 0) return t;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void set_num_threads(int n) { g_threads.store(n, std::memory_order_relaxed); }

void parallel_chunks(std::int64_t n,
                     const std::function<void(int, std::int64_t, std::int64_t)>& fn) {
  int t = std::min<std::int64_t>(num_threads(), n);
  if (t <= 1) {
    if (n > 0) fn(0, 0, n);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(t - 1);
  for (int tid = 1; tid < t; ++tid) {
    const std::int64_t b = n * tid / t, e = n * (tid + 1) / t;
    workers.emplace_back([&fn, tid, b, e] { fn(tid, b, e); });
  }
  fn(0, 0, n / t);
  for (auto& w : workers) w.join();
}

void orthogonal_init(double* w, int rows, int cols, RngStream& rng) {
  using MatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
  MatD g(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) g(i, j) = rng.gauss();

  // Orthonormalize the smaller side with two-pass modified Gram-Schmidt.
  const bool by_rows = rows <= cols;
  const int k = by_rows ? rows : cols;
  for (int i = 0; i < k; ++i) {
    auto vec = [&](int idx) {
      return by_rows ? g.row(idx).transpose().eval() : g.col(idx).eval();
    };
    Eigen::VectorXd v = vec(i);
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j < i; ++j) {
        const Eigen::VectorXd q = vec(j);
        v -= q * q.dot(v);
      }
    const double n = v.norm();
    if (n < 1e-12) {
      v.setZero();
      v[i % v.size()] = 1.0;
    } else {
      v /= n;
    }
    if (by_rows)
      g.row(i) = v.transpose();
    else
      g.col(i) = v;
  }
  Eigen::Map<MatD>(w, rows, cols) = g;
}

// ---------------------------------------------------------------------------
// 3x3 convolution, lowered onto GEMM. With NHWC activations the im2col
// matrix has contiguous in_c runs per (ky, kx), and the weight layout
// [ky][kx][ic][oc] is exactly the column-major (out_c x 9*in_c) factor.

template <class S>
void Conv2d<S>::im2col(const S* in, int h, int w_in, S* col) const {
  const int oh = out_dim(h, stride), ow = out_dim(w_in, stride);
  const std::size_t k = std::size_t(9) * in_c;
  for (int oy = 0; oy < oh; ++oy) {
    const int iy = oy * stride;
    for (int ox = 0; ox < ow; ++ox) {
      S* dst = col + (std::size_t(oy) * ow + ox) * k;
      const S* src = in + (std::size_t(iy) * w_in + ox * stride) * in_c;
      for (int ky = 0; ky < 3; ++ky) {
        std::copy(src, src + 3 * in_c, dst);
        src += std::size_t(w_in) * in_c;
        dst += 3 * in_c;
      }
    }
  }
}

template <class S>
void Conv2d<S>::fwd_one(const S* in, int h, int w_in, S* out, bool relu,
                        S* scratch) const {
  const int oh = out_dim(h, stride), ow = out_dim(w_in, stride);
  const int pixels = oh * ow, k = 9 * in_c;
  im2col(in, h, w_in, scratch);
  Eigen::Map<const Mat<S>> wm(w.data(), out_c, k);
  Eigen::Map<const Mat<S>> xcol(scratch, k, pixels);
  Eigen::Map<Mat<S>> y(out, out_c, pixels);
  y.noalias() = wm * xcol;
  y.colwise() += Eigen::Map<const Vec<S>>(b.data(), out_c);
  if (relu) y = y.cwiseMax(S(0));
}

template <class S>
void Conv2d<S>::bwd_input_one(const S* dout, int h, int w_in, S* din,
                              S* scratch) const {
  const int oh = out_dim(h, stride), ow = out_dim(w_in, stride);
  const int pixels = oh * ow, k = 9 * in_c;
  Eigen::Map<const Mat<S>> wm(w.data(), out_c, k);
  Eigen::Map<const Mat<S>> dy(dout, out_c, pixels);
  Eigen::Map<Mat<S>> dcol(scratch, k, pixels);
  dcol.noalias() = wm.transpose() * dy;

  // col2im accumulation (windows overlap when stride == 1).
  std::fill(din, din + std::size_t(h) * w_in * in_c, S(0));
  for (int oy = 0; oy < oh; ++oy) {
    const int iy = oy * stride;
    for (int ox = 0; ox < ow; ++ox) {
      const S* src = scratch + (std::size_t(oy) * ow + ox) * k;
      S* dst = din + (std::size_t(iy) * w_in + ox * stride) * in_c;
      for (int ky = 0; ky < 3; ++ky) {
        S* row = dst + std::size_t(ky) * w_in * in_c;
        const S* s = src + std::size_t(ky) * 3 * in_c;
        for (int i = 0; i < 3 * in_c; ++i) row[i] += s[i];
      }
    }
  }
}

template <class S>
void Conv2d<S>::bwd_params_one(const S* in, const S* dout, int h, int w_in,
                               S* gw_acc, S* gb_acc, S* scratch) const {
  const int oh = out_dim(h, stride), ow = out_dim(w_in, stride);
  const int pixels = oh * ow, k = 9 * in_c;
  im2col(in, h, w_in, scratch);
  Eigen::Map<const Mat<S>> xcol(scratch, k, pixels);
  Eigen::Map<const Mat<S>> dy(dout, out_c, pixels);
  Eigen::Map<Mat<S>> gw(gw_acc, out_c, k);
  gw.noalias() += dy * xcol.transpose();
  Eigen::Map<Vec<S>>(gb_acc, out_c).noalias() += dy.rowwise().sum();
}

template struct Conv2d<float>;
template struct Conv2d<double>;

}  // namespace cail::nn
