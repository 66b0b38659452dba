#include "cail/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "cail/errors.hpp"

namespace cail {

void ModelCfg::validate() const {
  if (frame_size < 16 || frame_stack < 1 || conv_channels < 1 || repr_dim < 1 ||
      head_hidden < 1 || proj_dim < 1 || mlp_hidden < 1)
    throw ModelError("model config out of range");
  if (h4() < 1) throw ModelError("frame size too small for the conv stack");
}

// ---------------------------------------------------------------------------
// Encoder

template <class S>
Encoder<S>::Encoder(const ModelCfg& c) : cfg(c) {
  cfg.validate();
  conv1.init_shape(cfg.frame_stack, cfg.conv_channels, 2);
  conv2.init_shape(cfg.conv_channels, cfg.conv_channels, 1);
  conv3.init_shape(cfg.conv_channels, cfg.conv_channels, 1);
  conv4.init_shape(cfg.conv_channels, cfg.conv_channels, 1);
  fc.init_shape(cfg.flat_dim(), cfg.repr_dim);
  ln.init_shape(cfg.repr_dim);
}

template <class S>
void Encoder<S>::init_weights(RngStream& rng) {
  conv1.init_weights(rng);
  conv2.init_weights(rng);
  conv3.init_weights(rng);
  conv4.init_weights(rng);
  fc.init_weights(rng);
}

template <class S>
void Encoder<S>::register_params(nn::ParamList<S>& list, const std::string& prefix) {
  conv1.register_params(list, prefix + ".conv1");
  conv2.register_params(list, prefix + ".conv2");
  conv3.register_params(list, prefix + ".conv3");
  conv4.register_params(list, prefix + ".conv4");
  fc.register_params(list, prefix + ".fc");
  ln.register_params(list, prefix + ".ln");
}

template <class S>
void Encoder<S>::prepare(Acts& acts, int batch) const {
  const int c = cfg.conv_channels;
  acts.batch = batch;
  acts.in.resize(std::size_t(batch) * cfg.frame_size * cfg.frame_size * cfg.frame_stack);
  acts.a1.resize(std::size_t(batch) * cfg.h1() * cfg.h1() * c);
  acts.a2.resize(std::size_t(batch) * cfg.h2() * cfg.h2() * c);
  acts.a3.resize(std::size_t(batch) * cfg.h3() * cfg.h3() * c);
  acts.a4.resize(std::size_t(batch) * cfg.h4() * cfg.h4() * c);

  const std::size_t scratch_sz = std::max(
      {conv1.scratch_size(cfg.frame_size, cfg.frame_size),
       conv2.scratch_size(cfg.h1(), cfg.h1()),
       conv3.scratch_size(cfg.h2(), cfg.h2()),
       conv4.scratch_size(cfg.h3(), cfg.h3())});
  const int threads = std::max(1, nn::num_threads());
  if (static_cast<int>(acts.scratch.size()) < threads)
    acts.scratch.resize(threads);
  for (auto& s : acts.scratch)
    if (s.size() < scratch_sz) s.resize(scratch_sz);
}

template <class S>
void Encoder<S>::fwd(Acts& acts) const {
  const int B = acts.batch;
  const int c = cfg.conv_channels;
  const std::size_t in_sz = std::size_t(cfg.frame_size) * cfg.frame_size * cfg.frame_stack;
  const std::size_t s1 = std::size_t(cfg.h1()) * cfg.h1() * c;
  const std::size_t s2 = std::size_t(cfg.h2()) * cfg.h2() * c;
  const std::size_t s3 = std::size_t(cfg.h3()) * cfg.h3() * c;
  const std::size_t s4 = std::size_t(cfg.h4()) * cfg.h4() * c;

  nn::parallel_chunks(B, [&](int tid, std::int64_t lo, std::int64_t hi) {
    S* scr = acts.scratch[tid].data();
    for (std::int64_t i = lo; i < hi; ++i) {
      conv1.fwd_one(acts.in.data() + i * in_sz, cfg.frame_size, cfg.frame_size,
                    acts.a1.data() + i * s1, true, scr);
      conv2.fwd_one(acts.a1.data() + i * s1, cfg.h1(), cfg.h1(),
                    acts.a2.data() + i * s2, true, scr);
      conv3.fwd_one(acts.a2.data() + i * s2, cfg.h2(), cfg.h2(),
                    acts.a3.data() + i * s3, true, scr);
      conv4.fwd_one(acts.a3.data() + i * s3, cfg.h3(), cfg.h3(),
                    acts.a4.data() + i * s4, true, scr);
    }
  });

  Eigen::Map<const nn::Mat<S>> flat(acts.a4.data(), cfg.flat_dim(), B);
  fc.fwd(flat, acts.fc_out);
  ln.fwd(acts.fc_out, acts.ln_acts, acts.r);
  nn::tanh_fwd(acts.r);
}

template <class S>
void Encoder<S>::bwd(Acts& acts, nn::Mat<S>& dR) {
  const int B = acts.batch;
  const int c = cfg.conv_channels;
  nn::tanh_bwd(acts.r, dR);
  nn::Mat<S> d_fc;
  ln.bwd(acts.ln_acts, dR, d_fc);

  acts.d4.resize(acts.a4.size());
  acts.d3.resize(acts.a3.size());
  acts.d2.resize(acts.a2.size());
  acts.d1.resize(acts.a1.size());
  {
    Eigen::Map<const nn::Mat<S>> flat(acts.a4.data(), cfg.flat_dim(), B);
    nn::Mat<S> d4mat;
    fc.bwd(flat, d_fc, &d4mat);
    std::memcpy(acts.d4.data(), d4mat.data(), acts.d4.size() * sizeof(S));
  }

  const std::size_t in_sz = std::size_t(cfg.frame_size) * cfg.frame_size * cfg.frame_stack;
  const std::size_t s1 = std::size_t(cfg.h1()) * cfg.h1() * c;
  const std::size_t s2 = std::size_t(cfg.h2()) * cfg.h2() * c;
  const std::size_t s3 = std::size_t(cfg.h3()) * cfg.h3() * c;
  const std::size_t s4 = std::size_t(cfg.h4()) * cfg.h4() * c;

  // Per-thread grad accumulators, reduced in thread order below.
  const int T = std::max(1, std::min<int>(nn::num_threads(), B));
  struct GradBuf {
    std::vector<S> gw1, gb1, gw2, gb2, gw3, gb3, gw4, gb4;
  };
  std::vector<GradBuf> bufs(T);
  for (auto& g : bufs) {
    g.gw1.assign(conv1.w.size(), S(0));
    g.gb1.assign(conv1.b.size(), S(0));
    g.gw2.assign(conv2.w.size(), S(0));
    g.gb2.assign(conv2.b.size(), S(0));
    g.gw3.assign(conv3.w.size(), S(0));
    g.gb3.assign(conv3.b.size(), S(0));
    g.gw4.assign(conv4.w.size(), S(0));
    g.gb4.assign(conv4.b.size(), S(0));
  }

  auto mask = [](S* d, const S* a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
      if (!(a[i] > S(0))) d[i] = S(0);
  };

  nn::parallel_chunks(B, [&](int tid, std::int64_t lo, std::int64_t hi) {
    GradBuf& g = bufs[tid];
    S* scr = acts.scratch[tid].data();
    for (std::int64_t i = lo; i < hi; ++i) {
      S* d4 = acts.d4.data() + i * s4;
      mask(d4, acts.a4.data() + i * s4, s4);
      conv4.bwd_params_one(acts.a3.data() + i * s3, d4, cfg.h3(), cfg.h3(),
                           g.gw4.data(), g.gb4.data(), scr);
      conv4.bwd_input_one(d4, cfg.h3(), cfg.h3(), acts.d3.data() + i * s3, scr);

      S* d3 = acts.d3.data() + i * s3;
      mask(d3, acts.a3.data() + i * s3, s3);
      conv3.bwd_params_one(acts.a2.data() + i * s2, d3, cfg.h2(), cfg.h2(),
                           g.gw3.data(), g.gb3.data(), scr);
      conv3.bwd_input_one(d3, cfg.h2(), cfg.h2(), acts.d2.data() + i * s2, scr);

      S* d2 = acts.d2.data() + i * s2;
      mask(d2, acts.a2.data() + i * s2, s2);
      conv2.bwd_params_one(acts.a1.data() + i * s1, d2, cfg.h1(), cfg.h1(),
                           g.gw2.data(), g.gb2.data(), scr);
      conv2.bwd_input_one(d2, cfg.h1(), cfg.h1(), acts.d1.data() + i * s1, scr);

      S* d1 = acts.d1.data() + i * s1;
      mask(d1, acts.a1.data() + i * s1, s1);
      conv1.bwd_params_one(acts.in.data() + i * in_sz, d1, cfg.frame_size,
                           cfg.frame_size, g.gw1.data(), g.gb1.data(), scr);
    }
  });

  for (const auto& g : bufs) {
    for (std::size_t i = 0; i < conv1.gw.size(); ++i) conv1.gw[i] += g.gw1[i];
    for (std::size_t i = 0; i < conv1.gb.size(); ++i) conv1.gb[i] += g.gb1[i];
    for (std::size_t i = 0; i < conv2.gw.size(); ++i) conv2.gw[i] += g.gw2[i];
    for (std::size_t i = 0; i < conv2.gb.size(); ++i) conv2.gb[i] += g.gb2[i];
    for (std::size_t i = 0; i < conv3.gw.size(); ++i) conv3.gw[i] += g.gw3[i];
    for (std::size_t i = 0; i < conv3.gb.size(); ++i) conv3.gb[i] += g.gb3[i];
    for (std::size_t i = 0; i < conv4.gw.size(); ++i) conv4.gw[i] += g.gw4[i];
    for (std::size_t i = 0; i < conv4.gb.size(); ++i) conv4.gb[i] += g.gb4[i];
  }
}

// ---------------------------------------------------------------------------
// Heads

template <class S>
void DiscHead<S>::fwd(const Eigen::Ref<const nn::Mat<S>>& r, Acts& acts) const {
  l1.fwd(r, acts.h);
  nn::relu_fwd(acts.h);
  l2.fwd(acts.h, acts.logit);
  clamp_probs(acts.logit, acts.p);
}

template <class S>
void DiscHead<S>::bwd(const Eigen::Ref<const nn::Mat<S>>& r, Acts& acts,
                      const Eigen::Ref<const nn::Mat<S>>& dlogit, nn::Mat<S>& dR) {
  nn::Mat<S> dh;
  l2.bwd(acts.h, dlogit, &dh);
  nn::relu_bwd(acts.h, dh);
  l1.bwd(r, dh, &dR);
}

template <class S>
void ProjHead<S>::fwd(const Eigen::Ref<const nn::Mat<S>>& r, Acts& acts) const {
  l1.fwd(r, acts.h);
  nn::relu_fwd(acts.h);
  l2.fwd(acts.h, acts.y);
  nn::l2norm_fwd<S>(acts.y, acts.norm);
}

template <class S>
void ProjHead<S>::bwd(const Eigen::Ref<const nn::Mat<S>>& r, Acts& acts,
                      const Eigen::Ref<const nn::Mat<S>>& dz, nn::Mat<S>& dR) {
  nn::Mat<S> dy;
  nn::l2norm_bwd<S>(acts.norm, dz, dy);
  nn::Mat<S> dh;
  l2.bwd(acts.h, dy, &dh);
  nn::relu_bwd(acts.h, dh);
  l1.bwd(r, dh, &dR);
}

template <class S>
void Actor<S>::fwd(const Eigen::Ref<const nn::Mat<S>>& r, Acts& acts) const {
  l1.fwd(r, acts.h1);
  nn::relu_fwd(acts.h1);
  l2.fwd(acts.h1, acts.h2);
  nn::relu_fwd(acts.h2);
  l3.fwd(acts.h2, acts.a);
  nn::tanh_fwd(acts.a);
}

template <class S>
void Actor<S>::bwd(const Eigen::Ref<const nn::Mat<S>>& r, Acts& acts,
                   const Eigen::Ref<const nn::Mat<S>>& dA, nn::Mat<S>* dR) {
  nn::Mat<S> d = dA;
  nn::tanh_bwd(acts.a, d);
  nn::Mat<S> dh2;
  l3.bwd(acts.h2, d, &dh2);
  nn::relu_bwd(acts.h2, dh2);
  nn::Mat<S> dh1;
  l2.bwd(acts.h1, dh2, &dh1);
  nn::relu_bwd(acts.h1, dh1);
  l1.bwd(r, dh1, dR);
}

template <class S>
void Critic<S>::fwd(const Eigen::Ref<const nn::Mat<S>>& r,
                    const Eigen::Ref<const nn::Mat<S>>& a, Acts& acts) const {
  acts.x.resize(r.rows() + 1, r.cols());
  acts.x.topRows(r.rows()) = r;
  acts.x.bottomRows(1) = a;
  l1.fwd(acts.x, acts.h1);
  nn::relu_fwd(acts.h1);
  l2.fwd(acts.h1, acts.h2);
  nn::relu_fwd(acts.h2);
  l3.fwd(acts.h2, acts.q);
}

template <class S>
void Critic<S>::bwd(Acts& acts, const Eigen::Ref<const nn::Mat<S>>& dQ,
                    nn::Mat<S>* dX, bool accum_params) {
  nn::Mat<S> dh2;
  l3.bwd(acts.h2, dQ, &dh2, accum_params);
  nn::relu_bwd(acts.h2, dh2);
  nn::Mat<S> dh1;
  l2.bwd(acts.h1, dh2, &dh1, accum_params);
  nn::relu_bwd(acts.h1, dh1);
  l1.bwd(acts.x, dh1, dX, accum_params);
}

// ---------------------------------------------------------------------------
// Bundle

Algo algo_from_name(const std::string& name) {
  if (name == "bc") return Algo::Bc;
  if (name == "gail") return Algo::Gail;
  if (name == "gail-se") return Algo::GailSe;
  if (name == "cail-nocal") return Algo::CailNoCal;
  if (name == "cail") return Algo::Cail;
  throw ConfigError("unknown algo: " + name);
}

std::string algo_name(Algo a) {
  switch (a) {
    case Algo::Bc: return "bc";
    case Algo::Gail: return "gail";
    case Algo::GailSe: return "gail-se";
    case Algo::CailNoCal: return "cail-nocal";
    case Algo::Cail: return "cail";
  }
  return "cail";
}

template <class S>
Nets<S>::Nets(const ModelCfg& c, Algo a, RngStream init_rng)
    : cfg(c),
      algo(a),
      encoder(c),
      disc(c.repr_dim, c.head_hidden),
      proj_unsup(c.repr_dim, c.head_hidden, c.proj_dim),
      proj_sup(c.repr_dim, c.head_hidden, c.proj_dim),
      actor(c.repr_dim, c.mlp_hidden),
      q1(c.repr_dim, c.mlp_hidden),
      q2(c.repr_dim, c.mlp_hidden),
      q1_target(c.repr_dim, c.mlp_hidden),
      q2_target(c.repr_dim, c.mlp_hidden) {
  // Fixed init order is part of the determinism contract.
  encoder.init_weights(init_rng);
  disc.init_weights(init_rng);
  proj_unsup.init_weights(init_rng);
  proj_sup.init_weights(init_rng);
  actor.init_weights(init_rng);
  q1.init_weights(init_rng);
  q2.init_weights(init_rng);
  if (algo == Algo::Gail) {
    disc_encoder = std::make_unique<Encoder<S>>(c);
    disc_encoder->init_weights(init_rng);
  }
  nn::ParamList<S> t = target_params();
  nn::ParamList<S> o;
  q1.register_params(o, "q1");
  q2.register_params(o, "q2");
  nn::copy_params(t, o);
}

template <class S>
nn::ParamList<S> Nets<S>::encoder_params() {
  nn::ParamList<S> list;
  encoder.register_params(list, "encoder");
  return list;
}

template <class S>
nn::ParamList<S> Nets<S>::disc_group() {
  nn::ParamList<S> list;
  discriminator_encoder().register_params(list, disc_encoder ? "disc_encoder" : "encoder");
  disc.register_params(list, "disc");
  proj_unsup.register_params(list, "proj_unsup");
  proj_sup.register_params(list, "proj_sup");
  return list;
}

template <class S>
nn::ParamList<S> Nets<S>::critic_group() {
  nn::ParamList<S> list;
  encoder.register_params(list, "encoder");
  q1.register_params(list, "q1");
  q2.register_params(list, "q2");
  return list;
}

template <class S>
nn::ParamList<S> Nets<S>::actor_group() {
  nn::ParamList<S> list;
  actor.register_params(list, "actor");
  return list;
}

template <class S>
nn::ParamList<S> Nets<S>::target_params() {
  nn::ParamList<S> list;
  q1_target.register_params(list, "q1_target");
  q2_target.register_params(list, "q2_target");
  return list;
}

template <class S>
nn::ParamList<S> Nets<S>::all_params() {
  nn::ParamList<S> list;
  encoder.register_params(list, "encoder");
  if (disc_encoder) disc_encoder->register_params(list, "disc_encoder");
  disc.register_params(list, "disc");
  proj_unsup.register_params(list, "proj_unsup");
  proj_sup.register_params(list, "proj_sup");
  actor.register_params(list, "actor");
  q1.register_params(list, "q1");
  q2.register_params(list, "q2");
  q1_target.register_params(list, "q1_target");
  q2_target.register_params(list, "q2_target");
  return list;
}

template <class S>
double Nets<S>::act(const VisualState& v, double sigma, double clip_at,
                    RngStream& rng, bool explore) {
  encoder.prepare(act_scratch_, 1);
  v.to_float(act_scratch_.in.data());
  encoder.fwd(act_scratch_);
  actor.fwd(act_scratch_.r, actor_scratch_);
  double a = double(actor_scratch_.a(0, 0));
  if (explore && sigma > 0.0) {
    const double eps =
        std::clamp(rng.gauss(0.0, sigma), -clip_at, clip_at);
    a += eps;
  }
  return std::clamp(a, -1.0, 1.0);
}

template <class S>
void clamp_probs(const nn::Mat<S>& logits, nn::Vec<S>& p) {
  const auto B = logits.cols();
  p.resize(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const S s = S(1) / (S(1) + std::exp(-logits(0, i)));
    p[i] = std::min(std::max(s, S(kProbClamp)), S(1.0 - kProbClamp));
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kCkptMagic[8] = {'C', 'A', 'I', 'L', 'C', 'K', 'P', 'T'};

template <typename T>
void wr(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T rd(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw CorruptFileError("truncated checkpoint");
  return v;
}

void wr_str(std::ostream& os, const std::string& s) {
  wr<std::uint16_t>(os, static_cast<std::uint16_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string rd_str(std::istream& is) {
  const auto n = rd<std::uint16_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw CorruptFileError("truncated checkpoint");
  return s;
}

}  // namespace

void save_checkpoint(Nets<float>& nets, const std::string& env_name,
                     const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw StorageError("cannot open checkpoint for write: " + path);
  os.write(kCkptMagic, sizeof(kCkptMagic));
  wr<std::uint32_t>(os, 1);
  wr_str(os, env_name);
  wr_str(os, algo_name(nets.algo));
  const ModelCfg& c = nets.cfg;
  for (int v : {c.frame_size, c.frame_stack, c.conv_channels, c.repr_dim,
                c.head_hidden, c.proj_dim, c.mlp_hidden})
    wr<std::uint32_t>(os, static_cast<std::uint32_t>(v));
  auto params = nets.all_params();
  wr<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    wr_str(os, p.name);
    wr<std::uint64_t>(os, p.size);
    os.write(reinterpret_cast<const char*>(p.value),
             static_cast<std::streamsize>(p.size * sizeof(float)));
  }
  if (!os) throw StorageError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CorruptFileError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCkptMagic, sizeof(kCkptMagic)) != 0)
    throw CorruptFileError("bad checkpoint magic: " + path);
  if (rd<std::uint32_t>(is) != 1)
    throw CorruptFileError("unsupported checkpoint version");

  Checkpoint out;
  out.env_name = rd_str(is);
  const Algo algo = algo_from_name(rd_str(is));
  ModelCfg cfg;
  cfg.frame_size = static_cast<int>(rd<std::uint32_t>(is));
  cfg.frame_stack = static_cast<int>(rd<std::uint32_t>(is));
  cfg.conv_channels = static_cast<int>(rd<std::uint32_t>(is));
  cfg.repr_dim = static_cast<int>(rd<std::uint32_t>(is));
  cfg.head_hidden = static_cast<int>(rd<std::uint32_t>(is));
  cfg.proj_dim = static_cast<int>(rd<std::uint32_t>(is));
  cfg.mlp_hidden = static_cast<int>(rd<std::uint32_t>(is));

  out.nets = std::make_unique<Nets<float>>(cfg, algo, RngStream(0, 0));
  auto params = out.nets->all_params();
  std::map<std::string, nn::ParamRef<float>*> by_name;
  for (auto& p : params) by_name[p.name] = &p;
  const auto nblocks = rd<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nblocks; ++i) {
    const std::string name = rd_str(is);
    const auto count = rd<std::uint64_t>(is);
    auto it = by_name.find(name);
    if (it == by_name.end() || it->second->size != count)
      throw CorruptFileError("checkpoint block mismatch: " + name);
    is.read(reinterpret_cast<char*>(it->second->value),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (!is) throw CorruptFileError("truncated checkpoint payload");
  }
  return out;
}

template struct Encoder<float>;
template struct Encoder<double>;
template struct DiscHead<float>;
template struct DiscHead<double>;
template struct ProjHead<float>;
template struct ProjHead<double>;
template struct Actor<float>;
template struct Actor<double>;
template struct Critic<float>;
template struct Critic<double>;
template struct Nets<float>;
template struct Nets<double>;
template void clamp_probs<float>(const nn::Mat<float>&, nn::Vec<float>&);
template void clamp_probs<double>(const nn::Mat<double>&, nn::Vec<double>&);

}  // namespace cail
