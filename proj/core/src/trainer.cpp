#include "cail/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cail/errors.hpp"

namespace cail {

namespace fs = std::filesystem;

double SteadyClock::now() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  algo_from_name(algo);
  EnvSpec::by_name(env);
  aug_mode_from_name(augmentation);
  if (total_steps <= 0 || batch_size <= 0 || buffer_capacity <= 0 ||
      warmup < 0 || eval_every <= 0 || eval_episodes <= 0 || bc_epochs < 0)
    throw ConfigError("counts must be positive");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma out of range");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("lambdas must be >= 0");
  if (!(0.0 <= alpha_start && alpha_start <= alpha_end && alpha_end <= 1.0))
    throw ConfigError("need 0 <= alpha_start <= alpha_end <= 1");
  if (sigma < 0.0 || noise_clip <= 0.0) throw ConfigError("bad noise settings");
  if (!(ema_rate >= 0.0 && ema_rate <= 1.0)) throw ConfigError("ema_rate out of range");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  model.validate();
}

namespace {

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void TrainConfig::apply_key_value(const std::string& key, const std::string& value) {
  auto as_long = [&](const std::string& v) { return std::stol(v); };
  auto as_int = [&](const std::string& v) { return std::stoi(v); };
  auto as_double = [&](const std::string& v) { return std::stod(v); };
  try {
    if (key == "algo") algo = value;
    else if (key == "env") env = value;
    else if (key == "total_steps") total_steps = as_long(value);
    else if (key == "batch_size") batch_size = as_int(value);
    else if (key == "gamma") gamma = as_double(value);
    else if (key == "tau") tau = as_double(value);
    else if (key == "lambda1") lambda1 = as_double(value);
    else if (key == "lambda2") lambda2 = as_double(value);
    else if (key == "alpha_start") alpha_start = as_double(value);
    else if (key == "alpha_end") alpha_end = as_double(value);
    else if (key == "sigma") sigma = as_double(value);
    else if (key == "noise_clip") noise_clip = as_double(value);
    else if (key == "ema_rate") ema_rate = as_double(value);
    else if (key == "buffer_capacity") buffer_capacity = as_long(value);
    else if (key == "warmup") warmup = as_long(value);
    else if (key == "eval_every") eval_every = as_long(value);
    else if (key == "eval_episodes") eval_episodes = as_int(value);
    else if (key == "augmentation") { augmentation = value; aug_explicit = true; }
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "bc_epochs") bc_epochs = as_int(value);
    else if (key == "lr") lr = as_double(value);
    else if (key == "conv_channels") model.conv_channels = as_int(value);
    else if (key == "repr_dim") model.repr_dim = as_int(value);
    else if (key == "head_hidden") model.head_hidden = as_int(value);
    else if (key == "proj_dim") model.proj_dim = as_int(value);
    else if (key == "mlp_hidden") model.mlp_hidden = as_int(value);
    else throw ConfigError("unknown config key: " + key);
  } catch (const std::invalid_argument&) {
    throw ConfigError("bad value for " + key + ": " + value);
  } catch (const std::out_of_range&) {
    throw ConfigError("value out of range for " + key + ": " + value);
  }
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_key_values() const {
  return {
      {"algo", algo},
      {"env", env},
      {"total_steps", std::to_string(total_steps)},
      {"batch_size", std::to_string(batch_size)},
      {"gamma", fmt_g(gamma)},
      {"tau", fmt_g(tau)},
      {"lambda1", fmt_g(lambda1)},
      {"lambda2", fmt_g(lambda2)},
      {"alpha_start", fmt_g(alpha_start)},
      {"alpha_end", fmt_g(alpha_end)},
      {"sigma", fmt_g(sigma)},
      {"noise_clip", fmt_g(noise_clip)},
      {"ema_rate", fmt_g(ema_rate)},
      {"buffer_capacity", std::to_string(buffer_capacity)},
      {"warmup", std::to_string(warmup)},
      {"eval_every", std::to_string(eval_every)},
      {"eval_episodes", std::to_string(eval_episodes)},
      {"augmentation", augmentation},
      {"seed", std::to_string(seed)},
      {"bc_epochs", std::to_string(bc_epochs)},
      {"lr", fmt_g(lr)},
      {"conv_channels", std::to_string(model.conv_channels)},
      {"repr_dim", std::to_string(model.repr_dim)},
      {"head_hidden", std::to_string(model.head_hidden)},
      {"proj_dim", std::to_string(model.proj_dim)},
      {"mlp_hidden", std::to_string(model.mlp_hidden)},
  };
}

void load_config_file(TrainConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    cfg.apply_key_value(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

Variant run_variant(const TrainConfig& cfg) {
  Variant v;
  v.algo = algo_from_name(cfg.algo);
  const AugMode mode = aug_mode_from_name(cfg.augmentation);
  switch (v.algo) {
    case Algo::Bc:
      v.lambda1 = v.lambda2 = 0.0;
      v.aug = AugMode::None;
      break;
    case Algo::Gail:
      v.lambda1 = v.lambda2 = 0.0;
      v.aug = AugMode::None;  // the plain baseline trains on raw frames
      if (cfg.aug_explicit)
        throw ConfigError("gail trains without augmentation; drop --aug");
      break;
    case Algo::GailSe:
      v.lambda1 = v.lambda2 = 0.0;
      v.aug = cfg.aug_explicit ? mode : AugMode::None;
      break;
    case Algo::CailNoCal:
      v.lambda1 = cfg.lambda1;
      v.lambda2 = cfg.lambda2;
      v.calibrated = false;
      v.aug = mode;
      break;
    case Algo::Cail:
      v.lambda1 = cfg.lambda1;
      v.lambda2 = cfg.lambda2;
      v.calibrated = true;
      v.aug = mode;
      break;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Metrics

std::string RunMetrics::to_csv() const {
  std::string out = kMetricsHeader;
  out += '\n';
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%ld,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", r.step,
                  r.eval_mean_return, r.eval_std_return, r.dis, r.unsup, r.csup,
                  r.critic_loss, r.actor_loss, r.alpha, r.steps_per_second);
    out += buf;
  }
  return out;
}

namespace {

std::string row_to_csv(const MetricsRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%ld,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", r.step,
                r.eval_mean_return, r.eval_std_return, r.dis, r.unsup, r.csup,
                r.critic_loss, r.actor_loss, r.alpha, r.steps_per_second);
  return buf;
}

void write_config_echo(const TrainConfig& cfg, const std::string& out_dir) {
  std::ofstream os(fs::path(out_dir) / "config");
  if (!os) throw StorageError("cannot write config echo in " + out_dir);
  for (const auto& [k, v] : cfg.to_key_values()) os << k << "=" << v << "\n";
}

struct WindowStats {
  double dis = 0, unsup = 0, csup = 0, critic = 0, actor = 0;
  long n = 0;
  void add(const LossComponents& c, double cl, double al) {
    dis += c.dis;
    unsup += c.unsup;
    csup += c.csup;
    critic += cl;
    actor += al;
    ++n;
  }
  void reset() { *this = WindowStats{}; }
  double mean(double v) const { return n ? v / double(n) : 0.0; }
};

}  // namespace

EvalResult evaluate(Nets<float>& nets, const EnvSpec& spec, int episodes,
                    RngStream& rng) {
  if (episodes < 1) throw ConfigError("evaluate needs episodes >= 1");
  PixelEnv env(spec, rng.derive(rng.next_u64()));
  RngStream unused(0, 0);
  std::vector<double> returns(episodes, 0.0);
  for (int ep = 0; ep < episodes; ++ep) {
    VisualState v = env.reset();
    double ret = 0.0;
    for (int t = 0; t < spec.max_agent_steps; ++t) {
      const double a = nets.act(v, 0.0, 1.0, unused, /*explore=*/false);
      const StepResult sr = env.step({a});
      ret += eval_reward(spec, env.phys());
      v = sr.visual;
      if (sr.done || sr.truncated) break;
    }
    returns[ep] = ret;
  }
  EvalResult out;
  for (double r : returns) out.mean += r;
  out.mean /= episodes;
  double var = 0.0;
  for (double r : returns) var += (r - out.mean) * (r - out.mean);
  out.stddev = std::sqrt(var / episodes);
  return out;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

void check_demo_compat(const TrainConfig& cfg, const DemoSet& demos,
                       bool need_actions) {
  if (demos.env_name != cfg.env)
    throw ConfigError("demo set is for env '" + demos.env_name +
                      "', config wants '" + cfg.env + "'");
  if (demos.trajectories.empty()) throw ConfigError("demo set is empty");
  for (const auto& t : demos.trajectories) {
    if (t.height != std::uint32_t(kFrameSize) || t.width != std::uint32_t(kFrameSize))
      throw ConfigError("demo frames are not 64x64");
    if (t.length == 0) throw ConfigError("demo set has an empty trajectory");
  }
  if (need_actions && !demos.has_actions())
    throw ConfigError("this algo needs demo actions (regenerate with gen-expert)");
}

}  // namespace

RunMetrics train(const TrainConfig& cfg, const DemoSet& demos,
                 const std::string& out_dir, Clock* clock) {
  cfg.validate();
  if (cfg.algo == "bc") return bc_train(cfg, demos, out_dir, clock);
  check_demo_compat(cfg, demos, /*need_actions=*/false);
  if (cfg.model.frame_size != kFrameSize || cfg.model.frame_stack != kFrameStack)
    throw ConfigError("training requires the 64x64x3 observation layout");

  SteadyClock fallback;
  if (!clock) clock = &fallback;
  const Variant variant = run_variant(cfg);
  const EnvSpec spec = EnvSpec::by_name(cfg.env);

  fs::create_directories(out_dir);
  write_config_echo(cfg, out_dir);

  auto s_env = make_stream(cfg.seed, Stream::kEnvInit);
  auto s_net = make_stream(cfg.seed, Stream::kNetInit);
  auto s_replay = make_stream(cfg.seed, Stream::kReplaySample);
  auto s_expert = make_stream(cfg.seed, Stream::kExpertSample);
  auto s_aug = make_stream(cfg.seed, Stream::kAugment);
  auto s_action = make_stream(cfg.seed, Stream::kActionNoise);
  auto s_target = make_stream(cfg.seed, Stream::kTargetNoise);
  auto s_actor = make_stream(cfg.seed, Stream::kActorNoise);
  auto s_eval = make_stream(cfg.seed, Stream::kEval);

  Nets<float> nets(cfg.model, variant.algo, s_net);
  Agent<float> agent(nets, cfg.lr);
  UpdateConfig ucfg;
  ucfg.gamma = cfg.gamma;
  ucfg.tau = cfg.tau;
  ucfg.lambda1 = variant.lambda1;
  ucfg.lambda2 = variant.lambda2;
  ucfg.sigma = cfg.sigma;
  ucfg.noise_clip = cfg.noise_clip;
  ucfg.ema_rate = cfg.ema_rate;
  ucfg.calibrated = variant.calibrated;
  ucfg.aug = variant.aug;

  PixelEnv env(spec, s_env.derive(0));
  ReplayBuffer buffer(std::size_t(cfg.buffer_capacity));

  std::ofstream csv(fs::path(out_dir) / "metrics.csv", std::ios::binary);
  if (!csv) throw StorageError("cannot write metrics.csv in " + out_dir);
  csv << kMetricsHeader << "\n";
  csv.flush();

  RunMetrics metrics;
  WindowStats window;
  VisualState v = env.reset();
  double last_time = clock->now();
  long last_step = 0;

  for (long step = 1; step <= cfg.total_steps; ++step) {
    double a;
    if (step <= cfg.warmup) {
      a = s_action.uniform(-1.0, 1.0);
    } else {
      a = nets.act(v, cfg.sigma, cfg.noise_clip, s_action, /*explore=*/true);
    }
    const StepResult sr = env.step({float(a)});
    Transition t;
    t.v = v;
    t.action = float(a);
    t.reward = 0.0f;  // relabeled at every update
    t.v_next = sr.visual;
    t.done = sr.done ? 1 : 0;
    buffer.push(t);
    v = (sr.done || sr.truncated) ? env.reset() : sr.visual;

    if (step > cfg.warmup) {
      const auto batch = buffer.sample(std::size_t(cfg.batch_size), s_replay);
      std::vector<VisualState> experts;
      experts.reserve(cfg.batch_size);
      for (int i = 0; i < cfg.batch_size; ++i)
        experts.push_back(demos.sample_stack(s_expert));
      const double alpha =
          alpha_schedule(step, cfg.total_steps, cfg.alpha_start, cfg.alpha_end);
      const LossComponents comp =
          agent.update_discriminator(batch, experts, alpha, ucfg, s_aug);
      const double critic_loss = agent.update_critic(batch, ucfg, s_target);
      const double actor_loss = agent.update_actor(batch, ucfg, s_actor);
      agent.update_targets(cfg.ema_rate);
      window.add(comp, critic_loss, actor_loss);
    }

    if (step % cfg.eval_every == 0 || step == cfg.total_steps) {
      const EvalResult ev = evaluate(nets, spec, cfg.eval_episodes, s_eval);
      const double now = clock->now();
      MetricsRow row;
      row.step = step;
      row.eval_mean_return = ev.mean;
      row.eval_std_return = ev.stddev;
      row.dis = window.mean(window.dis);
      row.unsup = window.mean(window.unsup);
      row.csup = window.mean(window.csup);
      row.critic_loss = window.mean(window.critic);
      row.actor_loss = window.mean(window.actor);
      row.alpha = alpha_schedule(step, cfg.total_steps, cfg.alpha_start,
                                 cfg.alpha_end);
      row.steps_per_second =
          double(step - last_step) / std::max(now - last_time, 1e-9);
      metrics.rows.push_back(row);
      csv << row_to_csv(row);
      csv.flush();
      window.reset();
      last_time = now;
      last_step = step;
      if (step == cfg.total_steps) break;  // avoid duplicate final row
    }
  }

  save_checkpoint(nets, cfg.env,
                  (fs::path(out_dir) / ("ckpt_" + std::to_string(cfg.total_steps)))
                      .string());
  return metrics;
}

RunMetrics bc_train(const TrainConfig& cfg, const DemoSet& demos,
                    const std::string& out_dir, Clock* clock) {
  cfg.validate();
  check_demo_compat(cfg, demos, /*need_actions=*/true);
  if (cfg.model.frame_size != kFrameSize || cfg.model.frame_stack != kFrameStack)
    throw ConfigError("training requires the 64x64x3 observation layout");

  SteadyClock fallback;
  if (!clock) clock = &fallback;
  const EnvSpec spec = EnvSpec::by_name(cfg.env);

  fs::create_directories(out_dir);
  write_config_echo(cfg, out_dir);

  auto s_net = make_stream(cfg.seed, Stream::kNetInit);
  auto s_shuffle = make_stream(cfg.seed, Stream::kBcShuffle);
  auto s_eval = make_stream(cfg.seed, Stream::kEval);

  Nets<float> nets(cfg.model, Algo::Bc, s_net);
  Agent<float> agent(nets, cfg.lr);

  // Flatten the demo set into (stack, action) pairs.
  std::vector<std::pair<std::size_t, std::size_t>> index;
  for (std::size_t tr = 0; tr < demos.trajectories.size(); ++tr)
    for (std::size_t t = 0; t < demos.trajectories[tr].length; ++t)
      index.emplace_back(tr, t);

  std::ofstream csv(fs::path(out_dir) / "metrics.csv", std::ios::binary);
  if (!csv) throw StorageError("cannot write metrics.csv in " + out_dir);
  csv << kMetricsHeader << "\n";

  RunMetrics metrics;
  const long log_every = std::max(1, cfg.bc_epochs / 10);
  double last_time = clock->now();
  long last_epoch = 0;

  std::vector<VisualState> stack_cache(index.size());
  std::vector<float> action_cache(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    stack_cache[i] = demos.stack_at(index[i].first, index[i].second);
    action_cache[i] = (*demos.trajectories[index[i].first].actions)[index[i].second];
  }

  std::vector<std::size_t> order(index.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto emit_row = [&](long epoch, double mse) {
    const EvalResult ev = evaluate(nets, spec, cfg.eval_episodes, s_eval);
    const double now = clock->now();
    MetricsRow row;
    row.step = epoch;
    row.eval_mean_return = ev.mean;
    row.eval_std_return = ev.stddev;
    row.actor_loss = mse;
    row.steps_per_second =
        double(epoch - last_epoch) / std::max(now - last_time, 1e-9);
    metrics.rows.push_back(row);
    csv << row_to_csv(row);
    csv.flush();
    last_time = now;
    last_epoch = epoch;
  };

  for (long epoch = 1; epoch <= cfg.bc_epochs; ++epoch) {
    // Fisher-Yates with the dedicated shuffle stream.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = s_shuffle.uniform_index(i);
      std::swap(order[i - 1], order[j]);
    }
    double mse_sum = 0.0;
    long batches = 0;
    for (std::size_t base = 0; base < order.size();
         base += std::size_t(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), base + std::size_t(cfg.batch_size));
      std::vector<const VisualState*> states;
      std::vector<float> actions;
      states.reserve(end - base);
      for (std::size_t k = base; k < end; ++k) {
        states.push_back(&stack_cache[order[k]]);
        actions.push_back(action_cache[order[k]]);
      }
      mse_sum += agent.update_bc(states, actions);
      ++batches;
    }
    if (epoch % log_every == 0 || epoch == cfg.bc_epochs)
      emit_row(epoch, batches ? mse_sum / batches : 0.0);
  }
  if (cfg.bc_epochs == 0) emit_row(0, 0.0);

  save_checkpoint(nets, cfg.env,
                  (fs::path(out_dir) / ("ckpt_" + std::to_string(cfg.bc_epochs)))
                      .string());
  return metrics;
}

DemoSet generate_expert_demos(const EnvSpec& spec, int episodes,
                              std::uint64_t seed, std::vector<double>* returns) {
  if (episodes < 1) throw ConfigError("gen-expert needs episodes >= 1");
  DemoSet demos;
  demos.env_name = spec.name;
  demos.seed = seed;
  auto s_env = make_stream(seed, Stream::kEnvInit);
  PixelEnv env(spec, s_env.derive(0));
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset();
    DemoTrajectory traj;
    traj.actions.emplace();
    traj.frames.reserve(std::size_t(spec.max_agent_steps) * kFramePixels);
    double ret = 0.0;
    for (int t = 0; t < spec.max_agent_steps; ++t) {
      const Frame& f = env.visual().frames[kFrameStack - 1];
      const Action a = scripted_expert(spec, env.phys());
      traj.frames.insert(traj.frames.end(), f.px.begin(), f.px.end());
      traj.actions->push_back(float(a.u));
      const StepResult sr = env.step(a);
      ret += eval_reward(spec, env.phys());
      if (sr.done || sr.truncated) break;
    }
    traj.length = static_cast<std::uint32_t>(traj.actions->size());
    demos.trajectories.push_back(std::move(traj));
    if (returns) returns->push_back(ret);
  }
  return demos;
}

}  // namespace cail
