#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cail/agent.hpp"
#include "cail/demo.hpp"
#include "cail/env.hpp"
#include "cail/model.hpp"

namespace cail {

// Wall-clock source; injectable so the throughput column stays a pure
// function of (seed, config) under test.
struct Clock {
  virtual ~Clock() = default;
  virtual double now() = 0;  // seconds
};

struct SteadyClock final : Clock {
  double now() override;
};

// Advances a fixed amount per query; makes metrics byte-reproducible.
struct FixedStepClock final : Clock {
  explicit FixedStepClock(double step_s = 1.0) : step(step_s) {}
  double now() override { return t += step; }
  double step;
  double t = 0.0;
};

// ---------------------------------------------------------------------------

struct TrainConfig {
  std::string algo = "cail";
  std::string env = "pendulum";
  long total_steps = 60000;
  int batch_size = 64;  // N
  double gamma = 0.99;
  double tau = 0.1;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double alpha_start = 0.3;
  double alpha_end = 0.5;
  double sigma = 0.2;
  double noise_clip = 0.3;  // c
  double ema_rate = 0.99;
  long buffer_capacity = 100000;
  long warmup = 1000;
  long eval_every = 2000;
  int eval_episodes = 10;
  std::string augmentation = "shift";
  bool aug_explicit = false;  // set when --aug was passed on the CLI
  std::uint64_t seed = 0;
  int bc_epochs = 200;
  double lr = 1e-4;
  ModelCfg model;

  void validate() const;  // throws ConfigError
  // Flat key=value round trip ('#' comments handled by the parser).
  void apply_key_value(const std::string& key, const std::string& value);
  std::vector<std::pair<std::string, std::string>> to_key_values() const;
};

void load_config_file(TrainConfig& cfg, const std::string& path);

// Per-algo objective wiring (Table-1 variants).
struct Variant {
  Algo algo = Algo::Cail;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  bool calibrated = true;
  AugMode aug = AugMode::None;
};
Variant run_variant(const TrainConfig& cfg);

struct MetricsRow {
  long step = 0;
  double eval_mean_return = 0.0;
  double eval_std_return = 0.0;
  double dis = 0.0;
  double unsup = 0.0;
  double csup = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  double steps_per_second = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "step,eval_mean_return,eval_std_return,L_dis,L_unsup,L_csup,"
    "critic_loss,actor_loss,alpha,steps_per_second";

struct RunMetrics {
  std::vector<MetricsRow> rows;
  std::string to_csv() const;  // header + one line per row, %.6g floats
};

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;  // population std over episodes
};

// Greedy rollout with the ground-truth metric reward; the eval stream keeps
// evaluation from perturbing training randomness.
EvalResult evaluate(Nets<float>& nets, const EnvSpec& spec, int episodes,
                    RngStream& rng);

// Algorithm-1 training loop (adversarial variants). Writes metrics.csv,
// config, and a final checkpoint ckpt_<total_steps> under out_dir.
RunMetrics train(const TrainConfig& cfg, const DemoSet& demos,
                 const std::string& out_dir, Clock* clock = nullptr);

// Behavioral cloning baseline; step column counts epochs.
RunMetrics bc_train(const TrainConfig& cfg, const DemoSet& demos,
                    const std::string& out_dir, Clock* clock = nullptr);

// Scripted-expert rollouts recorded as demonstrations. Each stored frame is
// the state the paired action was taken in, so BC pairs line up and frame
// stacks rebuilt at sample time match what a live agent observed.
DemoSet generate_expert_demos(const EnvSpec& spec, int episodes,
                              std::uint64_t seed,
                              std::vector<double>* returns = nullptr);

}  // namespace cail
