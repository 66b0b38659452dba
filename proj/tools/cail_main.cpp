// cail: pixel-observation adversarial imitation learning, batch CLI.
//
// Subcommands: gen-expert | train | eval | plot | selftest.
// Exit codes: 0 success, 1 selftest failure, 2 argument/config error,
// 3 corrupt data file.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>

#include "cail/demo.hpp"
#include "cail/env.hpp"
#include "cail/errors.hpp"
#include "cail/nn.hpp"
#include "cail/selftest.hpp"
#include "cail/trainer.hpp"

namespace fs = std::filesystem;

namespace {

std::string runs_root() {
  const char* env = std::getenv("CAIL_RUNS_DIR");
  return env && *env ? env : "runs";
}

int cmd_gen_expert(const std::string& env_name, int episodes,
                   std::uint64_t seed, const std::string& out) {
  const cail::EnvSpec spec = cail::EnvSpec::by_name(env_name);
  std::vector<double> returns;
  const cail::DemoSet demos =
      cail::generate_expert_demos(spec, episodes, seed, &returns);
  double mean = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    std::printf("episode %zu: return=%.6f steps=%u\n", i, returns[i],
                demos.trajectories[i].length);
    mean += returns[i];
  }
  mean /= double(returns.size());
  std::printf("mean_return=%.6f episodes=%d\n", mean, episodes);
  const fs::path out_path(out);
  if (out_path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(out_path.parent_path(), ec);
  }
  cail::save_demos(demos, out);
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_train(cail::TrainConfig cfg, const std::string& demos_path,
              std::string out_dir) {
  const cail::DemoSet demos = cail::load_demos(demos_path);
  if (out_dir.empty())
    out_dir = (fs::path(runs_root()) /
               (cfg.algo + "-" + cfg.env + "-s" + std::to_string(cfg.seed)))
                  .string();
  const cail::RunMetrics metrics = cail::train(cfg, demos, out_dir);
  if (!metrics.rows.empty()) {
    const auto& last = metrics.rows.back();
    std::printf("final step=%ld eval_mean_return=%.6f eval_std_return=%.6f\n",
                last.step, last.eval_mean_return, last.eval_std_return);
  }
  std::printf("run directory: %s\n", out_dir.c_str());
  return 0;
}

std::string find_latest_checkpoint(const std::string& run_dir) {
  const std::regex pattern("^ckpt_([0-9]+)$");
  long best_step = -1;
  std::string best;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(run_dir, ec)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) {
      const long step = std::stol(m[1]);
      if (step > best_step) {
        best_step = step;
        best = entry.path().string();
      }
    }
  }
  if (ec || best.empty())
    throw cail::ConfigError("no checkpoint found under " + run_dir);
  return best;
}

int cmd_eval(const std::string& run_dir, int episodes, std::uint64_t seed) {
  const std::string ckpt = find_latest_checkpoint(run_dir);
  cail::Checkpoint loaded = cail::load_checkpoint(ckpt);
  const cail::EnvSpec spec = cail::EnvSpec::by_name(loaded.env_name);
  auto rng = cail::make_stream(seed, cail::Stream::kEval);
  const cail::EvalResult res =
      cail::evaluate(*loaded.nets, spec, episodes, rng);
  std::printf("mean=%.6f std=%.6f episodes=%d\n", res.mean, res.stddev,
              episodes);
  return 0;
}

int cmd_plot(const std::vector<std::string>& run_dirs, const std::string& out) {
  std::ofstream os(out, std::ios::binary);
  if (!os) throw cail::ConfigError("cannot open output file: " + out);
  os << "run,step,eval_mean_return,eval_std_return\n";
  for (const auto& dir : run_dirs) {
    const fs::path csv_path = fs::path(dir) / "metrics.csv";
    std::ifstream is(csv_path);
    if (!is)
      throw cail::ConfigError("missing metrics.csv under " + dir);
    const std::string run = fs::path(dir).filename().string();
    std::string line;
    if (!std::getline(is, line) || line.rfind("step,", 0) != 0)
      throw cail::CorruptFileError("bad metrics header in " + csv_path.string());
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      // keep the first three columns verbatim
      std::size_t p1 = line.find(',');
      std::size_t p2 = p1 == std::string::npos ? p1 : line.find(',', p1 + 1);
      std::size_t p3 = p2 == std::string::npos ? p2 : line.find(',', p2 + 1);
      if (p3 == std::string::npos)
        throw cail::CorruptFileError("short metrics row in " + csv_path.string());
      os << run << ',' << line.substr(0, p3) << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive adversarial imitation learning on rasterized control tasks"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads,
                 "worker threads (0 = hardware concurrency)");

  // gen-expert
  auto* gen = app.add_subcommand("gen-expert", "record scripted-expert demos");
  std::string gen_env = "pendulum", gen_out;
  int gen_episodes = 10;
  std::uint64_t gen_seed = 0;
  gen->add_option("--env", gen_env, "pendulum|cartpole");
  gen->add_option("--episodes", gen_episodes, "episode count")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "master seed");
  gen->add_option("--out", gen_out, "output demo file")->required();

  // train
  auto* tr = app.add_subcommand("train", "run a training configuration");
  std::string tr_algo = "cail", tr_env = "pendulum", tr_demos, tr_out, tr_aug,
              tr_config;
  long tr_steps = -1;
  std::int64_t tr_seed = -1;
  tr->add_option("--algo", tr_algo, "bc|gail|gail-se|cail-nocal|cail");
  tr->add_option("--env", tr_env, "pendulum|cartpole");
  tr->add_option("--demos", tr_demos, "demo file from gen-expert")->required();
  tr->add_option("--steps", tr_steps, "total agent steps (bc: epochs)");
  tr->add_option("--seed", tr_seed, "master seed");
  tr->add_option("--out", tr_out, "run directory (default runs/<name>)");
  tr->add_option("--aug", tr_aug, "none|shift|crop|cutout|composite");
  tr->add_option("--config", tr_config, "key=value config file");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a run's checkpoint");
  std::string ev_run;
  int ev_episodes = 10;
  std::uint64_t ev_seed = 0;
  ev->add_option("--run", ev_run, "run directory")->required();
  ev->add_option("--episodes", ev_episodes)->check(CLI::PositiveNumber);
  ev->add_option("--seed", ev_seed);

  // plot
  auto* pl = app.add_subcommand("plot", "merge run metrics into one CSV");
  std::vector<std::string> pl_runs;
  std::string pl_out;
  pl->add_option("--runs", pl_runs, "run directories")->required()->expected(-1);
  pl->add_option("--out", pl_out, "output CSV")->required();

  // selftest
  auto* st = app.add_subcommand("selftest", "offline property suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (threads > 0) cail::nn::set_num_threads(threads);

  try {
    if (*gen) return cmd_gen_expert(gen_env, gen_episodes, gen_seed, gen_out);
    if (*tr) {
      cail::TrainConfig cfg;
      if (!tr_config.empty()) cail::load_config_file(cfg, tr_config);
      // flags override the config file, which overrides defaults
      if (tr->count("--algo") || tr_config.empty()) cfg.algo = tr_algo;
      if (tr->count("--env") || tr_config.empty()) cfg.env = tr_env;
      if (tr_steps >= 0) {
        cfg.total_steps = tr_steps;
        if (cfg.algo == "bc") cfg.bc_epochs = static_cast<int>(tr_steps);
      }
      if (tr_seed >= 0) cfg.seed = static_cast<std::uint64_t>(tr_seed);
      if (tr->count("--aug")) {
        cfg.augmentation = tr_aug;
        cfg.aug_explicit = true;
      }
      return cmd_train(cfg, tr_demos, tr_out);
    }
    if (*ev) return cmd_eval(ev_run, ev_episodes, ev_seed);
    if (*pl) return cmd_plot(pl_runs, pl_out);
    if (*st) return cail::selftest::run(std::cout) ? 0 : 1;
  } catch (const cail::CorruptFileError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const cail::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 4;
  }
  return 2;
}
