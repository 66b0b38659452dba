#pragma once

#include <string>

#include "cail/image.hpp"
#include "cail/rng.hpp"

namespace cail {

enum class EnvKind { Pendulum, Cartpole };

// Physical coordinates. Pendulum uses (theta, theta_dot) with theta = 0
// upright, wrapped to (-pi, pi]; cartpole uses all four fields.
struct PhysState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;
};

// Scalar command in [-1, 1]; the env scales it by its force/torque limit.
struct Action {
  double u = 0.0;
};

struct EnvSpec {
  EnvKind kind = EnvKind::Pendulum;
  std::string name = "pendulum";
  double dt = 0.05;
  int action_repeat = 2;
  int max_agent_steps = 200;

  // Pendulum physics (g = 10, m = l = 1, torque limit 2.0, speed clamp 8).
  double gravity = 10.0;
  double mass = 1.0;
  double length = 1.0;
  double torque_limit = 2.0;
  double speed_limit = 8.0;

  // Cartpole physics (classic parameters, force limit 10 N).
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double pole_half_length = 0.5;
  double force_limit = 10.0;
  double cart_gravity = 9.8;
  double theta_fail = 0.7;   // |theta| beyond this terminates (d = 1)
  double x_fail = 2.0;       // |x| beyond this terminates (d = 1)

  // Throws ConfigError for unknown names.
  static EnvSpec by_name(const std::string& name);
};

Frame render(const EnvSpec& spec, const PhysState& s);

// Ground-truth per-step reward used only for evaluation metrics, never as
// a training signal.
double eval_reward(const EnvSpec& spec, const PhysState& s);

// Analytic expert controller. Pendulum: energy-shaping swingup with a PD
// balance region near upright; cartpole: PD balance.
Action scripted_expert(const EnvSpec& spec, const PhysState& s);

struct StepResult {
  VisualState visual;
  bool done = false;       // true terminal state (d = 1)
  bool truncated = false;  // time-limit cut, reported separately from done
};

// Deterministic pixel-rendered control environment. Single-threaded; all
// randomness comes from the injected RNG stream (reset noise only).
class PixelEnv {
 public:
  PixelEnv(EnvSpec spec, RngStream init_rng);

  VisualState reset();
  StepResult step(Action a);

  const EnvSpec& spec() const { return spec_; }
  const PhysState& phys() const { return phys_; }
  const VisualState& visual() const { return visual_; }
  int agent_steps() const { return agent_steps_; }
  bool terminal(const PhysState& s) const;

  // Integrates `action_repeat` inner Euler steps from `s`; exposed so tests
  // can check the integrator against a hand-evaluated recurrence.
  PhysState integrate(const PhysState& s, Action a) const;

 private:
  PhysState euler_step(const PhysState& s, double u_cmd) const;

  EnvSpec spec_;
  RngStream rng_;
  PhysState phys_;
  VisualState visual_;
  int agent_steps_ = 0;
};

}  // namespace cail
