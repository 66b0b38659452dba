#include "cail/env.hpp"

#include <algorithm>
#include <cmath>

#include "cail/errors.hpp"

namespace cail {

namespace {

constexpr double kPi = 3.14159265358979323846;

inline double clip(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}

// Wrap to (-pi, pi].
inline double wrap_pi(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

}  // namespace

EnvSpec EnvSpec::by_name(const std::string& name) {
  EnvSpec spec;
  if (name == "pendulum") {
    spec.kind = EnvKind::Pendulum;
    spec.name = "pendulum";
    spec.dt = 0.05;
  } else if (name == "cartpole") {
    spec.kind = EnvKind::Cartpole;
    spec.name = "cartpole";
    spec.dt = 0.02;
  } else {
    throw ConfigError("unknown env name: " + name);
  }
  return spec;
}

Frame render(const EnvSpec& spec, const PhysState& s) {
  Frame f;
  if (spec.kind == EnvKind::Pendulum) {
    // Pivot at (32, 32); pole length 24 px toward theta (screen up = 0),
    // tip disc radius 3.
    const int cy = 32, cx = 32;
    const double len = 24.0;
    const int tx = cx + static_cast<int>(std::lround(len * std::sin(s.theta)));
    const int ty = cy - static_cast<int>(std::lround(len * std::cos(s.theta)));
    raster::thick_line(f, cy, cx, ty, tx);
    raster::disc(f, ty, tx, 3);
  } else {
    // Track row at y = 48; cart 12x6 centered on the track; pole length 20
    // from the cart top.
    const int track_y = 48;
    raster::rect(f, track_y, 0, track_y, kFrameSize - 1);
    const double u = (s.x + 2.4) / 4.8;  // [-2.4, 2.4] m -> [4, 60] px
    const int cx = 4 + static_cast<int>(std::lround(u * 56.0));
    raster::rect(f, track_y - 3, cx - 6, track_y + 2, cx + 5);
    const int top_y = track_y - 3;
    const double len = 20.0;
    const int tx = cx + static_cast<int>(std::lround(len * std::sin(s.theta)));
    const int ty = top_y - static_cast<int>(std::lround(len * std::cos(s.theta)));
    raster::thick_line(f, top_y, cx, ty, tx);
  }
  return f;
}

double eval_reward(const EnvSpec& spec, const PhysState& s) {
  if (spec.kind == EnvKind::Pendulum) return (1.0 + std::cos(s.theta)) / 2.0;
  return (std::abs(s.theta) < 0.2 && std::abs(s.x) < 1.0) ? 1.0 : 0.0;
}

Action scripted_expert(const EnvSpec& spec, const PhysState& s) {
  if (spec.kind == EnvKind::Pendulum) {
    if (std::abs(s.theta) < 0.3 && std::abs(s.theta_dot) < 1.0) {
      const double kp = 8.0, kd = 2.0;
      return {clip(-(kp * s.theta + kd * s.theta_dot) / spec.torque_limit, -1.0, 1.0)};
    }
    // Energy shaping toward upright rest. E uses the conserved quantity of
    // the integrator's vector field, E = theta_dot^2/2 + (3g/2l) cos(theta),
    // so the pump stops exactly at the energy that reaches the top.
    const double scale = 3.0 * spec.gravity / (2.0 * spec.length);
    const double energy =
        0.5 * s.theta_dot * s.theta_dot + scale * std::cos(s.theta);
    const double target = scale;
    const double ke = 0.5;
    const double sgn = s.theta_dot >= 0.0 ? 1.0 : -1.0;  // push at rest: +1
    return {clip(ke * (target - energy) * sgn, -1.0, 1.0)};
  }
  return {clip((20.0 * s.theta + 4.0 * s.theta_dot + 1.0 * s.x + 2.0 * s.x_dot) /
                   spec.force_limit,
               -1.0, 1.0)};
}

PixelEnv::PixelEnv(EnvSpec spec, RngStream init_rng)
    : spec_(std::move(spec)), rng_(init_rng) {}

VisualState PixelEnv::reset() {
  phys_ = PhysState{};
  const double eta = rng_.uniform(-0.05, 0.05);
  if (spec_.kind == EnvKind::Pendulum) {
    phys_.theta = wrap_pi(kPi + eta);
    phys_.theta_dot = 0.0;
  } else {
    phys_.theta = eta;
  }
  agent_steps_ = 0;
  const Frame f = render(spec_, phys_);
  for (auto& slot : visual_.frames) slot = f;
  return visual_;
}

bool PixelEnv::terminal(const PhysState& s) const {
  if (spec_.kind == EnvKind::Pendulum) return false;
  return std::abs(s.theta) > spec_.theta_fail || std::abs(s.x) > spec_.x_fail;
}

PhysState PixelEnv::euler_step(const PhysState& s, double u_cmd) const {
  PhysState n = s;
  if (spec_.kind == EnvKind::Pendulum) {
    const double torque = spec_.torque_limit * u_cmd;
    const double acc =
        -(3.0 * spec_.gravity / (2.0 * spec_.length)) * std::sin(s.theta + kPi) +
        3.0 * torque / (spec_.mass * spec_.length * spec_.length);
    n.theta = wrap_pi(s.theta + s.theta_dot * spec_.dt);
    n.theta_dot = clip(s.theta_dot + acc * spec_.dt, -spec_.speed_limit,
                       spec_.speed_limit);
  } else {
    const double force = spec_.force_limit * u_cmd;
    const double total_mass = spec_.cart_mass + spec_.pole_mass;
    const double pml = spec_.pole_mass * spec_.pole_half_length;
    const double cos_t = std::cos(s.theta), sin_t = std::sin(s.theta);
    const double temp =
        (force + pml * s.theta_dot * s.theta_dot * sin_t) / total_mass;
    const double theta_acc =
        (spec_.cart_gravity * sin_t - cos_t * temp) /
        (spec_.pole_half_length *
         (4.0 / 3.0 - spec_.pole_mass * cos_t * cos_t / total_mass));
    const double x_acc = temp - pml * theta_acc * cos_t / total_mass;
    n.x = s.x + s.x_dot * spec_.dt;
    n.x_dot = s.x_dot + x_acc * spec_.dt;
    n.theta = s.theta + s.theta_dot * spec_.dt;
    n.theta_dot = s.theta_dot + theta_acc * spec_.dt;
  }
  return n;
}

PhysState PixelEnv::integrate(const PhysState& s, Action a) const {
  const double u = clip(a.u, -1.0, 1.0);
  PhysState cur = s;
  for (int i = 0; i < spec_.action_repeat; ++i) {
    cur = euler_step(cur, u);
    if (terminal(cur)) break;
  }
  return cur;
}

StepResult PixelEnv::step(Action a) {
  if (!(std::isfinite(phys_.x) && std::isfinite(phys_.x_dot) &&
        std::isfinite(phys_.theta) && std::isfinite(phys_.theta_dot)))
    throw IntegrationFault("non-finite state before step");
  phys_ = integrate(phys_, a);
  if (!(std::isfinite(phys_.theta) && std::isfinite(phys_.theta_dot)))
    throw IntegrationFault("non-finite state after step");
  ++agent_steps_;

  for (int i = 0; i + 1 < kFrameStack; ++i)
    visual_.frames[i] = visual_.frames[i + 1];
  visual_.frames[kFrameStack - 1] = render(spec_, phys_);

  StepResult r;
  r.visual = visual_;
  r.done = terminal(phys_);
  r.truncated = !r.done && agent_steps_ >= spec_.max_agent_steps;
  return r;
}

}  // namespace cail
