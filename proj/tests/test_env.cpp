#include <doctest.h>

#include <cmath>

#include "cail/env.hpp"
#include "cail/errors.hpp"
#include "cail/trainer.hpp"

using namespace cail;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("unknown env name is a configuration error") {
  CHECK_THROWS_AS(EnvSpec::by_name("mountaincar"), ConfigError);
}

TEST_CASE("reset distributions and determinism") {
  const EnvSpec pend = EnvSpec::by_name("pendulum");
  PixelEnv env(pend, RngStream(9, 1));
  env.reset();
  // theta = pi + eta wrapped into (-pi, pi]: |theta| within 0.05 of pi.
  CHECK(std::abs(std::abs(env.phys().theta) - kPi) <= 0.05 + 1e-12);
  CHECK(env.phys().theta_dot == 0.0);

  const EnvSpec cart = EnvSpec::by_name("cartpole");
  PixelEnv cenv(cart, RngStream(9, 2));
  cenv.reset();
  CHECK(std::abs(cenv.phys().theta) <= 0.05);
  CHECK(cenv.phys().x == 0.0);
  CHECK(cenv.phys().x_dot == 0.0);
  CHECK(cenv.phys().theta_dot == 0.0);

  PixelEnv e1(pend, RngStream(33, 7)), e2(pend, RngStream(33, 7));
  CHECK(e1.reset() == e2.reset());
  for (int i = 0; i < 5; ++i) {
    const auto r1 = e1.step({0.3}), r2 = e2.step({0.3});
    CHECK(r1.visual == r2.visual);
  }
}

TEST_CASE("reset replicates the initial frame across the stack") {
  PixelEnv env(EnvSpec::by_name("pendulum"), RngStream(1, 1));
  const VisualState v = env.reset();
  CHECK(v.frames[0] == v.frames[1]);
  CHECK(v.frames[1] == v.frames[2]);
  CHECK(v.frames[0] == render(env.spec(), env.phys()));
}

TEST_CASE("pendulum zero-force fixed point at hanging rest") {
  PixelEnv env(EnvSpec::by_name("pendulum"), RngStream(1, 2));
  const PhysState hang{0, 0, kPi, 0};
  const PhysState next = env.integrate(hang, {0.0});
  CHECK(next.theta == doctest::Approx(hang.theta).epsilon(1e-12));
  CHECK(next.theta_dot == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cartpole terminates past the angle threshold") {
  const EnvSpec cart = EnvSpec::by_name("cartpole");
  PixelEnv env(cart, RngStream(1, 3));
  CHECK(env.terminal({0, 0, 0.71, 0}));
  CHECK(env.terminal({2.01, 0, 0, 0}));
  CHECK_FALSE(env.terminal({0, 0, 0.69, 0}));
}

TEST_CASE("pendulum never terminates; truncation at the step budget") {
  PixelEnv env(EnvSpec::by_name("pendulum"), RngStream(2, 1));
  env.reset();
  StepResult last;
  for (int i = 0; i < 200; ++i) last = env.step({1.0});
  CHECK_FALSE(last.done);
  CHECK(last.truncated);
}

TEST_CASE("render geometry: pendulum pole and tip") {
  const EnvSpec pend = EnvSpec::by_name("pendulum");
  const Frame up = render(pend, {0, 0, 0.0, 0});
  for (int y = 8; y <= 32; ++y) CHECK(up.at(y, 32) == 255);
  CHECK(up.at(40, 32) == 0);  // below the pivot stamp region

  const Frame side = render(pend, {0, 0, kPi / 2, 0});
  CHECK(side.at(32, 56) == 255);  // tip disc center
  CHECK(render(pend, {0, 0, kPi / 2, 0}) == side);  // byte determinism
}

TEST_CASE("render geometry: cartpole track and cart placement") {
  const EnvSpec cart = EnvSpec::by_name("cartpole");
  const Frame f = render(cart, {0, 0, 0, 0});
  for (int x = 0; x < kFrameSize; ++x) CHECK(f.at(48, x) == 255);
  CHECK(f.at(46, 32) == 255);   // cart body at center
  CHECK(f.at(46, 45) == 0);     // outside the cart
  const Frame right = render(cart, {2.0, 0, 0, 0});
  // x = 2.0 m maps right of center
  CHECK(right.at(46, 55) == 255);
}

TEST_CASE("frame stack equals renders of the last F states in order") {
  PixelEnv env(EnvSpec::by_name("pendulum"), RngStream(4, 4));
  env.reset();
  std::vector<PhysState> states;
  VisualState v;
  for (int i = 0; i < 6; ++i) {
    const auto sr = env.step({0.5});
    states.push_back(env.phys());
    v = sr.visual;
  }
  for (int f = 0; f < kFrameStack; ++f) {
    const PhysState& s = states[states.size() - kFrameStack + f];
    CHECK(v.frames[f] == render(env.spec(), s));
  }
}

TEST_CASE("eval_reward frozen values") {
  const EnvSpec pend = EnvSpec::by_name("pendulum");
  const EnvSpec cart = EnvSpec::by_name("cartpole");
  CHECK(eval_reward(pend, {0, 0, 0, 0}) == 1.0);
  CHECK(eval_reward(pend, {0, 0, kPi, 0}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(eval_reward(cart, {0, 0, 0.25, 0}) == 0.0);
  CHECK(eval_reward(cart, {0.5, 0, 0.1, 0}) == 1.0);
}

TEST_CASE("scripted expert meets the competence bars") {
  std::vector<double> returns;
  generate_expert_demos(EnvSpec::by_name("pendulum"), 10, 2024, &returns);
  double mean = 0;
  for (double r : returns) mean += r;
  mean /= returns.size();
  CHECK(mean >= 180.0);

  returns.clear();
  generate_expert_demos(EnvSpec::by_name("cartpole"), 10, 2024, &returns);
  mean = 0;
  for (double r : returns) mean += r;
  mean /= returns.size();
  CHECK(mean >= 190.0);
}

TEST_CASE("visual float view scales to [0,1]") {
  PixelEnv env(EnvSpec::by_name("pendulum"), RngStream(5, 1));
  const VisualState v = env.reset();
  std::vector<float> buf(kFramePixels * kFrameStack);
  v.to_float(buf.data());
  float mx = 0;
  for (float x : buf) {
    CHECK(x >= 0.0f);
    CHECK(x <= 1.0f);
    mx = std::max(mx, x);
  }
  CHECK(mx == 1.0f);  // geometry pixels are 255/255
}
