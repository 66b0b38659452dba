#include <doctest.h>

#include <cmath>

#include "cail/rng.hpp"

using namespace cail;

TEST_CASE("streams are reproducible and independent") {
  RngStream a(42, 1), b(42, 1), c(42, 2);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  RngStream a2(42, 1);
  bool any_diff = false;
  for (int i = 0; i < 8; ++i) any_diff |= (a2.next_u64() != c.next_u64());
  CHECK(any_diff);
}

TEST_CASE("uniform stays in range and uniform_index respects bounds") {
  RngStream rng(7, 3);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < 1000; ++i) CHECK(rng.uniform_index(7) < 7);
}

TEST_CASE("gauss has roughly standard moments") {
  RngStream rng(11, 4);
  const int n = 20000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gauss();
    sum += g;
    sum2 += g * g;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.1);
}

TEST_CASE("derive gives deterministic children") {
  RngStream parent(5, 6);
  RngStream c1 = parent.derive(9);
  RngStream c2 = parent.derive(9);
  for (int i = 0; i < 16; ++i) CHECK(c1.next_u64() == c2.next_u64());
}
