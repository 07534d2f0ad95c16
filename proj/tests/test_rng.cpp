#include <cmath>
#include <set>

#include "doctest.h"
#include "normscaler/rng.hpp"

using namespace normscaler;

TEST_CASE("counter stream is addressable") {
  CounterRng rng(1234);
  std::uint64_t draws[5];
  for (auto& x : draws) x = rng.next_u64();
  for (std::uint64_t i = 0; i < 5; ++i) {
    CHECK(draws[i] == mix64(1234 + (i + 1) * 0x9E3779B97F4A7C15ULL));
  }
  CHECK(rng.counter() == 5);
}

TEST_CASE("uniforms lie in (0, 1]") {
  CounterRng rng(7);
  double lo = 1.0;
  double hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.next_uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo > 0.0);
  CHECK(hi <= 1.0);
  CHECK(lo < 1e-3);
  CHECK(hi > 1.0 - 1e-3);
}

TEST_CASE("gaussian moments") {
  CounterRng rng(2024);
  const int count = 1'000'000;
  double m1 = 0.0;
  double m2 = 0.0;
  double m4 = 0.0;
  for (int i = 0; i < count; ++i) {
    const double z = rng.next_gaussian();
    m1 += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  m1 /= count;
  m2 /= count;
  m4 /= count;
  CHECK(std::abs(m1) < 5e-3);
  CHECK(std::abs(m2 - 1.0) < 5e-3);
  CHECK(std::abs(m4 - 3.0) < 0.05);
}

TEST_CASE("splits and trial seeds are distinct") {
  CounterRng root(5);
  std::set<std::uint64_t> keys;
  for (std::uint64_t t = 0; t < 1000; ++t) keys.insert(root.split(t).key());
  CHECK(keys.size() == 1000);
  CHECK(root.split(3).key() == root.split(3).key());

  std::set<std::uint64_t> seeds;
  for (std::uint64_t t = 0; t < 1000; ++t) seeds.insert(trial_seed(1, "fig1_e1", t));
  CHECK(seeds.size() == 1000);
  CHECK(trial_seed(1, "fig1_e1", 0) != trial_seed(1, "fig2_flat", 0));
  CHECK(trial_seed(1, "x", 9) == trial_seed(1, "x", 9));
  static_assert(fnv1a64("") == 0xCBF29CE484222325ULL);
  static_assert(fnv1a64("a") == 0xAF63DC4C8601EC8CULL);
}
