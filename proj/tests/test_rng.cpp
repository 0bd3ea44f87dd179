#include <cmath>

#include "doctest.h"
#include "shgl/rng.hpp"

using namespace shgl;

TEST_CASE("philox4x32-10 known-answer vectors") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::generate(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::generate(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("uniform bits map into (0, 1]") {
  CHECK(uniform_open_closed(0) > 0.0);
  CHECK(uniform_open_closed(~0ull) == 1.0);
}

TEST_CASE("keyed normals are reproducible and standard") {
  CHECK(keyed_normal_pair(5, 7, 1, 2) == keyed_normal_pair(5, 7, 1, 2));
  CHECK(keyed_normal_pair(5, 7, 1, 2) != keyed_normal_pair(6, 7, 1, 2));
  const int n = 100000;
  double s1 = 0, s2 = 0, s4 = 0, cross = 0;
  for (int i = 0; i < n; ++i) {
    const auto [a, b] = keyed_normal_pair(42, i, 0, 0);
    s1 += a + b;
    s2 += a * a + b * b;
    s4 += a * a * a * a + b * b * b * b;
    cross += a * b;
  }
  const double m = 2.0 * n;
  CHECK(std::abs(s1 / m) < 0.01);
  CHECK(std::abs(s2 / m - 1.0) < 0.015);
  CHECK(std::abs(s4 / m - 3.0) < 0.08);
  CHECK(std::abs(cross / n) < 0.015);
}

TEST_CASE("seed mixing separates neighbours") {
  CHECK(mix_seed(1) != mix_seed(2));
  CHECK(mix_seed(0) != 0);
}
