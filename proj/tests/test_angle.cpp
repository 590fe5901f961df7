#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "symbox/angle.hpp"
#include "symbox/rng.hpp"

using namespace symbox::angle;
using symbox::DegenerateCodeError;
using symbox::rng::SplitMix64;

TEST_CASE("encode matches the phase formula") {
  const EncodedAngle e0 = encode(0.0);
  REQUIRE(e0.steps() == 3);
  CHECK(e0.code[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(e0.code[1] == Catch::Approx(-0.5).margin(1e-12));
  CHECK(e0.code[2] == Catch::Approx(-0.5).margin(1e-12));

  const EncodedAngle e90 = encode(kPi / 2);
  CHECK(e90.code[0] == Catch::Approx(-1.0).margin(1e-12));
  CHECK(e90.code[1] == Catch::Approx(0.5).margin(1e-12));
  CHECK(e90.code[2] == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("encode has period pi") {
  SplitMix64 rng(21);
  for (int i = 0; i < 200; ++i) {
    const double theta = rng.uniform(-6.0, 6.0);
    const EncodedAngle a = encode(theta);
    const EncodedAngle b = encode(theta + kPi);
    for (int n = 0; n < a.steps(); ++n)
      REQUIRE(a.code[n] == Catch::Approx(b.code[n]).margin(1e-12));
  }
}

TEST_CASE("encode rejects bad input") {
  CHECK_THROWS_AS(encode(std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(encode(0.0, 2), std::invalid_argument);
}

TEST_CASE("decode inverts encode mod pi") {
  CHECK(decode(encode(0.3)) == Catch::Approx(0.3).margin(1e-12));
  CHECK(decode(encode(2.0)) == Catch::Approx(2.0 - kPi).margin(1e-12));
  CHECK(decode({{1.0, -0.5, -0.5}}) == Catch::Approx(0.0).margin(1e-12));

  for (const int steps : {3, 4, 7}) {
    const int grid = 10000;
    for (int i = 0; i < grid; ++i) {
      const double theta = -kPi + 2.0 * kPi * i / grid;
      const double back = decode(encode(theta, steps));
      REQUIRE(std::fabs(snap_distance(back, theta)) <= 1e-9);
      REQUIRE(back >= -kPi / 2);
      REQUIRE(back < kPi / 2);
    }
  }
}

TEST_CASE("decode flags the degenerate all-zero code") {
  CHECK_THROWS_AS(decode({{0.0, 0.0, 0.0}}), DegenerateCodeError);
}

TEST_CASE("encode is continuous across the +-pi/2 boundary") {
  for (double eps = 1e-3; eps >= 1e-9; eps *= 1e-2) {
    const EncodedAngle hi = encode(kPi / 2 - eps);
    const EncodedAngle lo = encode(-kPi / 2 + eps);
    double gap = 0.0;
    for (int n = 0; n < hi.steps(); ++n) gap += (hi.code[n] - lo.code[n]) * (hi.code[n] - lo.code[n]);
    REQUIRE(std::sqrt(gap) <= 10.0 * eps);
  }
}

TEST_CASE("snap_distance examples") {
  CHECK(std::fabs(snap_distance(0.1, 0.1 + kPi)) < 1e-12);
  CHECK(snap_distance(0.7, 0.7) == 0.0);
  CHECK(snap_distance(1.5, -1.5) == Catch::Approx(3.0 - kPi).margin(1e-12));
}

TEST_CASE("snap_distance equals the brute-force minimizer and stays in range") {
  SplitMix64 rng(22);
  for (int i = 0; i < 10000; ++i) {
    const double p = rng.uniform(-10.0, 10.0);
    const double t = rng.uniform(-10.0, 10.0);
    const double d = snap_distance(p, t);
    REQUIRE(d > -kPi / 2);
    REQUIRE(d <= kPi / 2);
    REQUIRE(d == oracle::brute_snap_distance(p, t));
  }
}
