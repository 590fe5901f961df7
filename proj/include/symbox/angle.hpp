#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "symbox/errors.hpp"
#include "symbox/geometry.hpp"

namespace symbox::angle {

using geom::kPi;

// Phase-shifting code for a period-pi angle. N evenly spaced phase steps,
// code[n] = cos(2*theta + 2*pi*n/N); the doubled angle removes the jump at
// +-pi/2 that raw regression suffers from.
struct EncodedAngle {
  std::vector<double> code;

  int steps() const { return static_cast<int>(code.size()); }
};

inline constexpr int kDefaultPhaseSteps = 3;

inline double phase_offset(int n, int steps) { return 2.0 * kPi * n / steps; }

inline EncodedAngle encode(double theta, int steps = kDefaultPhaseSteps) {
  if (!std::isfinite(theta)) throw std::invalid_argument("encode: non-finite angle");
  if (steps < 3) throw std::invalid_argument("encode: need at least 3 phase steps");
  EncodedAngle e;
  e.code.resize(steps);
  for (int n = 0; n < steps; ++n) e.code[n] = std::cos(2.0 * theta + phase_offset(n, steps));
  return e;
}

inline constexpr double kDegenerateAccum = 1e-12;

// theta = 1/2 * atan2(-sum code*sin(phi_n), sum code*cos(phi_n)), in [-pi/2, pi/2).
inline double decode(const EncodedAngle& e) {
  const int steps = e.steps();
  if (steps < 3) throw std::invalid_argument("decode: need at least 3 phase steps");
  double s = 0.0, c = 0.0;
  for (int n = 0; n < steps; ++n) {
    const double phi = phase_offset(n, steps);
    s -= e.code[n] * std::sin(phi);
    c += e.code[n] * std::cos(phi);
  }
  if (std::fabs(s) < kDegenerateAccum && std::fabs(c) < kDegenerateAccum)
    throw DegenerateCodeError();
  double theta = 0.5 * std::atan2(s, c);
  if (theta >= kPi / 2.0) theta -= kPi;
  return theta;
}

// Grid index k minimizing |pred - (k*pi + target)|. The snap losses keep this
// branch fixed during backprop.
inline double snap_index(double pred, double target) {
  const double k = std::round((pred - target) / kPi);
  const double d = pred - k * kPi - target;
  if (d > kPi / 2.0) return k + 1.0;
  if (d <= -kPi / 2.0) return k - 1.0;
  return k;
}

// pred - (k*pi + target) for the minimizing k; result in (-pi/2, pi/2].
inline double snap_distance(double pred, double target) {
  if (!std::isfinite(pred) || !std::isfinite(target))
    throw std::invalid_argument("snap_distance: non-finite input");
  const double k = snap_index(pred, target);
  return pred - k * kPi - target;
}

}  // namespace symbox::angle
