#pragma once

#include <cmath>

#include "loctime/grid.hpp"

namespace loctime {

/// Parameters of the vanishing-width limit dynamics on [a, b]: killing has
/// collapsed to the single interface point 0 with strength gamma, and
/// solutions obey the derivative jump f'(0+) - f'(0-) = 2 gamma f(0).
struct LimitParams {
  double a = -1.0;
  double b = 1.0;
  double gamma = 1.0;
  double lambda = 1.0;

  void validate(bool need_lambda = true) const {
    if (!(a < 0.0 && 0.0 < b))
      throw ValidationError("limit params: need a < 0 < b");
    if (gamma < 0.0) throw ValidationError("limit params: gamma must be >= 0");
    if (need_lambda && !(lambda >= 1e-8))
      throw ValidationError("limit params: lambda must be >= 1e-8");
  }

  double slam() const { return std::sqrt(2.0 * lambda); }

  /// Denominator b - a - 2 gamma a b shared by the harmonic profiles.
  double harmonic_denom() const { return b - a - 2.0 * gamma * a * b; }
};

/// k(x) = sinh(s(x-a))/s - (gamma/lambda) sinh(sa) sinh(sx) [x >= 0],
/// s = sqrt(2 lambda): vanishes at a, unit slope at a, derivative jump
/// 2 gamma k(0) at the interface.
inline double k_limit(const LimitParams& p, double x) {
  p.validate();
  const double s = p.slam();
  double v = std::sinh(s * (x - p.a)) / s;
  if (x >= 0.0)
    v -= (p.gamma / p.lambda) * std::sinh(s * p.a) * std::sinh(s * x);
  return v;
}

/// Mirror image of k_limit: vanishes at b with slope -1.
inline double l_limit(const LimitParams& p, double x) {
  p.validate();
  const double s = p.slam();
  double v = std::sinh(s * (p.b - x)) / s;
  if (x <= 0.0)
    v -= (p.gamma / p.lambda) * std::sinh(s * p.b) * std::sinh(s * x);
  return v;
}

/// Harmonic profile fixed by k*(a) = 0, k*(b) = 1 and the interface jump:
/// the probability-like weight of exiting at b.
inline double k_star(const LimitParams& p, double x) {
  p.validate(false);
  const double num = x - p.a - (x >= 0.0 ? 2.0 * p.gamma * p.a * x : 0.0);
  return num / p.harmonic_denom();
}

/// Harmonic profile fixed by l*(a) = 1, l*(b) = 0.
inline double l_star(const LimitParams& p, double x) {
  p.validate(false);
  const double num = p.b - x - (x <= 0.0 ? 2.0 * p.gamma * p.b * x : 0.0);
  return num / p.harmonic_denom();
}

/// E_x e^{-gamma L0(tau)} = k*(x) + l*(x): chance of reaching the boundary
/// before the interface clock rings. Affine in x on each side of 0.
inline double survival_expectation(const LimitParams& p, double x) {
  p.validate(false);
  const double num =
      p.b - p.a - p.gamma * (p.a + p.b) * x + p.gamma * (p.b - p.a) * std::abs(x);
  return num / p.harmonic_denom();
}

/// Mean of the exponential law of the local time accumulated at 0 by the
/// time the interval is exited (started at 0): m = 2(-a)b/(b-a).
inline double exp_law_mean(double a, double b) {
  if (!(a < 0.0 && 0.0 < b))
    throw ValidationError("exp_law_mean: need a < 0 < b");
  return 2.0 * (-a) * b / (b - a);
}

/// Long-time profile of the odd half-line block (Dirichlet at 0): x/b.
inline double k1_block(double b, double x) {
  if (!(b > 0.0)) throw ValidationError("k1_block: need b > 0");
  return x / b;
}

/// Long-time profile of the even half-line block (elastic at 0):
/// (1 + gamma x)/(1 + gamma b).
inline double k2_block(double b, double gamma, double x) {
  if (!(b > 0.0)) throw ValidationError("k2_block: need b > 0");
  if (gamma < 0.0) throw ValidationError("k2_block: gamma must be >= 0");
  return (1.0 + gamma * x) / (1.0 + gamma * b);
}

inline GridFunction k_limit_grid(const LimitParams& p, double h) {
  return GridFunction::sample(p.a, p.b, h,
                              [&](double x) { return k_limit(p, x); });
}

inline GridFunction l_limit_grid(const LimitParams& p, double h) {
  return GridFunction::sample(p.a, p.b, h,
                              [&](double x) { return l_limit(p, x); });
}

inline GridFunction k_star_grid(const LimitParams& p, double h) {
  return GridFunction::sample(p.a, p.b, h,
                              [&](double x) { return k_star(p, x); });
}

inline GridFunction l_star_grid(const LimitParams& p, double h) {
  return GridFunction::sample(p.a, p.b, h,
                              [&](double x) { return l_star(p, x); });
}

}  // namespace loctime
