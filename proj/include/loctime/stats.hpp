#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "loctime/grid.hpp"

namespace loctime {

/// Two-sided 99% normal quantile.
inline constexpr double kZ99 = 2.5758293035489004;

/// Neumaier compensated accumulator; order-stable enough that chunked
/// reductions stay byte-identical when combined in index order.
struct NeumaierSum {
  double sum = 0.0, comp = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  double total() const { return sum + comp; }
};

struct SampleStats {
  std::size_t n = 0;
  double mean = 0.0, sd = 0.0, se = 0.0;
  double ci99_lo = 0.0, ci99_hi = 0.0;
};

/// Mean, sample standard deviation and a 99% normal CI for the mean.
inline SampleStats summarize(const std::vector<double>& xs) {
  if (xs.size() < 2)
    throw ValidationError("summarize: need at least two samples");
  NeumaierSum s;
  for (double x : xs) s.add(x);
  SampleStats out;
  out.n = xs.size();
  out.mean = s.total() / static_cast<double>(out.n);
  NeumaierSum sq;
  for (double x : xs) sq.add((x - out.mean) * (x - out.mean));
  out.sd = std::sqrt(sq.total() / static_cast<double>(out.n - 1));
  out.se = out.sd / std::sqrt(static_cast<double>(out.n));
  out.ci99_lo = out.mean - kZ99 * out.se;
  out.ci99_hi = out.mean + kZ99 * out.se;
  return out;
}

/// One-sample Kolmogorov-Smirnov statistic against Exp(mean). Values below
/// zero sit at F = 0, so slightly negative bias-corrected samples are fine.
inline double ks_exponential(std::vector<double> xs, double mean) {
  if (xs.empty()) throw ValidationError("ks_exponential: empty sample");
  if (!(mean > 0.0)) throw ValidationError("ks_exponential: mean must be > 0");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double cdf = std::max(0.0, 1.0 - std::exp(-xs[i] / mean));
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max({d, cdf - lo, hi - cdf});
  }
  return d;
}

}  // namespace loctime
