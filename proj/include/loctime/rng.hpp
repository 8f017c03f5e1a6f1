#pragma once

#include <cmath>
#include <cstdint>

#include "loctime/grid.hpp"

namespace loctime {

/// Stateless 64-bit mixer; also the stream seeder for the path engines.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// xoshiro256** by Blackman/Vigna: 256-bit state, fast, equidistributed.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : s_) word = splitmix64(s);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  std::uint64_t operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

/// Independent engine for one path: mixing the index through splitmix64
/// decorrelates the streams, and the construction depends only on
/// (seed, index), never on the worker that runs the path.
inline Xoshiro256 path_stream(std::uint64_t seed, std::uint64_t index) {
  return Xoshiro256(seed + 0x9E3779B97F4A7C15ULL * (index + 1));
}

/// Uniform on the open interval (0, 1); never 0, safe under log.
inline double u01(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

namespace detail {

/// Ziggurat tables for the standard normal, 128 layers. Region 0 is the
/// base rectangle plus the tail beyond r; regions 1..127 are equal-area
/// horizontal strips ending in the cap at the peak.
struct ZigTables {
  static constexpr int kLayers = 128;
  double width[kLayers];       // sampling width of each region
  double edge[kLayers];        // quick-accept threshold
  double fy[kLayers + 1];      // exp(-x_j^2/2) at the strip boundaries
  double r = 0.0, v = 0.0;     // base edge and common region area
};

inline const ZigTables& zig_tables() {
  static const ZigTables tables = [] {
    ZigTables t{};
    const double r = 3.442619855899;
    const auto f = [](double x) { return std::exp(-0.5 * x * x); };
    const double tail =
        std::sqrt(std::acos(-1.0) / 2.0) * std::erfc(r / std::sqrt(2.0));
    const double v = r * f(r) + tail;
    t.r = r;
    t.v = v;

    double xj[ZigTables::kLayers + 1];
    xj[1] = r;
    t.fy[1] = f(r);
    for (int j = 1; j + 1 < ZigTables::kLayers; ++j) {
      const double fn = t.fy[j] + v / xj[j];
      xj[j + 1] = std::sqrt(-2.0 * std::log(fn));
      t.fy[j + 1] = fn;
    }
    // the last strip must close at the peak, otherwise r and the layer
    // count are inconsistent
    const double closure =
        t.fy[ZigTables::kLayers - 1] + v / xj[ZigTables::kLayers - 1];
    if (std::abs(closure - 1.0) > 1e-6)
      throw NumericalError("ziggurat tables failed to close at the peak");
    xj[ZigTables::kLayers] = 0.0;
    t.fy[ZigTables::kLayers] = 1.0;

    t.width[0] = v / f(r);
    t.edge[0] = r;
    for (int j = 1; j < ZigTables::kLayers; ++j) {
      t.width[j] = xj[j];
      t.edge[j] = xj[j + 1];
    }
    return t;
  }();
  return tables;
}

/// Exact tail sample beyond r (Marsaglia): exponential rejection.
inline double zig_tail(Xoshiro256& g, double r) {
  for (;;) {
    const double x = -std::log(u01(g())) / r;
    const double y = -std::log(u01(g()));
    if (x * x <= 2.0 * y) return r + x;
  }
}

}  // namespace detail

/// Standard normal draw. One 64-bit word covers layer, sign and mantissa;
/// the slow branches (strip edge, cap, tail) consume extra words.
inline double normal(Xoshiro256& g) {
  const auto& t = detail::zig_tables();
  for (;;) {
    const std::uint64_t bits = g();
    const int j = static_cast<int>(bits & 127);
    const double u = (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
    const double x = u * t.width[j];
    const double s = (bits & 128) ? -1.0 : 1.0;
    if (x < t.edge[j]) return s * x;
    if (j == 0) return s * detail::zig_tail(g, t.r);
    const double fx = std::exp(-0.5 * x * x);
    const double y = t.fy[j] + u01(g()) * (t.fy[j + 1] - t.fy[j]);
    if (y < fx) return s * x;
  }
}

}  // namespace loctime
