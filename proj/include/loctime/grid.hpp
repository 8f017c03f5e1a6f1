#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace loctime {

/// Bad arguments or ill-formed configuration. Maps to CLI exit code 2.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// An algorithm failed to converge or a numerical sanity check failed.
/// Maps to CLI exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Function sampled on a uniform mesh over [a, b]. The mesh always carries a
/// node exactly at x = 0, so interface quantities can be read off a node.
struct GridFunction {
  double a = -1.0;
  double b = 1.0;
  double h = 1.0;
  std::vector<double> values;

  static void validate_mesh(double a, double b, double h) {
    if (!(b > a)) throw ValidationError("grid: need b > a");
    if (!(h > 0.0)) throw ValidationError("grid: need h > 0");
    const double r = (b - a) / h;
    if (std::abs(r - std::round(r)) > 1e-12 * std::max(1.0, r))
      throw ValidationError("grid: step " + detail::fmt_g(h) +
                            " does not divide [" + detail::fmt_g(a) + ", " +
                            detail::fmt_g(b) + "]");
    if (a > 0.0 || b < 0.0)
      throw ValidationError("grid: interval must contain 0");
    const double z = -a / h;
    if (std::abs(z - std::round(z)) > 1e-12 * std::max(1.0, z))
      throw ValidationError("grid: x = 0 is not a node (a = " +
                            detail::fmt_g(a) + ", h = " + detail::fmt_g(h) +
                            ")");
  }

  static std::size_t mesh_size(double a, double b, double h) {
    validate_mesh(a, b, h);
    return static_cast<std::size_t>(std::llround((b - a) / h)) + 1;
  }

  static GridFunction uniform(double a, double b, double h,
                              double init = 0.0) {
    GridFunction f;
    f.a = a;
    f.b = b;
    f.h = h;
    f.values.assign(mesh_size(a, b, h), init);
    return f;
  }

  template <class F>
  static GridFunction sample(double a, double b, double h, F&& fn) {
    GridFunction f = uniform(a, b, h);
    for (std::size_t i = 0; i < f.size(); ++i) f.values[i] = fn(f.x(i));
    return f;
  }

  std::size_t size() const { return values.size(); }
  double x(std::size_t i) const { return a + static_cast<double>(i) * h; }

  std::size_t zero_node() const {
    return static_cast<std::size_t>(std::llround(-a / h));
  }

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  /// Piecewise-linear evaluation at an arbitrary point of [a, b].
  double at(double xq) const {
    if (xq < a - 1e-12 || xq > b + 1e-12)
      throw ValidationError("grid: evaluation point outside [a, b]");
    double t = (xq - a) / h;
    auto i = static_cast<std::size_t>(t);
    if (i >= size() - 1) return values.back();
    double w = t - static_cast<double>(i);
    return (1.0 - w) * values[i] + w * values[i + 1];
  }

  bool same_mesh(const GridFunction& o) const {
    return std::abs(a - o.a) <= 1e-12 && std::abs(b - o.b) <= 1e-12 &&
           std::abs(h - o.h) <= 1e-15 && size() == o.size();
  }
};

inline GridFunction operator+(GridFunction f, const GridFunction& g) {
  for (std::size_t i = 0; i < f.size(); ++i) f.values[i] += g.values[i];
  return f;
}

inline GridFunction operator-(GridFunction f, const GridFunction& g) {
  for (std::size_t i = 0; i < f.size(); ++i) f.values[i] -= g.values[i];
  return f;
}

inline GridFunction operator*(double c, GridFunction f) {
  for (double& v : f.values) v *= c;
  return f;
}

inline double sup_norm(const GridFunction& f) {
  double m = 0.0;
  for (double v : f.values) m = std::max(m, std::abs(v));
  return m;
}

inline double sup_diff(const GridFunction& f, const GridFunction& g) {
  if (!f.same_mesh(g)) throw ValidationError("sup_diff: mesh mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    m = std::max(m, std::abs(f.values[i] - g.values[i]));
  return m;
}

/// Running trapezoid integral from the left endpoint: out(x) = int_a^x f.
inline GridFunction cumtrapz_forward(const GridFunction& f) {
  GridFunction out = f;
  out.values[0] = 0.0;
  for (std::size_t i = 1; i < f.size(); ++i)
    out.values[i] =
        out.values[i - 1] + 0.5 * f.h * (f.values[i - 1] + f.values[i]);
  return out;
}

/// Running trapezoid integral to the right endpoint: out(x) = int_x^b f.
inline GridFunction cumtrapz_backward(const GridFunction& f) {
  GridFunction out = f;
  const std::size_t n = f.size();
  out.values[n - 1] = 0.0;
  for (std::size_t i = n - 1; i-- > 0;)
    out.values[i] =
        out.values[i + 1] + 0.5 * f.h * (f.values[i] + f.values[i + 1]);
  return out;
}

inline double trapz(const GridFunction& f) {
  double s = 0.0;
  for (std::size_t i = 1; i < f.size(); ++i)
    s += 0.5 * f.h * (f.values[i - 1] + f.values[i]);
  return s;
}

/// Keep every stride-th node. (size-1) must be divisible by stride.
inline GridFunction downsample(const GridFunction& f, std::size_t stride) {
  if (stride == 0 || (f.size() - 1) % stride != 0)
    throw ValidationError("downsample: stride does not divide the mesh");
  GridFunction out;
  out.a = f.a;
  out.b = f.b;
  out.h = f.h * static_cast<double>(stride);
  out.values.reserve((f.size() - 1) / stride + 1);
  for (std::size_t i = 0; i < f.size(); i += stride)
    out.values.push_back(f.values[i]);
  return out;
}

}  // namespace loctime
