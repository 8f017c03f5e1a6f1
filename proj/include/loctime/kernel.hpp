#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "loctime/grid.hpp"

namespace loctime {

/// Nonnegative killing profile c with compact support. At a jump of the
/// profile (box edges, table extent) evaluation returns the half value of the
/// two one-sided limits; trapezoid sums over meshes that place the jump on a
/// node then stay second order.
class KillingKernel {
 public:
  enum class Kind { box, triangle, gaussian, table };

  static KillingKernel box(double height = 1.0, double half_width = 1.0) {
    if (height < 0.0 || half_width <= 0.0)
      throw ValidationError("box kernel: need height >= 0, half_width > 0");
    KillingKernel k;
    k.kind_ = Kind::box;
    k.name_ = "box";
    k.p1_ = height;
    k.p2_ = half_width;
    k.support_ = half_width;
    k.mass_ = 2.0 * height * half_width;
    return k;
  }

  static KillingKernel triangle(double peak = 1.0, double half_width = 1.0) {
    if (peak < 0.0 || half_width <= 0.0)
      throw ValidationError("triangle kernel: need peak >= 0, half_width > 0");
    KillingKernel k;
    k.kind_ = Kind::triangle;
    k.name_ = "triangle";
    k.p1_ = peak;
    k.p2_ = half_width;
    k.support_ = half_width;
    k.mass_ = peak * half_width;
    return k;
  }

  /// Truncated at 12 standard widths; the discarded tail is below 1e-14.
  static KillingKernel gaussian(double amplitude = 1.0, double sigma = 1.0) {
    if (amplitude < 0.0 || sigma <= 0.0)
      throw ValidationError("gaussian kernel: need amplitude >= 0, sigma > 0");
    KillingKernel k;
    k.kind_ = Kind::gaussian;
    k.name_ = "gaussian";
    k.p1_ = amplitude;
    k.p2_ = sigma;
    k.support_ = 12.0 * sigma;
    k.mass_ = amplitude * sigma * std::sqrt(2.0 * std::acos(-1.0));
    return k;
  }

  /// Piecewise-linear profile through (xs, ys). Endpoint samples must vanish
  /// so the profile is continuous where it meets zero.
  static KillingKernel table(std::vector<double> xs, std::vector<double> ys) {
    if (xs.size() < 2 || xs.size() != ys.size())
      throw ValidationError("table kernel: need matching xs/ys, length >= 2");
    for (std::size_t i = 1; i < xs.size(); ++i)
      if (!(xs[i] > xs[i - 1]))
        throw ValidationError("table kernel: xs must be strictly increasing");
    for (double y : ys)
      if (y < 0.0) throw ValidationError("table kernel: ys must be >= 0");
    if (ys.front() != 0.0 || ys.back() != 0.0)
      throw ValidationError("table kernel: ys must vanish at the extent ends");
    KillingKernel k;
    k.kind_ = Kind::table;
    k.name_ = "table";
    k.xs_ = std::move(xs);
    k.ys_ = std::move(ys);
    k.support_ = std::max(std::abs(k.xs_.front()), std::abs(k.xs_.back()));
    double m = 0.0;
    for (std::size_t i = 1; i < k.xs_.size(); ++i)
      m += 0.5 * (k.xs_[i] - k.xs_[i - 1]) * (k.ys_[i] + k.ys_[i - 1]);
    k.mass_ = m;
    return k;
  }

  static KillingKernel zero() {
    KillingKernel k = box(0.0, 1.0);
    k.name_ = "zero";
    return k;
  }

  double operator()(double x) const {
    switch (kind_) {
      case Kind::box: {
        const double d = std::abs(x) - p2_;
        if (std::abs(d) <= 1e-12 * p2_) return 0.5 * p1_;
        return d < 0.0 ? p1_ : 0.0;
      }
      case Kind::triangle: {
        const double t = 1.0 - std::abs(x) / p2_;
        return t > 0.0 ? p1_ * t : 0.0;
      }
      case Kind::gaussian: {
        if (std::abs(x) > support_) return 0.0;
        const double u = x / p2_;
        return p1_ * std::exp(-0.5 * u * u);
      }
      case Kind::table: {
        if (x < xs_.front() || x > xs_.back()) return 0.0;
        auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
        if (it == xs_.begin()) return ys_.front();
        if (it == xs_.end()) return ys_.back();
        const std::size_t i = static_cast<std::size_t>(it - xs_.begin());
        const double w = (x - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
        return (1.0 - w) * ys_[i - 1] + w * ys_[i];
      }
    }
    return 0.0;
  }

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double support_radius() const { return support_; }

  /// Total mass gamma = int c, from the closed form of each profile.
  double mass() const { return mass_; }

  /// Abscissas where c or c' jumps; quadratures split or avoid these.
  std::vector<double> breakpoints() const {
    switch (kind_) {
      case Kind::box:
        return {-p2_, p2_};
      case Kind::triangle:
        return {-p2_, 0.0, p2_};
      case Kind::gaussian:
        return {};
      case Kind::table:
        return xs_;
    }
    return {};
  }

  double param1() const { return p1_; }
  double param2() const { return p2_; }
  const std::vector<double>& table_xs() const { return xs_; }
  const std::vector<double>& table_ys() const { return ys_; }

 private:
  Kind kind_ = Kind::box;
  std::string name_ = "box";
  double p1_ = 1.0, p2_ = 1.0;
  double support_ = 1.0, mass_ = 2.0;
  std::vector<double> xs_, ys_;
};

/// c_eps(x) = eps^{-1} c(eps^{-1} x): same mass, support shrunk to
/// [-eps r, eps r], height scaled up by eps^{-1}.
struct ScaledKernel {
  KillingKernel base;
  double eps = 1.0;

  ScaledKernel(KillingKernel k, double e) : base(std::move(k)), eps(e) {
    if (!(eps > 0.0) || eps > 1.0)
      throw ValidationError("scaled kernel: eps must lie in (0, 1]");
  }

  double operator()(double x) const { return base(x / eps) / eps; }
  double support_radius() const { return eps * base.support_radius(); }
  double gamma() const { return base.mass(); }

  std::vector<double> breakpoints() const {
    std::vector<double> bp = base.breakpoints();
    for (double& v : bp) v *= eps;
    return bp;
  }
};

namespace detail {

struct SimpsonState {
  std::size_t evals = 0;
  bool failed = false;
};

template <class F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm,
                        double fb, double whole, double tol, int depth,
                        double piece_tol, SimpsonState& st) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  st.evals += 2;
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  // accept well below the classic 15x heuristic; the extrapolated value is
  // then comfortably inside the piece budget even when f'''' drifts
  if (std::abs(delta) <= 2.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0) {
    // The subinterval is now so small that even a jump inside it cannot move
    // the piece integral past its tolerance; otherwise report failure.
    const double reach =
        (b - a) * std::max({std::abs(fa), std::abs(fm), std::abs(fb)});
    if (reach > piece_tol) st.failed = true;
    return left + right;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1,
                          piece_tol, st) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1,
                          piece_tol, st);
}

template <class F>
double integrate_piece(const F& f, double a, double b, double tol, int depth,
                       SimpsonState& st) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  st.evals += 3;
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, depth, tol, st);
}

template <class F>
double integrate_with_breakpoints(const F& f, double lo, double hi,
                                  std::vector<double> cuts, double rel_tol,
                                  const std::string& who) {
  cuts.push_back(lo);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<double> pts;
  for (double c : cuts)
    if (c >= lo - 1e-300 && c <= hi + 1e-300) pts.push_back(c);
  // A first coarse pass fixes the absolute tolerance scale.
  double scale = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double m = 0.5 * (pts[i - 1] + pts[i]);
    scale += (pts[i] - pts[i - 1]) *
             (std::abs(f(pts[i - 1])) + 4.0 * std::abs(f(m)) +
              std::abs(f(pts[i]))) /
             6.0;
  }
  scale = std::max(scale, 1e-300);
  double total = 0.0;
  SimpsonState st;
  for (std::size_t i = 1; i < pts.size(); ++i)
    total += integrate_piece(f, pts[i - 1], pts[i],
                             rel_tol * scale * (pts[i] - pts[i - 1]) /
                                 std::max(hi - lo, 1e-300),
                             48, st);
  if (st.failed)
    throw NumericalError("quadrature for kernel '" + who +
                         "' did not converge to the requested tolerance");
  return total;
}

}  // namespace detail

/// Mass by adaptive Simpson quadrature over the support, split at profile
/// breakpoints. Cross-checks the closed-form mass() cached on the kernel.
inline double kernel_mass(const KillingKernel& k, double rel_tol = 1e-10) {
  if (!(rel_tol > 0.0)) throw ValidationError("kernel_mass: rel_tol must be > 0");
  const double r = k.support_radius();
  return detail::integrate_with_breakpoints([&](double x) { return k(x); }, -r,
                                            r, k.breakpoints(), rel_tol,
                                            k.name());
}

inline double kernel_mass(const ScaledKernel& k, double rel_tol = 1e-10) {
  if (!(rel_tol > 0.0)) throw ValidationError("kernel_mass: rel_tol must be > 0");
  const double r = k.support_radius();
  return detail::integrate_with_breakpoints([&](double x) { return k(x); }, -r,
                                            r, k.breakpoints(), rel_tol,
                                            k.base.name());
}

}  // namespace loctime
