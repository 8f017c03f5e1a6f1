#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "loctime/closedform.hpp"
#include "loctime/grid.hpp"
#include "loctime/kernel.hpp"
#include "loctime/picard.hpp"

namespace loctime {

/// One-sided stencil report on the conditions that cut out the limit
/// domain. Second derivatives use the 3-node stencils through
/// {x0, x0 +- h, x0 +- 2h}, so those entries carry an O(h) truncation
/// floor even on exact members of the domain.
struct BoundaryReport {
  double d2_a = 0.0;    // |f''(a)|
  double d2_b = 0.0;    // |f''(b)|
  double d2_gap = 0.0;  // |f''(0+) - f''(0-)|
  double jump = 0.0;    // |f'(0+) - f'(0-) - 2 gamma f(0)|
};

inline BoundaryReport check_domain(const GridFunction& f, double gamma) {
  GridFunction::validate_mesh(f.a, f.b, f.h);
  const std::size_t n = f.size();
  const std::size_t z = f.zero_node();
  if (n < 5 || z < 2 || z + 2 >= n)
    throw ValidationError(
        "check_domain: need at least two interior nodes on each side of 0");
  const auto& v = f.values;
  const double h = f.h;
  const double hh = h * h;
  BoundaryReport r;
  r.d2_a = std::abs((v[0] - 2.0 * v[1] + v[2]) / hh);
  r.d2_b = std::abs((v[n - 1] - 2.0 * v[n - 2] + v[n - 3]) / hh);
  const double d2r = (v[z] - 2.0 * v[z + 1] + v[z + 2]) / hh;
  const double d2l = (v[z] - 2.0 * v[z - 1] + v[z - 2]) / hh;
  r.d2_gap = std::abs(d2r - d2l);
  const double d1r = (-3.0 * v[z] + 4.0 * v[z + 1] - v[z + 2]) / (2.0 * h);
  const double d1l = (3.0 * v[z] - 4.0 * v[z - 1] + v[z - 2]) / (2.0 * h);
  r.jump = std::abs((d1r - d1l) - 2.0 * gamma * v[z]);
  return r;
}

struct ResolventResult {
  GridFunction f;
  double lambda = 0.0;
  double residual_sup = 0.0;  // worst |lambda f - f''/2 + rate f - g| off jumps
  BoundaryReport boundary_report;
  double wronskian = 0.0;
  GridFunction residual;  // per node; NaN where a stencil straddles a jump
};

namespace detail {

/// f(x) = (2/w) [ l(x) int_a^x k g + k(x) int_x^b l g ] + atom_a l + atom_b k.
inline GridFunction green_assembly(const GridFunction& k, const GridFunction& l,
                                   const GridFunction& g, double w,
                                   double atom_a, double atom_b) {
  GridFunction kg = k, lg = l;
  for (std::size_t i = 0; i < g.size(); ++i) {
    kg.values[i] *= g.values[i];
    lg.values[i] *= g.values[i];
  }
  const GridFunction ikg = cumtrapz_forward(kg);
  const GridFunction ilg = cumtrapz_backward(lg);
  GridFunction out = GridFunction::uniform(g.a, g.b, g.h);
  for (std::size_t i = 0; i < g.size(); ++i)
    out.values[i] = (2.0 / w) * (l.values[i] * ikg.values[i] +
                                 k.values[i] * ilg.values[i]) +
                    atom_a * l.values[i] + atom_b * k.values[i];
  return out;
}

/// Central 2nd-difference residual of lambda f - f''/2 + rate f = g.
/// Nodes within one cell of a coefficient jump are skipped: the stencil
/// (and, for the fixed-point solution, its averaged coefficients) reads
/// across the kink there and reports an O(1) artifact.
template <class Rate>
inline void fill_residual(const GridFunction& f, const GridFunction& g,
                          double lambda, Rate&& rate,
                          const std::vector<double>& kinks, GridFunction& prof,
                          double& sup) {
  const double h = f.h;
  prof =
      GridFunction::uniform(f.a, f.b, h, std::numeric_limits<double>::quiet_NaN());
  sup = 0.0;
  for (std::size_t i = 1; i + 1 < f.size(); ++i) {
    const double x = f.x(i);
    bool skip = false;
    for (double q : kinks)
      if (std::abs(x - q) <= h * (1.0 + 1e-6)) {
        skip = true;
        break;
      }
    if (skip) continue;
    const double dd =
        (f.values[i - 1] - 2.0 * f.values[i] + f.values[i + 1]) / (h * h);
    const double r =
        lambda * f.values[i] - 0.5 * dd + rate(x) * f.values[i] - g.values[i];
    prof.values[i] = r;
    sup = std::max(sup, std::abs(r));
  }
}

}  // namespace detail

/// R(lambda) g for the killed-and-stopped dynamics with rate c. Interior
/// Green part from the Cauchy pair, plus the mass parked at the absorbing
/// endpoints, where the data keeps decaying at rate lambda + c(endpoint).
inline ResolventResult resolvent_eps(const GridFunction& g, double lambda,
                                     const ScaledKernel& c,
                                     double tol = 1e-10) {
  if (!(lambda > 0.0))
    throw ValidationError("resolvent_eps: lambda must be > 0, got " +
                          detail::fmt_g(lambda));
  GridFunction::validate_mesh(g.a, g.b, g.h);
  detail::require_resolved(c, g.h);

  const EigenPair pair = solve_pair(c, lambda, g.a, g.b, g.h, tol);
  if (pair.wronskian_rel_variation > 1e-3)
    throw NumericalError(
        "resolvent_eps: inconsistent eigenpair, Wronskian varies by " +
        detail::fmt_g(pair.wronskian_rel_variation));

  const double atom_a =
      g.values.front() / ((lambda + c(g.a)) * pair.l.values.front());
  const double atom_b =
      g.values.back() / ((lambda + c(g.b)) * pair.k.values.back());

  ResolventResult out;
  out.lambda = lambda;
  out.wronskian = pair.wronskian;
  out.f =
      detail::green_assembly(pair.k, pair.l, g, pair.wronskian, atom_a, atom_b);
  detail::fill_residual(
      out.f, g, lambda, [&](double x) { return c(x); }, c.breakpoints(),
      out.residual, out.residual_sup);

  // The atoms are tuned so the interior equation extends to the endpoints
  // with f'' -> 0 there; report the one-sided stencil values.
  const auto& v = out.f.values;
  const double hh = g.h * g.h;
  out.boundary_report.d2_a = std::abs((v[0] - 2.0 * v[1] + v[2]) / hh);
  out.boundary_report.d2_b =
      std::abs((v[v.size() - 1] - 2.0 * v[v.size() - 2] + v[v.size() - 3]) / hh);
  return out;
}

/// Limit resolvent from the closed-form pair. The Green assembly inherits
/// the interface jump automatically: both k and l carry it, so the output
/// satisfies f'(0+) - f'(0-) = 2 gamma f(0) by construction.
inline ResolventResult resolvent_limit(const GridFunction& g,
                                       const LimitParams& p) {
  p.validate();
  if (std::abs(g.a - p.a) > 1e-12 || std::abs(g.b - p.b) > 1e-12)
    throw ValidationError("resolvent_limit: grid endpoints do not match [a, b]");
  GridFunction::validate_mesh(g.a, g.b, g.h);

  const GridFunction k = k_limit_grid(p, g.h);
  const GridFunction l = l_limit_grid(p, g.h);
  const double w = l_limit(p, p.a);  // analytic Wronskian; equals k(b)

  const double atom_a = g.values.front() / (p.lambda * l.values.front());
  const double atom_b = g.values.back() / (p.lambda * k.values.back());

  ResolventResult out;
  out.lambda = p.lambda;
  out.wronskian = w;
  out.f = detail::green_assembly(k, l, g, w, atom_a, atom_b);
  detail::fill_residual(
      out.f, g, p.lambda, [](double) { return 0.0; }, {0.0}, out.residual,
      out.residual_sup);
  out.boundary_report = check_domain(out.f, p.gamma);
  return out;
}

/// lambda R(lambda) g along a decreasing lambda panel. Returns the scaled
/// resolvent at the smallest lambda and verifies the approach to the
/// harmonic combination g(a) l* + g(b) k*.
inline GridFunction lambda_to_zero_limit(const GridFunction& g, LimitParams p,
                                         const std::vector<double>& lambdas,
                                         std::vector<double>* sup_errors = nullptr) {
  if (lambdas.empty())
    throw ValidationError("lambda_to_zero_limit: lambda panel is empty");
  for (std::size_t i = 1; i < lambdas.size(); ++i)
    if (!(lambdas[i] < lambdas[i - 1]))
      throw ValidationError(
          "lambda_to_zero_limit: lambdas must decrease toward 0");
  p.validate(false);

  const double va = g.values.front(), vb = g.values.back();
  const GridFunction target =
      GridFunction::sample(g.a, g.b, g.h, [&](double x) {
        return va * l_star(p, x) + vb * k_star(p, x);
      });

  GridFunction scaled;
  std::vector<double> errs;
  errs.reserve(lambdas.size());
  for (double lam : lambdas) {
    p.lambda = lam;
    scaled = lam * resolvent_limit(g, p).f;
    errs.push_back(sup_diff(scaled, target));
  }
  if (errs.back() > errs.front())
    throw NumericalError(
        "lambda_to_zero_limit: no approach to the harmonic limit (sup error " +
        detail::fmt_g(errs.front()) + " at lambda " +
        detail::fmt_g(lambdas.front()) + " vs " + detail::fmt_g(errs.back()) +
        " at " + detail::fmt_g(lambdas.back()) + ")");
  if (sup_errors) *sup_errors = errs;
  return scaled;
}

}  // namespace loctime
