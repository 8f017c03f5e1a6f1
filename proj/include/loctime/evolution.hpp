#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "loctime/closedform.hpp"
#include "loctime/expm.hpp"
#include "loctime/grid.hpp"
#include "loctime/kernel.hpp"
#include "loctime/picard.hpp"
#include "loctime/tridiag.hpp"

namespace loctime {

/// The five generators. a_eps kills at rate c_eps inside (a,b); a_limit
/// kills through the interface node; b_dirichlet kills at both ends; g1
/// and g2 live on [0, b] with Dirichlet resp. elastic behavior at 0.
enum class GeneratorKind { a_eps, a_limit, b_dirichlet, g1, g2 };

enum class Scheme { crank_nicolson, dense_exponential };

/// Tridiagonal stencil of a generator. Absorbing (stopped) ends are stored
/// as identically zero rows: the value there never moves. Nodes listed in
/// `dirichlet` additionally pin the value to 0; data fed to `evolve` must
/// vanish there, which makes the zero-row treatment coincide with
/// eliminating the node from the system.
struct GeneratorMatrix {
  GeneratorKind kind = GeneratorKind::a_limit;
  double a = -1.0, b = 1.0, h = 1.0;
  std::vector<double> lower, diag, upper;
  std::vector<std::size_t> dirichlet;
  double gamma = 0.0;
  double eps = 0.0;

  std::size_t size() const { return diag.size(); }
  double x(std::size_t i) const { return a + static_cast<double>(i) * h; }
};

inline GeneratorMatrix discretize(GeneratorKind kind, double a, double b,
                                  double h,
                                  const ScaledKernel* kernel = nullptr,
                                  double gamma = 0.0) {
  const std::size_t n = GridFunction::mesh_size(a, b, h);
  if (n < 3) throw ValidationError("discretize: need at least 3 nodes");
  if (gamma < 0.0) throw ValidationError("discretize: gamma must be >= 0");

  GeneratorMatrix m;
  m.kind = kind;
  m.a = a;
  m.b = b;
  m.h = h;
  m.gamma = gamma;
  m.lower.assign(n - 1, 0.0);
  m.upper.assign(n - 1, 0.0);
  m.diag.assign(n, 0.0);

  const double off = 1.0 / (2.0 * h * h);
  const double lap = -1.0 / (h * h);

  switch (kind) {
    case GeneratorKind::a_eps: {
      if (kernel == nullptr)
        throw ValidationError("discretize: a_eps needs a kernel");
      detail::require_resolved(*kernel, h);
      m.eps = kernel->eps;
      m.gamma = kernel->gamma();
      for (std::size_t i = 1; i + 1 < n; ++i) {
        m.lower[i - 1] = off;
        m.upper[i] = off;
        m.diag[i] = lap - (*kernel)(m.x(i));
      }
      break;
    }
    case GeneratorKind::a_limit: {
      const std::size_t z = static_cast<std::size_t>(std::llround(-a / h));
      if (z == 0 || z + 1 >= n)
        throw ValidationError("discretize: a_limit needs 0 strictly inside");
      for (std::size_t i = 1; i + 1 < n; ++i) {
        m.lower[i - 1] = off;
        m.upper[i] = off;
        m.diag[i] = lap;
      }
      // lumped interface row: f(h) + f(-h) = (2 + 2 h gamma) f(0) + h^2 f''(0)
      m.diag[z] = lap - gamma / h;
      break;
    }
    case GeneratorKind::b_dirichlet: {
      for (std::size_t i = 1; i + 1 < n; ++i) {
        m.lower[i - 1] = off;
        m.upper[i] = off;
        m.diag[i] = lap;
      }
      m.dirichlet = {0, n - 1};
      break;
    }
    case GeneratorKind::g1:
    case GeneratorKind::g2: {
      if (std::abs(a) > 1e-12)
        throw ValidationError("discretize: half-line blocks live on [0, b]");
      for (std::size_t i = 1; i + 1 < n; ++i) {
        m.lower[i - 1] = off;
        m.upper[i] = off;
        m.diag[i] = lap;
      }
      if (kind == GeneratorKind::g1) {
        m.dirichlet = {0};
      } else {
        // ghost-node elastic row: f''(0)/2 ~ (f(h) - (1 + h gamma) f(0))/h^2
        m.diag[0] = -(1.0 + h * gamma) / (h * h);
        m.upper[0] = 1.0 / (h * h);
      }
      break;
    }
  }
  return m;
}

inline GridFunction apply(const GeneratorMatrix& m, const GridFunction& f) {
  if (f.size() != m.size() || std::abs(f.a - m.a) > 1e-12 ||
      std::abs(f.h - m.h) > 1e-15)
    throw ValidationError("apply: grid does not match the matrix");
  GridFunction out = GridFunction::uniform(m.a, m.b, m.h);
  const std::size_t n = m.size();
  for (std::size_t i = 0; i < n; ++i) {
    double s = m.diag[i] * f.values[i];
    if (i > 0) s += m.lower[i - 1] * f.values[i - 1];
    if (i + 1 < n) s += m.upper[i] * f.values[i + 1];
    out.values[i] = s;
  }
  return out;
}

struct EvolutionResult {
  std::vector<double> times;
  std::vector<GridFunction> snapshots;
  Scheme scheme = Scheme::crank_nicolson;
};

namespace detail {

inline DenseMatrix to_dense(const GeneratorMatrix& m) {
  DenseMatrix d(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    d.at(i, i) = m.diag[i];
    if (i > 0) d.at(i, i - 1) = m.lower[i - 1];
    if (i + 1 < m.size()) d.at(i, i + 1) = m.upper[i];
  }
  return d;
}

}  // namespace detail

/// Step f0 forward under the generator. Crank-Nicolson with two opening
/// backward-Euler half steps (damps the modes a rough datum excites at the
/// stiff end of the spectrum); or the dense exponential as an exact-in-time
/// oracle. Snapshot times must sit on the step grid.
inline EvolutionResult evolve(const GeneratorMatrix& m, const GridFunction& f0,
                              double t_end, double dt, Scheme scheme,
                              std::vector<double> snapshot_times = {}) {
  if (f0.size() != m.size() || std::abs(f0.a - m.a) > 1e-12 ||
      std::abs(f0.h - m.h) > 1e-15)
    throw ValidationError("evolve: data grid does not match the matrix");
  if (!(dt > 0.0)) throw ValidationError("evolve: dt must be > 0");
  if (t_end < 0.0) throw ValidationError("evolve: t_end must be >= 0");
  if (t_end > 0.0 && dt > t_end * (1.0 + 1e-12))
    throw ValidationError("evolve: need dt <= t_end");
  for (std::size_t d : m.dirichlet)
    if (std::abs(f0.values[d]) > 1e-12)
      throw ValidationError(
          "evolve: data must vanish at Dirichlet nodes (value " +
          detail::fmt_g(f0.values[d]) + " at x = " + detail::fmt_g(f0.x(d)) +
          ")");

  const auto n_steps = static_cast<std::size_t>(std::llround(t_end / dt));
  if (std::abs(t_end - static_cast<double>(n_steps) * dt) >
      1e-9 * std::max(1.0, t_end))
    throw ValidationError("evolve: t_end must be a multiple of dt");

  if (snapshot_times.empty()) snapshot_times = {t_end};
  std::vector<std::size_t> snap_idx;
  for (double t : snapshot_times) {
    if (t < -1e-15 || t > t_end * (1.0 + 1e-12) + 1e-15)
      throw ValidationError("evolve: snapshot time outside [0, t_end]");
    const auto k = static_cast<std::size_t>(std::llround(t / dt));
    if (std::abs(t - static_cast<double>(k) * dt) > 1e-9 * std::max(1.0, t))
      throw ValidationError("evolve: snapshot time " + detail::fmt_g(t) +
                            " is not a multiple of dt");
    snap_idx.push_back(k);
  }
  if (!std::is_sorted(snap_idx.begin(), snap_idx.end()))
    throw ValidationError("evolve: snapshot times must increase");

  EvolutionResult out;
  out.scheme = scheme;
  const std::size_t n = m.size();

  if (scheme == Scheme::dense_exponential) {
    if (n > 2000)
      throw ValidationError("evolve: dense scheme supports at most 2000 nodes");
    const DenseMatrix gen = detail::to_dense(m);
    std::vector<double> f = f0.values;
    std::size_t prev = 0;
    double cached_gap = -1.0;
    DenseMatrix step;
    for (std::size_t k : snap_idx) {
      const double gap = static_cast<double>(k - prev) * dt;
      if (gap > 0.0) {
        if (gap != cached_gap) {
          DenseMatrix scaled = gen;
          for (double& v : scaled.d) v *= gap;
          step = expm(std::move(scaled));
          cached_gap = gap;
        }
        f = step * f;
      }
      prev = k;
      GridFunction snap = f0;
      snap.values = f;
      out.times.push_back(static_cast<double>(k) * dt);
      out.snapshots.push_back(std::move(snap));
    }
    return out;
  }

  // Crank-Nicolson bands: left = I - dt/2 M, right = I + dt/2 M.
  const double half = 0.5 * dt;
  std::vector<double> ll(n - 1), ld(n), lu(n - 1), rl(n - 1), rd(n), ru(n - 1);
  for (std::size_t i = 0; i < n - 1; ++i) {
    ll[i] = -half * m.lower[i];
    lu[i] = -half * m.upper[i];
    rl[i] = half * m.lower[i];
    ru[i] = half * m.upper[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    ld[i] = 1.0 - half * m.diag[i];
    rd[i] = 1.0 + half * m.diag[i];
  }
  // opening backward-Euler half steps: I - dt/2 M applied twice
  const std::vector<double>&bl = ll, &bu = lu;
  const std::vector<double>& bd = ld;

  GridFunction f = f0;
  std::vector<double> rhs(n);
  std::size_t emit = 0;
  const auto maybe_emit = [&](std::size_t k) {
    while (emit < snap_idx.size() && snap_idx[emit] == k) {
      out.times.push_back(static_cast<double>(k) * dt);
      out.snapshots.push_back(f);
      ++emit;
    }
  };

  maybe_emit(0);
  for (std::size_t k = 1; k <= n_steps; ++k) {
    if (k == 1) {
      f.values = solve_tridiagonal(bl, bd, bu, f.values);
      f.values = solve_tridiagonal(bl, bd, bu, f.values);
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        double s = rd[i] * f.values[i];
        if (i > 0) s += rl[i - 1] * f.values[i - 1];
        if (i + 1 < n) s += ru[i] * f.values[i + 1];
        rhs[i] = s;
      }
      f.values = solve_tridiagonal(ll, ld, lu, rhs);
    }
    maybe_emit(k);
  }
  return out;
}

/// Pf = f(a) l* + f(b) k*: the rank-2 long-time limit of the interface
/// semigroup. Idempotent by the endpoint values of k*, l*.
inline GridFunction projection_P(const GridFunction& f, const LimitParams& p) {
  p.validate(false);
  if (std::abs(f.a - p.a) > 1e-12 || std::abs(f.b - p.b) > 1e-12)
    throw ValidationError("projection_P: grid endpoints do not match [a, b]");
  const double va = f.values.front(), vb = f.values.back();
  return GridFunction::sample(f.a, f.b, f.h, [&](double x) {
    return va * l_star(p, x) + vb * k_star(p, x);
  });
}

struct DecayFit {
  double kappa = 0.0;  // fitted decay rate of ||e^{tA} f0 - P f0||
  double K = 0.0;      // fitted prefactor
  double dirichlet_rate = 0.0;  // pi^2 / (2 (b-a)^2) reference
  std::vector<double> times;
  std::vector<double> log_norms;
};

inline DecayFit decay_rate(const GeneratorMatrix& m, const GridFunction& f0,
                           const LimitParams& p,
                           const std::vector<double>& times, double dt = 1e-3) {
  if (times.size() < 2)
    throw ValidationError("decay_rate: need at least two sample times");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw ValidationError("decay_rate: times must increase");
  if (!(times.front() > 0.0))
    throw ValidationError("decay_rate: times must be positive");

  const GridFunction pf = projection_P(f0, p);
  const EvolutionResult ev =
      evolve(m, f0, times.back(), dt, Scheme::crank_nicolson, times);

  DecayFit fit;
  fit.dirichlet_rate =
      9.869604401089358 / (2.0 * (m.b - m.a) * (m.b - m.a));  // pi^2 / ...
  fit.times = times;
  const double floor = 1e-13 * std::max(1.0, sup_norm(f0));
  for (const GridFunction& snap : ev.snapshots) {
    const double d = sup_diff(snap, pf);
    if (d < floor)
      throw NumericalError(
          "decay_rate: degenerate input, f0 is already fixed by the "
          "projection");
    fit.log_norms.push_back(std::log(d));
  }
  for (std::size_t i = 1; i < fit.log_norms.size(); ++i)
    if (!(fit.log_norms[i] < fit.log_norms[i - 1]))
      throw NumericalError("decay_rate: fit rejected, log norms not decreasing");

  // least squares on log d = log K - kappa t
  const auto ns = static_cast<double>(times.size());
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    st += times[i];
    sy += fit.log_norms[i];
    stt += times[i] * times[i];
    sty += times[i] * fit.log_norms[i];
  }
  const double slope = (ns * sty - st * sy) / (ns * stt - st * st);
  const double intercept = (sy - slope * st) / ns;
  fit.kappa = -slope;
  fit.K = std::exp(intercept);
  return fit;
}

/// Evolve by splitting f0 into odd and even parts about 0, running the
/// half-line blocks on [0, b], and reflecting back. Algebraically the same
/// dynamics as a_limit on the symmetric interval: the interface row of
/// a_limit restricted to even data IS the elastic row of g2, and odd data
/// sees a Dirichlet node.
inline GridFunction block_semigroup(const GridFunction& f0, double t, double bb,
                                    double gamma, double dt,
                                    Scheme scheme = Scheme::crank_nicolson) {
  if (std::abs(f0.a + bb) > 1e-12 || std::abs(f0.b - bb) > 1e-12)
    throw ValidationError("block_semigroup: interval must be [-b, b]");
  const std::size_t z = f0.zero_node();
  if (2 * z + 1 != f0.size())
    throw ValidationError("block_semigroup: grid is not symmetric about 0");

  GridFunction q1 = GridFunction::uniform(0.0, bb, f0.h);
  GridFunction q2 = q1;
  for (std::size_t j = 0; j <= z; ++j) {
    q1.values[j] = 0.5 * (f0.values[z + j] - f0.values[z - j]);
    q2.values[j] = 0.5 * (f0.values[z + j] + f0.values[z - j]);
  }

  const GeneratorMatrix g1m =
      discretize(GeneratorKind::g1, 0.0, bb, f0.h, nullptr, gamma);
  const GeneratorMatrix g2m =
      discretize(GeneratorKind::g2, 0.0, bb, f0.h, nullptr, gamma);
  const GridFunction u1 =
      t > 0.0 ? evolve(g1m, q1, t, dt, scheme).snapshots.back() : q1;
  const GridFunction u2 =
      t > 0.0 ? evolve(g2m, q2, t, dt, scheme).snapshots.back() : q2;

  GridFunction out = f0;
  for (std::size_t j = 0; j <= z; ++j) {
    out.values[z + j] = u1.values[j] + u2.values[j];
    out.values[z - j] = -u1.values[j] + u2.values[j];
  }
  return out;
}

struct BlockProfiles {
  GridFunction k1, k2;        // long-time profiles on [0, b]
  GridFunction kstar, lstar;  // harmonic profiles on [-b, b]
  double recon_kstar = 0.0;   // sup |(odd ext k1 + even ext k2)/2 - k*|
  double recon_lstar = 0.0;   // sup |(even ext k2 - odd ext k1)/2 - l*|
  double longtime_k1 = 0.0;   // sup |e^{tG1} f - f(b) k1| at the probe time
  double longtime_k2 = 0.0;
};

/// The half-line blocks relax onto k1 = x/b and k2 = (1+gamma x)/(1+gamma b),
/// which recombine into the harmonic pair on the full interval.
inline BlockProfiles longtime_blocks(double bb, double gamma, double h,
                                     double t_probe = 8.0, double dt = 1e-2) {
  if (!(bb > 0.0)) throw ValidationError("longtime_blocks: need b > 0");
  LimitParams p{-bb, bb, gamma, 1.0};

  BlockProfiles out;
  out.k1 = GridFunction::sample(0.0, bb, h,
                                [&](double x) { return k1_block(bb, x); });
  out.k2 = GridFunction::sample(
      0.0, bb, h, [&](double x) { return k2_block(bb, gamma, x); });
  out.kstar = k_star_grid(p, h);
  out.lstar = l_star_grid(p, h);

  const std::size_t z = out.kstar.zero_node();
  for (std::size_t j = 0; j <= z; ++j) {
    const double mean = 0.5 * (out.k1.values[j] + out.k2.values[j]);
    const double halfdiff = 0.5 * (out.k2.values[j] - out.k1.values[j]);
    out.recon_kstar = std::max(
        {out.recon_kstar, std::abs(mean - out.kstar.values[z + j]),
         std::abs(halfdiff - out.kstar.values[z - j])});
    out.recon_lstar = std::max(
        {out.recon_lstar, std::abs(halfdiff - out.lstar.values[z + j]),
         std::abs(mean - out.lstar.values[z - j])});
  }

  const GeneratorMatrix g1m =
      discretize(GeneratorKind::g1, 0.0, bb, h, nullptr, gamma);
  const GeneratorMatrix g2m =
      discretize(GeneratorKind::g2, 0.0, bb, h, nullptr, gamma);
  // probes with value 1 at b; the g1 probe vanishes at 0
  const GridFunction f1 = GridFunction::sample(
      0.0, bb, h, [&](double x) { return (x / bb) * (x / bb); });
  const GridFunction f2 = GridFunction::uniform(0.0, bb, h, 1.0);
  const GridFunction u1 =
      evolve(g1m, f1, t_probe, dt, Scheme::crank_nicolson).snapshots.back();
  const GridFunction u2 =
      evolve(g2m, f2, t_probe, dt, Scheme::crank_nicolson).snapshots.back();
  out.longtime_k1 = sup_diff(u1, out.k1);
  out.longtime_k2 = sup_diff(u2, out.k2);
  return out;
}

}  // namespace loctime
