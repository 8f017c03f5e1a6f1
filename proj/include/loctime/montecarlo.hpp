#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "loctime/closedform.hpp"
#include "loctime/evolution.hpp"
#include "loctime/kernel.hpp"
#include "loctime/rng.hpp"
#include "loctime/stats.hpp"

namespace loctime {

/// intensity: kill at rate c_eps(w) along the path; local_time: kill when
/// gamma times the running occupation estimate crosses the clock.
enum class Mechanism { intensity, local_time };

/// alive_at_horizon only appears in fixed-horizon runs (compare_mechanisms);
/// simulate() itself always runs paths to an exit or a kill.
enum class PathStatus { stopped_at_a, stopped_at_b, killed, alive_at_horizon };

struct SimConfig {
  double x0 = 0.0, a = -1.0, b = 1.0;
  double dt = 1e-5;
  Mechanism mechanism = Mechanism::local_time;
  const ScaledKernel* kernel = nullptr;  // intensity mechanism only
  double gamma = 0.0;                    // local_time mechanism only
  std::size_t n_paths = 1;
  std::uint64_t seed = 1;
  bool bridge_correction = true;
  double delta = 0.0;  // occupation window; 0 picks the default 5 sqrt(dt)

  double window() const { return delta > 0.0 ? delta : 5.0 * std::sqrt(dt); }

  void validate() const {
    if (!(b > a)) throw ValidationError("SimConfig: need a < b");
    if (!(a < 0.0 && 0.0 < b))
      throw ValidationError("SimConfig: interval must contain 0");
    if (!(x0 >= a && x0 <= b))
      throw ValidationError("SimConfig: x0 outside [a, b]");
    if (!(dt > 0.0)) throw ValidationError("SimConfig: dt must be > 0");
    if (dt > 1e-3 * (b - a) * (b - a) * (1.0 + 1e-12))
      throw ValidationError("SimConfig: dt must be <= 1e-3 (b-a)^2, got " +
                            detail::fmt_g(dt));
    if (n_paths < 1) throw ValidationError("SimConfig: n_paths must be >= 1");
    if (mechanism == Mechanism::intensity && kernel == nullptr)
      throw ValidationError("SimConfig: intensity mechanism needs a kernel");
    if (gamma < 0.0) throw ValidationError("SimConfig: gamma must be >= 0");
    const double w = window();
    if (w < 5.0 * std::sqrt(dt) * (1.0 - 1e-12))
      throw ValidationError(
          "SimConfig: window delta must be >= 5 sqrt(dt) = " +
          detail::fmt_g(5.0 * std::sqrt(dt)) +
          ", the occupation estimator is biased below that");
    if (2.0 * w >= std::min(-a, b))
      throw ValidationError(
          "SimConfig: occupation window reaches a boundary, shrink dt");
  }
};

/// One simulated path. local_time is the occupation estimate
/// (1/2delta) sum dt 1[|w| < delta] at termination; local_time_wide is the
/// same sum with window 2delta, kept so estimators can cancel the O(delta)
/// window bias pairwise. weight = exp(-accumulated hazard) at termination.
struct PathOutcome {
  PathStatus status = PathStatus::stopped_at_a;
  double exit_time = 0.0;
  double local_time = 0.0;
  double local_time_wide = 0.0;
  double weight = 1.0;
};

/// Single-worker override used by every threaded entry point.
inline unsigned effective_workers(unsigned requested) {
  if (const char* e = std::getenv("LAB_DETERMINISTIC"))
    if (std::string_view(e) == "1") return 1;
  return requested == 0 ? 1 : requested;
}

namespace detail {

/// Advance one path. Exit checks run before the step's occupation and
/// hazard bookkeeping, so a step that leaves (a, b) contributes neither.
/// t_max = 0 means no horizon; use_clock = false disables killing so the
/// estimators can weight complete excursions instead.
template <bool kIntensity>
PathOutcome run_path(const SimConfig& cfg, std::uint64_t index, double t_max,
                     bool use_clock) {
  Xoshiro256 g = path_stream(cfg.seed, index);
  const double a = cfg.a, b = cfg.b, dt = cfg.dt;
  const double sdt = std::sqrt(dt);
  const double del = cfg.window(), del2 = 2.0 * del;

  PathOutcome out;
  double w = cfg.x0;
  if (w <= a) return out;  // stopped_at_a, tau = 0
  if (w >= b) {
    out.status = PathStatus::stopped_at_b;
    return out;
  }

  const double clock =
      use_clock ? -std::log(u01(g())) : std::numeric_limits<double>::infinity();
  // local-time killing compares raw occupation time against a precomputed
  // threshold instead of rescaling every step
  const double occ_kill = (!kIntensity && cfg.gamma > 0.0)
                              ? clock * del2 / cfg.gamma
                              : std::numeric_limits<double>::infinity();
  const double bridge_reach = 18.0 * dt;  // crossing prob < 3e-16 beyond
  const std::uint64_t max_steps =
      t_max > 0.0 ? static_cast<std::uint64_t>(std::llround(t_max / dt))
                  : std::numeric_limits<std::uint64_t>::max();

  double occ = 0.0, occ_wide = 0.0, hazard = 0.0;
  std::uint64_t k = 0;
  PathStatus status = PathStatus::alive_at_horizon;
  while (k < max_steps) {
    ++k;
    const double w2 = w + sdt * normal(g);
    if (w2 <= a) {
      status = PathStatus::stopped_at_a;
      break;
    }
    if (w2 >= b) {
      status = PathStatus::stopped_at_b;
      break;
    }
    if (cfg.bridge_correction) {
      const double qa = (w - a) * (w2 - a);
      if (qa < bridge_reach && u01(g()) < std::exp(-2.0 * qa / dt)) {
        status = PathStatus::stopped_at_a;
        break;
      }
      const double qb = (b - w) * (b - w2);
      if (qb < bridge_reach && u01(g()) < std::exp(-2.0 * qb / dt)) {
        status = PathStatus::stopped_at_b;
        break;
      }
    }
    const double aw = std::abs(w2);
    if (aw < del2) {
      occ_wide += dt;
      if (aw < del) occ += dt;
    }
    if constexpr (kIntensity) {
      hazard += 0.5 * dt * ((*cfg.kernel)(w) + (*cfg.kernel)(w2));
      if (hazard > clock) {
        status = PathStatus::killed;
        break;
      }
    } else {
      if (occ > occ_kill) {
        status = PathStatus::killed;
        break;
      }
    }
    w = w2;
  }

  out.status = status;
  out.exit_time = static_cast<double>(k) * dt;
  out.local_time = occ / (2.0 * del);
  out.local_time_wide = occ_wide / (2.0 * del2);
  if constexpr (kIntensity)
    out.weight = std::exp(-hazard);
  else
    out.weight = std::exp(-cfg.gamma * out.local_time);
  return out;
}

inline PathOutcome run_one(const SimConfig& cfg, std::uint64_t index,
                           double t_max, bool use_clock) {
  return cfg.mechanism == Mechanism::intensity
             ? run_path<true>(cfg, index, t_max, use_clock)
             : run_path<false>(cfg, index, t_max, use_clock);
}

/// Paths are handed out in fixed 4096-index chunks; outcome i never depends
/// on the worker that computed it, so any worker count produces the same
/// vector.
inline std::vector<PathOutcome> simulate_paths(const SimConfig& cfg,
                                               double t_max, bool use_clock,
                                               unsigned workers) {
  cfg.validate();
  std::vector<PathOutcome> out(cfg.n_paths);
  const unsigned t = effective_workers(workers);
  if (t <= 1 || out.size() < 2) {
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = run_one(cfg, i, t_max, use_clock);
    return out;
  }
  std::atomic<std::size_t> next{0};
  constexpr std::size_t kChunk = 4096;
  const auto worker = [&] {
    for (;;) {
      const std::size_t lo = next.fetch_add(1) * kChunk;
      if (lo >= out.size()) return;
      const std::size_t hi = std::min(out.size(), lo + kChunk);
      for (std::size_t i = lo; i < hi; ++i)
        out[i] = run_one(cfg, i, t_max, use_clock);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(t - 1);
  for (unsigned i = 0; i + 1 < t; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return out;
}

/// Window-bias-cancelled occupation estimate of one finished path.
inline double richardson_local_time(const PathOutcome& o) {
  return 2.0 * o.local_time - o.local_time_wide;
}

}  // namespace detail

/// Simulate the killed/stopped paths of the configured mechanism.
/// Deterministic in (seed, path index) for any worker count.
inline std::vector<PathOutcome> simulate(const SimConfig& cfg,
                                         unsigned workers = 1) {
  return detail::simulate_paths(cfg, 0.0, /*use_clock=*/true, workers);
}

/// Occupation-density estimate (1/2delta) sum dt 1[|w_i| < delta] over the
/// samples w_1.. of a discrete path (the starting point carries no time).
inline double local_time_estimate(const std::vector<double>& path, double dt,
                                  double delta) {
  if (path.empty()) throw ValidationError("local_time_estimate: empty path");
  if (!(dt > 0.0)) throw ValidationError("local_time_estimate: dt must be > 0");
  if (delta < 5.0 * std::sqrt(dt) * (1.0 - 1e-12))
    throw ValidationError(
        "local_time_estimate: window delta must be >= 5 sqrt(dt) = " +
        detail::fmt_g(5.0 * std::sqrt(dt)) +
        ", below that the occupation estimator is bias-dominated");
  std::size_t hits = 0;
  for (std::size_t i = 1; i < path.size(); ++i)
    hits += std::abs(path[i]) < delta ? 1 : 0;
  return dt * static_cast<double>(hits) / (2.0 * delta);
}

struct SurvivalEstimate {
  double value = 0.0, se = 0.0;      // E_x exp(-gamma L0(tau))
  double at_a = 0.0, at_a_se = 0.0;  // capture-at-a share, estimates l*(x)
  double at_b = 0.0, at_b_se = 0.0;  // capture-at-b share, estimates k*(x)
  std::size_t n_paths = 0;
};

/// Weighted estimator of E_x f(w(tau)) e^{-gamma L0(tau)}: paths run to the
/// exit and carry the weight exp(-gamma Lhat); the two splits take f = 1_a
/// and f = 1_b. The weights use the bias-cancelled window pair.
inline SurvivalEstimate estimate_survival(double x, const LimitParams& p,
                                          SimConfig cfg,
                                          unsigned workers = 1) {
  p.validate(false);
  cfg.x0 = x;
  cfg.a = p.a;
  cfg.b = p.b;
  cfg.gamma = p.gamma;
  cfg.mechanism = Mechanism::local_time;
  cfg.kernel = nullptr;
  const auto outs =
      detail::simulate_paths(cfg, 0.0, /*use_clock=*/false, workers);
  std::vector<double> all(outs.size()), at_a(outs.size()), at_b(outs.size());
  for (std::size_t i = 0; i < outs.size(); ++i) {
    const double wgt =
        std::exp(-p.gamma * detail::richardson_local_time(outs[i]));
    all[i] = wgt;
    at_a[i] = outs[i].status == PathStatus::stopped_at_a ? wgt : 0.0;
    at_b[i] = outs[i].status == PathStatus::stopped_at_b ? wgt : 0.0;
  }
  const auto sa = summarize(all), saa = summarize(at_a), sab = summarize(at_b);
  SurvivalEstimate out;
  out.value = sa.mean;
  out.se = sa.se;
  out.at_a = saa.mean;
  out.at_a_se = saa.se;
  out.at_b = sab.mean;
  out.at_b_se = sab.se;
  out.n_paths = outs.size();
  return out;
}

struct LawReport {
  std::vector<double> samples;  // bias-cancelled Lhat0(tau), path order
  double ks_stat = 0.0;         // against Exp(exp_law_mean(a, b))
  double mean = 0.0, se = 0.0;
  double ci99_lo = 0.0, ci99_hi = 0.0;
  std::size_t n_paths = 0;
};

/// Law of L0(tau) started at 0 without killing: sample mean with a 99% CI
/// and the KS distance from the exponential law with the harmonic mean.
inline LawReport exit_local_time_law(double a, double b, std::size_t n_paths,
                                     std::uint64_t seed, double dt = 1e-5,
                                     unsigned workers = 1) {
  SimConfig cfg;
  cfg.x0 = 0.0;
  cfg.a = a;
  cfg.b = b;
  cfg.dt = dt;
  cfg.mechanism = Mechanism::local_time;
  cfg.gamma = 0.0;
  cfg.n_paths = n_paths;
  cfg.seed = seed;
  const auto outs =
      detail::simulate_paths(cfg, 0.0, /*use_clock=*/false, workers);
  LawReport out;
  out.samples.resize(outs.size());
  for (std::size_t i = 0; i < outs.size(); ++i)
    out.samples[i] = detail::richardson_local_time(outs[i]);
  const auto st = summarize(out.samples);
  out.mean = st.mean;
  out.se = st.se;
  out.ci99_lo = st.ci99_lo;
  out.ci99_hi = st.ci99_hi;
  out.ks_stat = ks_exponential(out.samples, exp_law_mean(a, b));
  out.n_paths = outs.size();
  return out;
}

struct MechanismRow {
  std::string label;
  double eps = 0.0;  // 0 for the local-time row
  double mc = 0.0, mc_se = 0.0;
  double pde = 0.0;
};

/// E_x f(w(t and tau)) with f == 1 under each killing mechanism, next to the
/// matching discretized-generator evolution read off at x.
inline std::vector<MechanismRow> compare_mechanisms(
    double x, double t, const LimitParams& p, const KillingKernel& base,
    const std::vector<double>& eps_list, SimConfig proto, unsigned workers = 1,
    double h = 1e-3, double dt_pde = 1e-3) {
  p.validate(false);
  if (!(t > 0.0))
    throw ValidationError("compare_mechanisms: t must be > 0");
  const auto node = static_cast<std::size_t>(std::llround((x - p.a) / h));
  if (std::abs(p.a + static_cast<double>(node) * h - x) > 1e-9)
    throw ValidationError("compare_mechanisms: x must sit on the PDE grid");

  const auto weighted_mean = [&](const SimConfig& cfg, bool intensity) {
    const auto outs =
        detail::simulate_paths(cfg, t, /*use_clock=*/false, workers);
    std::vector<double> wts(outs.size());
    for (std::size_t i = 0; i < outs.size(); ++i)
      wts[i] = intensity ? outs[i].weight
                         : std::exp(-p.gamma *
                                    detail::richardson_local_time(outs[i]));
    return summarize(wts);
  };
  const auto one = GridFunction::uniform(p.a, p.b, h, 1.0);

  std::vector<MechanismRow> rows;
  for (double eps : eps_list) {
    const ScaledKernel ck{base, eps};
    SimConfig cfg = proto;
    cfg.x0 = x;
    cfg.a = p.a;
    cfg.b = p.b;
    cfg.mechanism = Mechanism::intensity;
    cfg.kernel = &ck;
    cfg.gamma = 0.0;
    MechanismRow row;
    row.label = "intensity eps=" + detail::fmt_g(eps);
    row.eps = eps;
    const auto st = weighted_mean(cfg, true);
    row.mc = st.mean;
    row.mc_se = st.se;
    const auto m = discretize(GeneratorKind::a_eps, p.a, p.b, h, &ck);
    row.pde =
        evolve(m, one, t, dt_pde, Scheme::crank_nicolson).snapshots[0].values[node];
    rows.push_back(std::move(row));
  }

  SimConfig cfg = proto;
  cfg.x0 = x;
  cfg.a = p.a;
  cfg.b = p.b;
  cfg.mechanism = Mechanism::local_time;
  cfg.kernel = nullptr;
  cfg.gamma = p.gamma;
  MechanismRow row;
  row.label = "local-time";
  const auto st = weighted_mean(cfg, false);
  row.mc = st.mean;
  row.mc_se = st.se;
  const auto m =
      discretize(GeneratorKind::a_limit, p.a, p.b, h, nullptr, p.gamma);
  row.pde =
      evolve(m, one, t, dt_pde, Scheme::crank_nicolson).snapshots[0].values[node];
  rows.push_back(std::move(row));
  return rows;
}

struct RefinementLevel {
  double dt = 0.0, delta = 0.0;
  double mean = 0.0, se = 0.0;
};

/// Plain-window estimator bias study: each level halves the window (and
/// quarters dt, keeping delta = 5 sqrt(dt)), so the mean of Lhat0(tau) must
/// climb monotonically toward exp_law_mean(a, b).
inline std::vector<RefinementLevel> refinement_study(double a, double b,
                                                     std::size_t n_paths,
                                                     std::uint64_t seed,
                                                     double dt0, int levels = 3,
                                                     unsigned workers = 1) {
  if (levels < 1) throw ValidationError("refinement_study: need levels >= 1");
  std::vector<RefinementLevel> out;
  double dt = dt0;
  for (int j = 0; j < levels; ++j, dt /= 4.0) {
    SimConfig cfg;
    cfg.x0 = 0.0;
    cfg.a = a;
    cfg.b = b;
    cfg.dt = dt;
    cfg.mechanism = Mechanism::local_time;
    cfg.gamma = 0.0;
    cfg.n_paths = n_paths;
    cfg.seed = seed;
    const auto outs =
        detail::simulate_paths(cfg, 0.0, /*use_clock=*/false, workers);
    std::vector<double> lts(outs.size());
    for (std::size_t i = 0; i < outs.size(); ++i)
      lts[i] = outs[i].local_time;
    const auto st = summarize(lts);
    out.push_back({cfg.dt, cfg.window(), st.mean, st.se});
  }
  return out;
}

}  // namespace loctime
