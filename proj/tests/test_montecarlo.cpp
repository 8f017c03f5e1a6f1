#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <vector>

#include "loctime/closedform.hpp"
#include "loctime/montecarlo.hpp"

using namespace loctime;

namespace {

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// two-sided KS distance of a sample against a cdf
template <class Cdf>
double ks_against(std::vector<double> xs, Cdf&& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

}  // namespace

TEST_CASE("per-path streams are reproducible and independent", "[mc][rng]") {
  Xoshiro256 g1 = path_stream(42, 7);
  Xoshiro256 g2 = path_stream(42, 7);
  Xoshiro256 g3 = path_stream(42, 8);
  bool equal = true, distinct = false;
  for (int i = 0; i < 64; ++i) {
    const auto a = g1(), b = g2(), c = g3();
    equal = equal && a == b;
    distinct = distinct || a != c;
  }
  REQUIRE(equal);
  REQUIRE(distinct);

  // unit doubles stay strictly inside (0, 1) and fill it evenly
  Xoshiro256 g = path_stream(1, 0);
  double lo = 1.0, hi = 0.0, mean = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = u01(g());
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    mean += u;
  }
  mean /= n;
  REQUIRE(lo > 0.0);
  REQUIRE(hi < 1.0);
  REQUIRE(std::abs(mean - 0.5) < 5.0 / std::sqrt(12.0 * n));
}

TEST_CASE("normal sampler matches the Gaussian law", "[mc][rng]") {
  Xoshiro256 g = path_stream(2026, 0);
  const std::size_t n = 2'000'000;
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  std::size_t far = 0;
  double biggest = 0.0;
  std::vector<double> head;
  head.reserve(200000);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = normal(g);
    s1 += z;
    s2 += z * z;
    s3 += z * z * z;
    s4 += z * z * z * z;
    far += std::abs(z) > 3.5 ? 1 : 0;
    biggest = std::max(biggest, std::abs(z));
    if (head.size() < 200000) head.push_back(z);
  }
  const double nd = static_cast<double>(n);
  // 5 sigma bands around the exact moments
  REQUIRE(std::abs(s1 / nd) < 5.0 / std::sqrt(nd));
  REQUIRE(std::abs(s2 / nd - 1.0) < 5.0 * std::sqrt(2.0 / nd));
  REQUIRE(std::abs(s3 / nd) < 5.0 * std::sqrt(15.0 / nd));
  REQUIRE(std::abs(s4 / nd - 3.0) < 5.0 * std::sqrt(96.0 / nd));
  // P(|Z| > 3.5) = 4.65e-4; the ziggurat tail branch must feed both lobes
  REQUIRE(far > 780);
  REQUIRE(far < 1090);
  REQUIRE(biggest > 4.0);
  REQUIRE(ks_against(head, phi_cdf) < 0.005);
}

TEST_CASE("simulation configuration is validated", "[mc]") {
  SimConfig good;
  good.n_paths = 4;
  REQUIRE_NOTHROW(simulate(good));

  SimConfig c = good;
  c.dt = 5e-3;  // above 1e-3 (b-a)^2 = 4e-3
  REQUIRE_THROWS_AS(simulate(c), ValidationError);
  c = good;
  c.x0 = 1.5;
  REQUIRE_THROWS_AS(simulate(c), ValidationError);
  c = good;
  c.a = 0.2;  // interval must contain 0
  c.x0 = 0.5;
  REQUIRE_THROWS_AS(simulate(c), ValidationError);
  c = good;
  c.n_paths = 0;
  REQUIRE_THROWS_AS(simulate(c), ValidationError);
  c = good;
  c.mechanism = Mechanism::intensity;  // needs a kernel
  REQUIRE_THROWS_AS(simulate(c), ValidationError);
  c = good;
  c.gamma = -1.0;
  REQUIRE_THROWS_AS(simulate(c), ValidationError);
  c = good;
  c.delta = 2.0 * std::sqrt(good.dt);  // below the 5 sqrt(dt) floor
  REQUIRE_THROWS_AS(simulate(c), ValidationError);
  c = good;
  c.dt = 1e-3;  // window 5 sqrt(dt) = 0.158, doubled it reaches past b = 0.3
  c.b = 0.3;
  c.x0 = 0.1;
  REQUIRE_THROWS_AS(simulate(c), ValidationError);

  c = good;
  c.delta = 0.125;
  c.dt = 1e-4;
  REQUIRE(c.window() == 0.125);
  c.delta = 0.0;
  REQUIRE(c.window() == 5.0 * std::sqrt(c.dt));
}

TEST_CASE("paths started on the boundary stop at once", "[mc]") {
  SimConfig cfg;
  cfg.n_paths = 3;
  cfg.gamma = 1.0;
  cfg.x0 = cfg.a;
  for (const auto& o : simulate(cfg)) {
    REQUIRE(o.status == PathStatus::stopped_at_a);
    REQUIRE(o.exit_time == 0.0);
    REQUIRE(o.local_time == 0.0);
    REQUIRE(o.weight == 1.0);
  }
  cfg.x0 = cfg.b;
  for (const auto& o : simulate(cfg))
    REQUIRE(o.status == PathStatus::stopped_at_b);
}

TEST_CASE("exit statistics reproduce the gambler's ruin", "[mc]") {
  SimConfig cfg;
  cfg.x0 = 0.5;
  cfg.dt = 1e-4;
  cfg.n_paths = 20000;
  cfg.seed = 3;
  cfg.gamma = 0.0;
  const auto outs = simulate(cfg);
  double at_b = 0.0, tau = 0.0;
  for (const auto& o : outs) {
    REQUIRE(o.status != PathStatus::killed);  // nothing kills at gamma = 0
    REQUIRE(o.weight == 1.0);
    REQUIRE(o.exit_time > 0.0);
    REQUIRE(o.local_time >= 0.0);
    at_b += o.status == PathStatus::stopped_at_b ? 1.0 : 0.0;
    tau += o.exit_time;
  }
  const double n = static_cast<double>(outs.size());
  const double p = at_b / n;
  const double se = std::sqrt(0.75 * 0.25 / n);
  REQUIRE(std::abs(p - 0.75) <= 3.0 * se);
  // E tau = (x0 - a)(b - x0) = 0.75
  REQUIRE(std::abs(tau / n - 0.75) <= 0.05);
}

TEST_CASE("killed fraction matches the interface survival", "[mc]") {
  SimConfig cfg;
  cfg.x0 = 0.0;
  cfg.dt = 1e-4;
  cfg.n_paths = 40000;
  cfg.seed = 11;
  cfg.gamma = 1.0;
  const auto outs = simulate(cfg);
  double killed = 0.0;
  for (const auto& o : outs) killed += o.status == PathStatus::killed ? 1 : 0;
  const double n = static_cast<double>(outs.size());
  const double se = std::sqrt(0.25 / n);
  LimitParams p;
  REQUIRE(survival_expectation(p, 0.0) == 0.5);
  REQUIRE(std::abs(killed / n - 0.5) <= 3.0 * se);
}

TEST_CASE("occupation estimator counts the window visits", "[mc]") {
  const double dt = 1e-4;  // floor 5 sqrt(dt) = 0.05
  const std::vector<double> path = {0.0,  0.01,  -0.02, 0.06,
                                    0.049, -0.049, 1.0};
  // four of the six post-start samples land inside (-0.05, 0.05)
  REQUIRE(local_time_estimate(path, dt, 0.05) == dt * 4.0 / 0.1);
  // the starting point itself carries no time
  REQUIRE(local_time_estimate({0.0, 2.0, 2.0}, dt, 0.05) == 0.0);

  REQUIRE_THROWS_AS(local_time_estimate({}, dt, 0.05), ValidationError);
  REQUIRE_THROWS_AS(local_time_estimate(path, dt, 0.04), ValidationError);
  REQUIRE_THROWS_AS(local_time_estimate(path, 0.0, 0.05), ValidationError);
  REQUIRE_THROWS_WITH(local_time_estimate(path, dt, 0.01),
                      Catch::Matchers::ContainsSubstring("5 sqrt(dt)"));
}

TEST_CASE("exit local time follows the exponential law", "[mc][law]") {
  const std::size_t n = 5000;
  const auto rep = exit_local_time_law(-1.0, 1.0, n, 20260819, 1e-5);
  REQUIRE(rep.samples.size() == n);
  REQUIRE(rep.n_paths == n);
  REQUIRE(exp_law_mean(-1.0, 1.0) == 1.0);
  REQUIRE(rep.ci99_lo <= 1.0);
  REQUIRE(1.0 <= rep.ci99_hi);
  REQUIRE(rep.ks_stat <= 0.035);
  // the distance has power: against a mean-2 exponential it is ~0.25
  REQUIRE(ks_exponential(rep.samples, 2.0) > 0.15);
  // window-corrected samples may only dip trivially below zero
  for (double s : rep.samples) REQUIRE(s > -0.05);
}

TEST_CASE("distance statistic is calibrated on synthetic draws", "[mc][law]") {
  Xoshiro256 g = path_stream(99, 5);
  const std::size_t n = 100000;
  const double mean = 0.7;
  std::vector<double> xs(n);
  for (auto& x : xs) x = -mean * std::log(u01(g()));
  // 99% null quantile of the two-sided distance
  REQUIRE(ks_exponential(xs, mean) <= 1.63 / std::sqrt(static_cast<double>(n)));
  REQUIRE_THROWS_AS(ks_exponential(xs, 0.0), ValidationError);
  REQUIRE_THROWS_AS(ks_exponential({}, 1.0), ValidationError);
}

TEST_CASE("weighted exits reproduce the interface formulas", "[mc][survival]") {
  LimitParams p;
  p.gamma = 1.0;
  SimConfig cfg;
  cfg.dt = 1e-5;
  cfg.n_paths = 5000;
  cfg.seed = 5150;
  for (double x : {0.0, 0.5}) {
    const auto est = estimate_survival(x, p, cfg);
    REQUIRE(est.n_paths == cfg.n_paths);
    REQUIRE(std::abs(est.value - survival_expectation(p, x)) <= 3.0 * est.se);
    REQUIRE(std::abs(est.at_a - l_star(p, x)) <= 3.0 * est.at_a_se);
    REQUIRE(std::abs(est.at_b - k_star(p, x)) <= 3.0 * est.at_b_se);
    // each path lands in exactly one of the two splits
    REQUIRE(est.value == Catch::Approx(est.at_a + est.at_b).margin(1e-12));
  }
}

TEST_CASE("weighted and killed routes estimate the same number", "[mc][survival]") {
  LimitParams p;
  p.gamma = 1.0;
  SimConfig cfg;
  cfg.dt = 1e-4;
  cfg.n_paths = 20000;
  cfg.seed = 808;
  const auto est = estimate_survival(0.0, p, cfg);

  cfg.x0 = 0.0;
  cfg.gamma = 1.0;
  const auto outs = simulate(cfg);
  double alive = 0.0;
  for (const auto& o : outs) alive += o.status != PathStatus::killed ? 1 : 0;
  const double n = static_cast<double>(outs.size());
  const double pk = alive / n;
  const double se_k = std::sqrt(pk * (1.0 - pk) / n);
  REQUIRE(std::abs(est.value - pk) <=
          3.0 * std::sqrt(est.se * est.se + se_k * se_k));
}

TEST_CASE("shrinking the window walks the bias away", "[mc][law]") {
  const std::size_t n = 10000;
  const auto levels = refinement_study(-1.0, 1.0, n, 99, 2.56e-3, 3);
  REQUIRE(levels.size() == 3);
  for (std::size_t j = 0; j < levels.size(); ++j) {
    REQUIRE(levels[j].dt == Catch::Approx(2.56e-3 / std::pow(4.0, j)));
    REQUIRE(levels[j].delta ==
            Catch::Approx(5.0 * std::sqrt(levels[j].dt)));
    // plain window estimator sits near 1 - delta/2, below the true mean
    REQUIRE(std::abs(levels[j].mean - (1.0 - 0.5 * levels[j].delta)) <=
            5.0 * levels[j].se);
  }
  REQUIRE(levels[0].mean < levels[1].mean);
  REQUIRE(levels[1].mean < levels[2].mean);
  REQUIRE(levels[2].mean < 1.0);
}

TEST_CASE("mechanisms agree with their evolutions", "[mc][mech]") {
  LimitParams p;
  p.gamma = 1.0;
  const auto box = KillingKernel::box(1.0, 0.5);  // unit mass
  SimConfig proto;
  proto.dt = 1e-4;
  proto.n_paths = 4000;
  proto.seed = 314;
  const auto rows = compare_mechanisms(0.0, 0.5, p, box, {0.2, 0.1}, proto);
  REQUIRE(rows.size() == 3);
  REQUIRE(rows[0].eps == 0.2);
  REQUIRE(rows[1].eps == 0.1);
  REQUIRE(rows[2].eps == 0.0);
  for (const auto& r : rows) {
    // 3 SE plus the O(sqrt(dt)) weighting bias and the O(h) interface error
    REQUIRE(std::abs(r.mc - r.pde) <= 3.0 * r.mc_se + 6e-3);
    REQUIRE(r.mc > 0.0);
    REQUIRE(r.mc < 1.0);
  }
  // the scaled rows shrink toward the interface row as eps drops
  REQUIRE(rows[0].pde > rows[1].pde);
  REQUIRE(rows[1].pde > rows[2].pde);

  REQUIRE_THROWS_AS(
      compare_mechanisms(0.12345, 0.5, p, box, {0.2}, proto),
      ValidationError);
  REQUIRE_THROWS_AS(compare_mechanisms(0.0, 0.0, p, box, {0.2}, proto),
                    ValidationError);
}

TEST_CASE("worker count never changes the outcomes", "[mc][determinism]") {
  SimConfig cfg;
  cfg.x0 = 0.25;
  cfg.dt = 1e-4;
  cfg.n_paths = 6000;
  cfg.seed = 77;
  cfg.gamma = 1.0;
  const auto o1 = simulate(cfg, 1);
  const auto o3 = simulate(cfg, 3);
  const auto o8 = simulate(cfg, 8);
  REQUIRE(o1.size() == o8.size());
  REQUIRE(o1.size() == o3.size());
  for (std::size_t i = 0; i < o1.size(); ++i) {
    for (const auto* o : {&o3[i], &o8[i]}) {
      REQUIRE(o->status == o1[i].status);
      REQUIRE(o->exit_time == o1[i].exit_time);
      REQUIRE(o->local_time == o1[i].local_time);
      REQUIRE(o->local_time_wide == o1[i].local_time_wide);
      REQUIRE(o->weight == o1[i].weight);
    }
  }
  // reduced statistics are bit-identical, not merely close
  std::vector<double> w1(o1.size()), w8(o8.size());
  for (std::size_t i = 0; i < o1.size(); ++i) {
    w1[i] = o1[i].weight;
    w8[i] = o8[i].weight;
  }
  const auto s1 = summarize(w1), s8 = summarize(w8);
  REQUIRE(s1.mean == s8.mean);
  REQUIRE(s1.se == s8.se);

  REQUIRE(effective_workers(8) == 8);
  REQUIRE(effective_workers(0) == 1);
  setenv("LAB_DETERMINISTIC", "1", 1);
  REQUIRE(effective_workers(8) == 1);
  unsetenv("LAB_DETERMINISTIC");
  REQUIRE(effective_workers(8) == 8);
}

TEST_CASE("bridge correction shortens the discrete exits", "[mc]") {
  SimConfig cfg;
  cfg.x0 = 0.5;
  cfg.dt = 2e-3;
  cfg.n_paths = 5000;
  cfg.seed = 17;
  cfg.gamma = 0.0;
  const auto with = simulate(cfg);
  cfg.bridge_correction = false;
  const auto without = simulate(cfg);
  double t_with = 0.0, t_without = 0.0;
  for (const auto& o : with) t_with += o.exit_time;
  for (const auto& o : without) t_without += o.exit_time;
  // missed boundary grazes keep uncorrected paths alive longer
  REQUIRE(t_without > t_with * 1.02);
}
