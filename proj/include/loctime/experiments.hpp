#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "loctime/closedform.hpp"
#include "loctime/evolution.hpp"
#include "loctime/kernel.hpp"
#include "loctime/montecarlo.hpp"
#include "loctime/picard.hpp"
#include "loctime/resolvent.hpp"

namespace loctime {

/// Compact one-token kernel spec "shape:p1:p2" for configs and CLI flags,
/// e.g. "box:0.5:1" (height 0.5, half-width 1) or "gaussian:1:0.1".
inline KillingKernel parse_kernel(const std::string& spec) {
  std::string shape = spec;
  double p1 = 1.0, p2 = 1.0;
  int given = 0;
  if (const auto c1 = spec.find(':'); c1 != std::string::npos) {
    shape = spec.substr(0, c1);
    std::string rest = spec.substr(c1 + 1);
    const auto c2 = rest.find(':');
    try {
      if (c2 == std::string::npos) {
        p1 = std::stod(rest);
        given = 1;
      } else {
        p1 = std::stod(rest.substr(0, c2));
        p2 = std::stod(rest.substr(c2 + 1));
        given = 2;
      }
    } catch (const std::exception&) {
      throw ValidationError("kernel spec '" + spec +
                            "': parameters must be numbers");
    }
  }
  (void)given;
  if (shape == "box") return KillingKernel::box(p1, p2);
  if (shape == "triangle") return KillingKernel::triangle(p1, p2);
  if (shape == "gaussian") return KillingKernel::gaussian(p1, p2);
  if (shape == "zero") return KillingKernel::zero();
  throw ValidationError("kernel spec '" + spec +
                        "': unknown shape (box, triangle, gaussian, zero)");
}

/// Everything one experiment needs, loaded from a JSON file. Serialization
/// is lossless: every field is written back out with full precision.
struct ExperimentConfig {
  std::string experiment = "convergence";
  double a = -1.0, b = 1.0;
  std::string kernel = "box:0.5:1";
  double gamma = 1.0;
  std::vector<double> lambdas = {1.0};
  std::vector<double> epsilons = {0.2, 0.1, 0.05};
  double h = 1e-3;
  double t_end = 1.0;
  double dt = 1e-3;
  std::vector<double> times;  // decay fit probes; empty picks a default
  std::size_t paths = 20000;
  double mc_dt = 1e-4;
  double mc_delta = 0.0;  // 0 keeps the 5 sqrt(dt) default
  bool bridge = true;
  std::string out_dir = "out";
  std::uint64_t seed = 1;

  void validate() const {
    static const std::vector<std::string> known = {
        "convergence", "lambda-limit", "decay",
        "survival",    "law",          "mechanisms"};
    bool ok = false;
    for (const auto& k : known) ok = ok || k == experiment;
    if (!ok)
      throw ValidationError("experiment: unknown name '" + experiment + "'");
    if (!(b > 0.0))
      throw ValidationError("interval.b: must be > 0, got " +
                            detail::fmt_g(b));
    if (!(a < 0.0))
      throw ValidationError("interval.a: must be < 0, got " +
                            detail::fmt_g(a));
    if (gamma < 0.0)
      throw ValidationError("gamma: must be >= 0, got " + detail::fmt_g(gamma));
    if (!(h > 0.0))
      throw ValidationError("h: must be > 0, got " + detail::fmt_g(h));
    if (!(dt > 0.0))
      throw ValidationError("dt: must be > 0, got " + detail::fmt_g(dt));
    if (!(t_end > 0.0))
      throw ValidationError("t_end: must be > 0, got " + detail::fmt_g(t_end));
    if (lambdas.empty()) throw ValidationError("lambdas: panel is empty");
    for (double l : lambdas)
      if (!(l > 0.0))
        throw ValidationError("lambdas: entries must be > 0, got " +
                              detail::fmt_g(l));
    for (double e : epsilons)
      if (!(e > 0.0 && e <= 1.0))
        throw ValidationError("epsilons: entries must lie in (0, 1], got " +
                              detail::fmt_g(e));
    if (paths < 2)
      throw ValidationError("mc.paths: need at least 2 paths");
    if (!(mc_dt > 0.0))
      throw ValidationError("mc.dt: must be > 0, got " + detail::fmt_g(mc_dt));
    parse_kernel(kernel);
  }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{
      {"experiment", c.experiment},
      {"interval", {{"a", c.a}, {"b", c.b}}},
      {"kernel", c.kernel},
      {"gamma", c.gamma},
      {"lambdas", c.lambdas},
      {"epsilons", c.epsilons},
      {"h", c.h},
      {"time", {{"t_end", c.t_end}, {"dt", c.dt}, {"probes", c.times}}},
      {"mc",
       {{"paths", c.paths},
        {"dt", c.mc_dt},
        {"delta", c.mc_delta},
        {"bridge", c.bridge}}},
      {"out_dir", c.out_dir},
      {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  c.experiment = j.value("experiment", c.experiment);
  if (j.contains("interval")) {
    c.a = j["interval"].value("a", c.a);
    c.b = j["interval"].value("b", c.b);
  }
  c.kernel = j.value("kernel", c.kernel);
  c.gamma = j.value("gamma", c.gamma);
  c.lambdas = j.value("lambdas", c.lambdas);
  c.epsilons = j.value("epsilons", c.epsilons);
  c.h = j.value("h", c.h);
  if (j.contains("time")) {
    c.t_end = j["time"].value("t_end", c.t_end);
    c.dt = j["time"].value("dt", c.dt);
    c.times = j["time"].value("probes", c.times);
  }
  if (j.contains("mc")) {
    c.paths = j["mc"].value("paths", c.paths);
    c.mc_dt = j["mc"].value("dt", c.mc_dt);
    c.mc_delta = j["mc"].value("delta", c.mc_delta);
    c.bridge = j["mc"].value("bridge", c.bridge);
  }
  c.out_dir = j.value("out_dir", c.out_dir);
  c.seed = j.value("seed", c.seed);
}

struct Artifact {
  std::string name, path, kind;  // kind: csv | json
};

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ExperimentResult {
  std::vector<Artifact> artifacts;
  std::vector<Check> checks;
  nlohmann::json summary;
};

namespace detail {

namespace fs = std::filesystem;

inline void write_text(const fs::path& p, const std::string& body) {
  std::ofstream os(p, std::ios::binary);
  if (!os)
    throw ValidationError("unwritable output directory: cannot open " +
                          p.string());
  os << body;
  os.flush();
  if (!os) throw ValidationError("failed while writing " + p.string());
}

/// One CSV row, every float at 17 significant digits, '.' decimal.
inline std::string csv_row(const std::vector<double>& vals) {
  std::string out;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (i) out += ',';
    out += fmt_g(vals[i]);
  }
  out += '\n';
  return out;
}

inline Artifact write_csv(const fs::path& dir, const std::string& name,
                          const std::string& header, std::string body) {
  const fs::path p = dir / (name + ".csv");
  write_text(p, header + "\n" + std::move(body));
  return {name, p.string(), "csv"};
}

inline Artifact write_json(const fs::path& dir, const std::string& name,
                           const nlohmann::json& j) {
  const fs::path p = dir / (name + ".json");
  write_text(p, j.dump(2) + "\n");
  return {name, p.string(), "json"};
}

inline double zscore(double est, double exact, double se) {
  return se > 0.0 ? (est - exact) / se : 0.0;
}

/// Resolvent sup-errors along the epsilon panel against the interface
/// resolvent, probed on g(x) = cos x.
inline ExperimentResult exp_convergence(const ExperimentConfig& c,
                                        const fs::path& dir, unsigned) {
  const KillingKernel base = parse_kernel(c.kernel);
  const double mass = base.mass();
  if (std::abs(mass - c.gamma) > 1e-9 * std::max(1.0, std::abs(c.gamma)))
    throw ValidationError(
        "gamma: must equal the kernel mass for the convergence experiment "
        "(the scaled family concentrates to the interface with gamma = "
        "mass); kernel '" +
        c.kernel + "' has mass " + fmt_g(mass) + ", config says " +
        fmt_g(c.gamma));
  if (c.epsilons.size() < 2)
    throw ValidationError("epsilons: convergence needs at least two entries");
  for (std::size_t i = 1; i < c.epsilons.size(); ++i)
    if (!(c.epsilons[i] < c.epsilons[i - 1]))
      throw ValidationError("epsilons: panel must strictly decrease");

  const double lambda = c.lambdas.front();
  const auto g = GridFunction::sample(c.a, c.b, c.h,
                                      [](double x) { return std::cos(x); });
  LimitParams p{c.a, c.b, mass, lambda};
  const GridFunction limit = resolvent_limit(g, p).f;

  std::string body;
  nlohmann::json rows = nlohmann::json::array();
  std::vector<double> errs;
  for (double eps : c.epsilons) {
    const auto approx = resolvent_eps(g, lambda, ScaledKernel{base, eps}).f;
    const double err = sup_diff(approx, limit);
    errs.push_back(err);
    body += csv_row({eps, err});
    rows.push_back({{"eps", eps}, {"sup_error", err}});
  }
  bool monotone = true;
  for (std::size_t i = 1; i < errs.size(); ++i)
    monotone = monotone && errs[i] < errs[i - 1];
  const double shrink = errs.back() / errs.front();

  ExperimentResult r;
  r.artifacts.push_back(write_csv(dir, "convergence", "eps,sup_error", body));
  r.summary = {{"lambda", lambda}, {"gamma", mass},     {"rows", rows},
               {"monotone", monotone}, {"shrink", shrink}};
  r.artifacts.push_back(write_json(dir, "convergence_summary", r.summary));
  r.checks.push_back({"sup-errors strictly decreasing", monotone,
                      "ratios along the panel"});
  r.checks.push_back({"final error at most half the initial", shrink <= 0.5,
                      "final/initial = " + fmt_g(shrink)});
  return r;
}

/// lambda R(lambda) g against the harmonic combination as lambda drops.
inline ExperimentResult exp_lambda_limit(const ExperimentConfig& c,
                                         const fs::path& dir, unsigned) {
  const auto g = GridFunction::uniform(c.a, c.b, c.h, 1.0);
  LimitParams p{c.a, c.b, c.gamma, c.lambdas.front()};
  std::vector<double> errs;
  lambda_to_zero_limit(g, p, c.lambdas, &errs);

  std::string body;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < c.lambdas.size(); ++i) {
    body += csv_row({c.lambdas[i], errs[i]});
    rows.push_back({{"lambda", c.lambdas[i]}, {"sup_error", errs[i]}});
  }
  ExperimentResult r;
  r.artifacts.push_back(
      write_csv(dir, "lambda_limit", "lambda,sup_error", body));
  r.summary = {{"gamma", c.gamma},
               {"rows", rows},
               {"final_error", errs.back()},
               {"shrinks", errs.back() < errs.front()}};
  r.artifacts.push_back(write_json(dir, "lambda_limit_summary", r.summary));
  r.checks.push_back({"scaled resolvent approaches the harmonic limit",
                      errs.back() < errs.front(),
                      "error " + fmt_g(errs.front()) + " -> " +
                          fmt_g(errs.back())});
  r.checks.push_back({"small-lambda error at most 0.01", errs.back() <= 0.01,
                      "final error " + fmt_g(errs.back())});
  return r;
}

/// Fitted decay rates of the remainder semigroup for gamma = 0 and the
/// configured gamma, against the Dirichlet reference rate.
inline ExperimentResult exp_decay(const ExperimentConfig& c,
                                  const fs::path& dir, unsigned) {
  const std::vector<double> times =
      c.times.empty() ? std::vector<double>{1.0, 1.5, 2.0, 2.5, 3.0}
                      : c.times;
  const double len = c.b - c.a;
  const auto f0 = GridFunction::sample(c.a, c.b, c.h, [&](double x) {
    return std::sin(std::numbers::pi * (x - c.a) / len);
  });

  std::string body;
  nlohmann::json rows = nlohmann::json::array();
  ExperimentResult r;
  std::vector<double> gammas = {0.0};
  if (c.gamma > 0.0) gammas.push_back(c.gamma);
  for (double gam : gammas) {
    const auto m =
        discretize(GeneratorKind::a_limit, c.a, c.b, c.h, nullptr, gam);
    LimitParams p{c.a, c.b, gam, 1.0};
    const DecayFit fit = decay_rate(m, f0, p, times, c.dt);
    body += csv_row({gam, fit.kappa, fit.K, fit.dirichlet_rate});
    rows.push_back({{"gamma", gam},
                    {"kappa", fit.kappa},
                    {"K", fit.K},
                    {"dirichlet_rate", fit.dirichlet_rate},
                    {"ratio", fit.kappa / fit.dirichlet_rate}});
    r.checks.push_back(
        {"kappa within 5% floor of the Dirichlet rate (gamma " + fmt_g(gam) +
             ")",
         fit.kappa >= 0.95 * fit.dirichlet_rate,
         "kappa " + fmt_g(fit.kappa) + " vs rate " +
             fmt_g(fit.dirichlet_rate)});
    if (gam == 0.0)
      r.checks.push_back(
          {"gamma 0 reproduces the Dirichlet rate within 2%",
           std::abs(fit.kappa - fit.dirichlet_rate) <=
               0.02 * fit.dirichlet_rate,
           "kappa " + fmt_g(fit.kappa)});
  }
  r.artifacts.push_back(
      write_csv(dir, "decay", "gamma,kappa,K,dirichlet_rate", body));
  r.summary = {{"rows", rows}, {"times", times}};
  r.artifacts.push_back(write_json(dir, "decay_summary", r.summary));
  return r;
}

/// Weighted-exit estimates of the interface survival and its endpoint
/// splits at x = 0 and x = b/2, with z-scores against the closed forms.
inline ExperimentResult exp_survival(const ExperimentConfig& c,
                                     const fs::path& dir, unsigned workers) {
  LimitParams p{c.a, c.b, c.gamma, 1.0};
  SimConfig proto;
  proto.dt = c.mc_dt;
  proto.delta = c.mc_delta;
  proto.bridge_correction = c.bridge;
  proto.n_paths = c.paths;
  proto.seed = c.seed;

  std::string body;
  nlohmann::json rows = nlohmann::json::array();
  ExperimentResult r;
  for (double x : {0.0, 0.5 * c.b}) {
    const auto est = estimate_survival(x, p, proto, workers);
    const double exact = survival_expectation(p, x);
    const double za = zscore(est.at_a, l_star(p, x), est.at_a_se);
    const double zb = zscore(est.at_b, k_star(p, x), est.at_b_se);
    const double zv = zscore(est.value, exact, est.se);
    body += csv_row({x, est.value, est.se, exact, est.at_a, est.at_a_se,
                     l_star(p, x), est.at_b, est.at_b_se, k_star(p, x)});
    rows.push_back({{"x", x},
                    {"estimate", est.value},
                    {"se", est.se},
                    {"exact", exact},
                    {"z", zv},
                    {"at_a", est.at_a},
                    {"at_a_se", est.at_a_se},
                    {"lstar", l_star(p, x)},
                    {"z_a", za},
                    {"at_b", est.at_b},
                    {"at_b_se", est.at_b_se},
                    {"kstar", k_star(p, x)},
                    {"z_b", zb}});
    const std::string tag = " at x = " + fmt_g(x);
    r.checks.push_back({"survival within 3 SE" + tag, std::abs(zv) <= 3.0,
                        "z = " + fmt_g(zv)});
    r.checks.push_back({"a-split within 3 SE" + tag, std::abs(za) <= 3.0,
                        "z = " + fmt_g(za)});
    r.checks.push_back({"b-split within 3 SE" + tag, std::abs(zb) <= 3.0,
                        "z = " + fmt_g(zb)});
  }
  r.artifacts.push_back(write_csv(
      dir, "survival",
      "x,estimate,se,exact,at_a,at_a_se,lstar,at_b,at_b_se,kstar", body));
  r.summary = {{"gamma", c.gamma}, {"rows", rows}};
  r.artifacts.push_back(write_json(dir, "survival_summary", r.summary));
  return r;
}

/// Sampled law of the exit-time local time started at 0: mean with CI and
/// the KS distance from the exponential with the harmonic mean.
inline ExperimentResult exp_law(const ExperimentConfig& c, const fs::path& dir,
                                unsigned workers) {
  const auto rep =
      exit_local_time_law(c.a, c.b, c.paths, c.seed, c.mc_dt, workers);
  const double target = exp_law_mean(c.a, c.b);
  std::string body;
  for (double s : rep.samples) body += csv_row({s});

  ExperimentResult r;
  r.artifacts.push_back(write_csv(dir, "law_samples", "sample", body));
  r.summary = {{"mean", rep.mean},
               {"se", rep.se},
               {"ci99", {rep.ci99_lo, rep.ci99_hi}},
               {"target", target},
               {"ks", rep.ks_stat},
               {"n", rep.n_paths},
               {"dt", c.mc_dt}};
  r.artifacts.push_back(write_json(dir, "law_summary", r.summary));
  r.checks.push_back({"99% CI contains the harmonic mean",
                      rep.ci99_lo <= target && target <= rep.ci99_hi,
                      "CI [" + fmt_g(rep.ci99_lo) + ", " + fmt_g(rep.ci99_hi) +
                          "] vs " + fmt_g(target)});
  const double ks_tol =
      std::max(0.02, 2.2 / std::sqrt(static_cast<double>(rep.n_paths)));
  r.checks.push_back({"KS distance from the exponential law small",
                      rep.ks_stat <= ks_tol,
                      fmt_g(rep.ks_stat) + " vs " + fmt_g(ks_tol)});
  return r;
}

/// Scaled-intensity MC vs interface MC vs the matching evolutions at x = 0.
inline ExperimentResult exp_mechanisms(const ExperimentConfig& c,
                                       const fs::path& dir, unsigned workers) {
  const KillingKernel base = parse_kernel(c.kernel);
  LimitParams p{c.a, c.b, base.mass(), 1.0};
  SimConfig proto;
  proto.dt = c.mc_dt;
  proto.delta = c.mc_delta;
  proto.bridge_correction = c.bridge;
  proto.n_paths = c.paths;
  proto.seed = c.seed;
  const auto rows = compare_mechanisms(0.0, c.t_end, p, base, c.epsilons,
                                       proto, workers, c.h, c.dt);
  // the weights carry an O(sqrt(dt)) bias and the interface row of the
  // generator is first-order accurate
  const double budget = 0.5 * std::sqrt(c.mc_dt) + 5.0 * c.h;

  std::string body;
  nlohmann::json jrows = nlohmann::json::array();
  ExperimentResult r;
  for (const auto& row : rows) {
    const double diff = row.mc - row.pde;
    body += csv_row({row.eps, row.mc, row.mc_se, row.pde});
    jrows.push_back({{"label", row.label},
                     {"eps", row.eps},
                     {"mc", row.mc},
                     {"mc_se", row.mc_se},
                     {"pde", row.pde},
                     {"diff", diff},
                     {"z", zscore(row.mc, row.pde, row.mc_se)}});
    r.checks.push_back({"MC matches the evolution (" + row.label + ")",
                        std::abs(diff) <= 3.0 * row.mc_se + budget,
                        "diff " + fmt_g(diff) + " vs 3 SE + " +
                            fmt_g(budget)});
  }
  r.artifacts.push_back(
      write_csv(dir, "mechanisms", "eps,mc,mc_se,pde", body));
  r.summary = {{"x", 0.0},      {"t", c.t_end}, {"gamma", p.gamma},
               {"rows", jrows}, {"budget", budget}};
  r.artifacts.push_back(write_json(dir, "mechanisms_summary", r.summary));
  return r;
}

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

/// Load, validate, dispatch, and persist one experiment. Returns the
/// process exit code: 0 when every numerical check passed, 3 otherwise.
/// Validation problems (bad config, unwritable output) throw.
inline int run_experiment(const std::string& config_path,
                          const std::string& out_override = "",
                          unsigned threads = 1) {
  namespace fs = std::filesystem;
  std::ifstream is(config_path, std::ios::binary);
  if (!is)
    throw ValidationError("config file not found: " + config_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config parse failure in " + config_path + ": " +
                          e.what());
  }
  ExperimentConfig cfg;
  try {
    cfg = j.get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config field error in " + config_path + ": " +
                          e.what());
  }
  cfg.validate();

  const fs::path dir = out_override.empty() ? fs::path(cfg.out_dir)
                                            : fs::path(out_override);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw ValidationError("unwritable output directory: " + dir.string() +
                          " (" + ec.message() + ")");

  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult res;
  if (cfg.experiment == "convergence")
    res = detail::exp_convergence(cfg, dir, threads);
  else if (cfg.experiment == "lambda-limit")
    res = detail::exp_lambda_limit(cfg, dir, threads);
  else if (cfg.experiment == "decay")
    res = detail::exp_decay(cfg, dir, threads);
  else if (cfg.experiment == "survival")
    res = detail::exp_survival(cfg, dir, threads);
  else if (cfg.experiment == "law")
    res = detail::exp_law(cfg, dir, threads);
  else if (cfg.experiment == "mechanisms")
    res = detail::exp_mechanisms(cfg, dir, threads);
  else
    throw ValidationError("experiment: unknown name '" + cfg.experiment + "'");
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  nlohmann::json arts = nlohmann::json::array();
  for (const auto& a : res.artifacts)
    arts.push_back({{"name", a.name}, {"path", a.path}, {"kind", a.kind}});
  nlohmann::json checks = nlohmann::json::array();
  bool all_pass = true;
  for (const auto& c : res.checks) {
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    all_pass = all_pass && c.pass;
  }
  const nlohmann::json manifest = {{"experiment", cfg.experiment},
                                   {"config", cfg},
                                   {"seed", cfg.seed},
                                   {"versions", {{"lab", "0.1.0"}}},
                                   {"wall_time_s", wall},
                                   {"written_utc", detail::utc_now()},
                                   {"artifacts", arts},
                                   {"checks", checks},
                                   {"summary", res.summary}};
  detail::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return all_pass ? 0 : 3;
}

namespace detail {

class TextTable {
 public:
  explicit TextTable(std::vector<std::string> head) { rows_.push_back(head); }
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  std::string str() const {
    std::vector<std::size_t> w;
    for (const auto& r : rows_) {
      if (w.size() < r.size()) w.resize(r.size(), 0);
      for (std::size_t i = 0; i < r.size(); ++i)
        w[i] = std::max(w[i], r[i].size());
    }
    std::string out;
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      const auto& r = rows_[k];
      std::string line;
      for (std::size_t i = 0; i < r.size(); ++i) {
        std::string cell = r[i];
        cell.resize(w[i], ' ');
        line += cell;
        if (i + 1 < r.size()) line += "  ";
      }
      while (!line.empty() && line.back() == ' ') line.pop_back();
      out += line + "\n";
      if (k == 0) {
        std::string rule;
        for (std::size_t i = 0; i < w.size(); ++i) {
          rule += std::string(w[i], '-');
          if (i + 1 < w.size()) rule += "  ";
        }
        out += rule + "\n";
      }
    }
    return out;
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

inline std::string fmt6(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace detail

/// Render the tables of a finished run. Verifies the manifest and every
/// artifact it references before emitting anything, so a missing file
/// never yields a partial report.
inline std::string render_report(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream is(manifest_path, std::ios::binary);
  if (!is) throw ValidationError("manifest not found: " + manifest_path);
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("manifest parse failure: " + std::string(e.what()));
  }
  if (!m.contains("experiment") || !m.contains("artifacts") ||
      m["artifacts"].empty())
    throw ValidationError("manifest lists no artifacts: " + manifest_path);
  for (const auto& a : m["artifacts"]) {
    const std::string p = a.value("path", "");
    if (p.empty() || !fs::exists(p))
      throw ValidationError("missing artifact file: " + p);
  }
  const std::string exp = m["experiment"];
  const nlohmann::json& s = m["summary"];

  std::string out = "experiment: " + exp +
                    "  (seed " + std::to_string(m.value("seed", 0ULL)) +
                    ")\n\n";
  using detail::fmt6;
  if (exp == "convergence") {
    detail::TextTable t({"eps", "sup_error", "ratio"});
    double prev = 0.0;
    bool first = true;
    for (const auto& r : s["rows"]) {
      const double e = r["sup_error"];
      t.add({fmt6(r["eps"]), fmt6(e), first ? "-" : fmt6(e / prev)});
      prev = e;
      first = false;
    }
    out += t.str();
    out += "\nmonotone decrease: ";
    out += s.value("monotone", false) ? "PASS" : "FAIL";
    out += "\n";
  } else if (exp == "lambda-limit") {
    detail::TextTable t({"lambda", "sup_error"});
    for (const auto& r : s["rows"])
      t.add({fmt6(r["lambda"]), fmt6(r["sup_error"])});
    out += t.str();
  } else if (exp == "decay") {
    detail::TextTable t(
        {"gamma", "kappa_fit", "dirichlet_rate", "ratio", "flag"});
    for (const auto& r : s["rows"]) {
      const double k = r["kappa"], d = r["dirichlet_rate"];
      t.add({fmt6(r["gamma"]), fmt6(k), fmt6(d), fmt6(k / d),
             k >= 0.95 * d ? "PASS" : "FAIL"});
    }
    out += t.str();
  } else if (exp == "survival") {
    detail::TextTable t({"x", "estimate", "se", "exact", "z", "flag"});
    for (const auto& r : s["rows"]) {
      const double z = r["z"];
      t.add({fmt6(r["x"]), fmt6(r["estimate"]), fmt6(r["se"]),
             fmt6(r["exact"]), fmt6(z), std::abs(z) <= 3.0 ? "PASS" : "FAIL"});
      const double za = r["z_a"], zb = r["z_b"];
      t.add({"  at a", fmt6(r["at_a"]), fmt6(r["at_a_se"]), fmt6(r["lstar"]),
             fmt6(za), std::abs(za) <= 3.0 ? "PASS" : "FAIL"});
      t.add({"  at b", fmt6(r["at_b"]), fmt6(r["at_b_se"]), fmt6(r["kstar"]),
             fmt6(zb), std::abs(zb) <= 3.0 ? "PASS" : "FAIL"});
    }
    out += t.str();
  } else if (exp == "law") {
    detail::TextTable t({"mean", "se", "ci99_lo", "ci99_hi", "target", "ks"});
    t.add({fmt6(s["mean"]), fmt6(s["se"]), fmt6(s["ci99"][0]),
           fmt6(s["ci99"][1]), fmt6(s["target"]), fmt6(s["ks"])});
    out += t.str();
  } else if (exp == "mechanisms") {
    detail::TextTable t({"mechanism", "mc", "se", "pde", "z", "flag"});
    const double budget = s.value("budget", 0.0);
    for (const auto& r : s["rows"]) {
      const double diff = r["diff"], se = r["mc_se"];
      t.add({r["label"], fmt6(r["mc"]), fmt6(se), fmt6(r["pde"]),
             fmt6(r["z"]),
             std::abs(diff) <= 3.0 * se + budget ? "PASS" : "FAIL"});
    }
    out += t.str();
  } else {
    throw ValidationError("manifest names an unknown experiment: " + exp);
  }

  if (m.contains("checks") && !m["checks"].empty()) {
    out += "\nchecks:\n";
    detail::TextTable t({"check", "flag", "detail"});
    for (const auto& c : m["checks"])
      t.add({c["name"], c.value("pass", false) ? "PASS" : "FAIL",
             c.value("detail", "")});
    out += t.str();
  }
  return out;
}

}  // namespace loctime
