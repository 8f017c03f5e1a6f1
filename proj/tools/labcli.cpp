#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "loctime/experiments.hpp"

namespace {

using namespace loctime;
namespace fs = std::filesystem;

struct Globals {
  std::string out;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double h = 1e-3;
  double dt = 1e-3;
};

GridFunction sample_named(const std::string& data, double a, double b,
                          double h) {
  if (data == "one") return GridFunction::uniform(a, b, h, 1.0);
  if (data == "cos")
    return GridFunction::sample(a, b, h, [](double x) { return std::cos(x); });
  if (data == "sine")
    return GridFunction::sample(a, b, h, [&](double x) {
      return std::sin(std::numbers::pi * (x - a) / (b - a));
    });
  throw ValidationError("unknown data profile '" + data +
                        "' (one, cos, sine)");
}

void ensure_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec)
    throw ValidationError("unwritable output directory: " + out + " (" +
                          ec.message() + ")");
}

void dump_profile_csv(const std::string& out, const std::string& name,
                      const std::string& header,
                      const std::vector<const GridFunction*>& cols) {
  ensure_dir(out);
  std::string body;
  for (std::size_t i = 0; i < cols.front()->size(); ++i) {
    std::vector<double> row = {cols.front()->x(i)};
    for (const auto* c : cols) row.push_back(c->values[i]);
    body += detail::csv_row(row);
  }
  detail::write_csv(out, name, header, body);
}

void cmd_fixedpoint(const Globals& g, const std::string& kernel, double eps,
                    double lambda, double a, double b, double tol) {
  const ScaledKernel c{parse_kernel(kernel), eps};
  const EigenPair pair = solve_pair(c, lambda, a, b, g.h, tol);
  std::printf("kernel %s  eps %s  lambda %s  h %s\n", kernel.c_str(),
              detail::fmt_g(eps).c_str(), detail::fmt_g(lambda).c_str(),
              detail::fmt_g(g.h).c_str());
  std::printf("iterations          %d (k), %d (l)\n", pair.iterations_k,
              pair.iterations_l);
  std::printf("contraction factor  %s (omega %s)\n",
              detail::fmt_g(pair.contraction_factor).c_str(),
              detail::fmt_g(pair.omega).c_str());
  std::printf("wronskian           %s\n", detail::fmt_g(pair.wronskian).c_str());
  std::printf("  rel variation     %s\n",
              detail::fmt_g(pair.wronskian_rel_variation).c_str());
  std::printf("  l(a) %s   k(b) %s\n",
              detail::fmt_g(pair.l.values.front()).c_str(),
              detail::fmt_g(pair.k.values.back()).c_str());
  if (!g.out.empty())
    dump_profile_csv(g.out, "fixedpoint", "x,k,k_prime,l,l_prime",
                     {&pair.k, &pair.k_prime, &pair.l, &pair.l_prime});
}

void cmd_closedform(const Globals& g, const std::string& what, double gamma,
                    double lambda, double a, double b) {
  LimitParams p{a, b, gamma, lambda};
  GridFunction f;
  if (what == "kstar")
    f = GridFunction::sample(a, b, g.h, [&](double x) { return k_star(p, x); });
  else if (what == "lstar")
    f = GridFunction::sample(a, b, g.h, [&](double x) { return l_star(p, x); });
  else if (what == "klimit")
    f = GridFunction::sample(a, b, g.h,
                             [&](double x) { return k_limit(p, x); });
  else if (what == "llimit")
    f = GridFunction::sample(a, b, g.h,
                             [&](double x) { return l_limit(p, x); });
  else if (what == "survival")
    f = GridFunction::sample(
        a, b, g.h, [&](double x) { return survival_expectation(p, x); });
  else
    throw ValidationError("unknown profile '" + what +
                          "' (kstar, lstar, klimit, llimit, survival)");
  std::printf("%s(a) %s   %s(0) %s   %s(b) %s\n", what.c_str(),
              detail::fmt_g(f.values.front()).c_str(), what.c_str(),
              detail::fmt_g(f.values[f.zero_node()]).c_str(), what.c_str(),
              detail::fmt_g(f.values.back()).c_str());
  std::printf("exp_law_mean(a, b) %s\n",
              detail::fmt_g(exp_law_mean(a, b)).c_str());
  if (!g.out.empty())
    dump_profile_csv(g.out, "closedform_" + what, "x," + what, {&f});
}

void cmd_resolvent(const Globals& g, const std::string& data,
                   const std::string& kernel, double eps, double lambda,
                   double gamma, double a, double b) {
  const GridFunction rhs = sample_named(data, a, b, g.h);
  ResolventResult res;
  if (eps > 0.0) {
    res = resolvent_eps(rhs, lambda, ScaledKernel{parse_kernel(kernel), eps});
  } else {
    LimitParams p{a, b, gamma, lambda};
    res = resolvent_limit(rhs, p);
  }
  const auto& br = res.boundary_report;
  std::printf("lambda %s  %s\n", detail::fmt_g(lambda).c_str(),
              eps > 0.0 ? ("eps " + detail::fmt_g(eps)).c_str() : "interface");
  std::printf("residual sup        %s\n",
              detail::fmt_g(res.residual_sup).c_str());
  std::printf("wronskian           %s\n", detail::fmt_g(res.wronskian).c_str());
  std::printf("|f''(a)| %s  |f''(b)| %s  |f''(0+)-f''(0-)| %s\n",
              detail::fmt_g(br.d2_a).c_str(), detail::fmt_g(br.d2_b).c_str(),
              detail::fmt_g(br.d2_gap).c_str());
  std::printf("interface jump defect %s\n", detail::fmt_g(br.jump).c_str());
  if (!g.out.empty())
    dump_profile_csv(g.out, "resolvent", "x,f,residual",
                     {&res.f, &res.residual});
}

void cmd_evolve(const Globals& g, const std::string& gen,
                const std::string& kernel, double eps, double gamma,
                const std::string& data, double t, const std::string& scheme,
                double a, double b) {
  GeneratorKind kind;
  const KillingKernel base = parse_kernel(kernel);
  const ScaledKernel scaled{base, eps > 0.0 ? eps : 1.0};
  const ScaledKernel* kp = nullptr;
  if (gen == "limit") {
    kind = GeneratorKind::a_limit;
  } else if (gen == "eps") {
    kind = GeneratorKind::a_eps;
    kp = &scaled;
  } else if (gen == "dirichlet") {
    kind = GeneratorKind::b_dirichlet;
  } else if (gen == "g1") {
    kind = GeneratorKind::g1;
  } else if (gen == "g2") {
    kind = GeneratorKind::g2;
  } else {
    throw ValidationError("unknown generator '" + gen +
                          "' (limit, eps, dirichlet, g1, g2)");
  }
  const auto m = discretize(kind, a, b, g.h, kp, gamma);
  const auto f0 = sample_named(data, a, b, g.h);
  const Scheme sc = scheme == "expm" ? Scheme::dense_exponential
                                     : Scheme::crank_nicolson;
  const auto ev = evolve(m, f0, t, g.dt, sc);
  const GridFunction& fT = ev.snapshots.back();
  double sup = 0.0;
  for (double v : fT.values) sup = std::max(sup, std::abs(v));
  std::printf("generator %s  t %s  dt %s  h %s  scheme %s\n", gen.c_str(),
              detail::fmt_g(t).c_str(), detail::fmt_g(g.dt).c_str(),
              detail::fmt_g(g.h).c_str(),
              sc == Scheme::dense_exponential ? "expm" : "cn");
  std::printf("sup |f(t)|  %s\n", detail::fmt_g(sup).c_str());
  std::printf("f(t, 0)     %s\n",
              detail::fmt_g(fT.values[fT.zero_node()]).c_str());
  if (!g.out.empty()) dump_profile_csv(g.out, "evolve", "x,f", {&fT});
}

void cmd_decay(const Globals& g, double gamma, std::vector<double> times,
               double a, double b) {
  if (times.empty()) times = {1.0, 1.5, 2.0, 2.5, 3.0};
  const auto m = discretize(GeneratorKind::a_limit, a, b, g.h, nullptr, gamma);
  const auto f0 = sample_named("sine", a, b, g.h);
  LimitParams p{a, b, gamma, 1.0};
  const DecayFit fit = decay_rate(m, f0, p, times, g.dt);
  detail::TextTable tab({"gamma", "kappa_fit", "K", "dirichlet_rate", "ratio",
                         "flag"});
  tab.add({detail::fmt6(gamma), detail::fmt6(fit.kappa), detail::fmt6(fit.K),
           detail::fmt6(fit.dirichlet_rate),
           detail::fmt6(fit.kappa / fit.dirichlet_rate),
           fit.kappa >= 0.95 * fit.dirichlet_rate ? "PASS" : "FAIL"});
  std::fputs(tab.str().c_str(), stdout);
}

void cmd_blocks(const Globals& g, double bb, double gamma, double t) {
  const BlockProfiles bp = longtime_blocks(bb, gamma, g.h, t, g.dt);

  // block route against the direct interface evolution on [-b, b]
  const auto f0 = GridFunction::uniform(-bb, bb, g.h, 1.0);
  const auto direct =
      evolve(discretize(GeneratorKind::a_limit, -bb, bb, g.h, nullptr, gamma),
             f0, 1.0, g.dt, Scheme::crank_nicolson)
          .snapshots.back();
  const auto routed = block_semigroup(f0, 1.0, bb, gamma, g.dt);
  std::printf("block vs direct (t = 1)   %s\n",
              detail::fmt_g(sup_diff(routed, direct)).c_str());
  std::printf("recon k*  %s   recon l*  %s\n",
              detail::fmt_g(bp.recon_kstar).c_str(),
              detail::fmt_g(bp.recon_lstar).c_str());
  std::printf("longtime k1 %s   longtime k2 %s (probe t = %s)\n",
              detail::fmt_g(bp.longtime_k1).c_str(),
              detail::fmt_g(bp.longtime_k2).c_str(),
              detail::fmt_g(t).c_str());
  if (!g.out.empty()) {
    dump_profile_csv(g.out, "blocks_half", "x,k1,k2", {&bp.k1, &bp.k2});
    dump_profile_csv(g.out, "blocks_full", "x,kstar,lstar",
                     {&bp.kstar, &bp.lstar});
  }
}

void cmd_mc(const Globals& g, const std::string& experiment, std::size_t paths,
            double mc_dt, double delta, bool bridge, bool dump_samples,
            double gamma, const std::string& kernel,
            std::vector<double> epsilons, double t, double a, double b) {
  const unsigned workers = effective_workers(g.threads);
  nlohmann::json report;
  std::string samples_csv;

  if (experiment == "law") {
    const auto rep = exit_local_time_law(a, b, paths, g.seed, mc_dt, workers);
    report = {{"experiment", "law"},
              {"mean", rep.mean},
              {"se", rep.se},
              {"ci99", {rep.ci99_lo, rep.ci99_hi}},
              {"target", exp_law_mean(a, b)},
              {"ks", rep.ks_stat},
              {"n", rep.n_paths},
              {"dt", mc_dt}};
    if (dump_samples)
      for (double s : rep.samples) samples_csv += detail::csv_row({s});
  } else if (experiment == "survival") {
    LimitParams p{a, b, gamma, 1.0};
    SimConfig proto;
    proto.dt = mc_dt;
    proto.delta = delta;
    proto.bridge_correction = bridge;
    proto.n_paths = paths;
    proto.seed = g.seed;
    nlohmann::json rows = nlohmann::json::array();
    for (double x : {0.0, 0.5 * b}) {
      const auto est = estimate_survival(x, p, proto, workers);
      const double exact = survival_expectation(p, x);
      rows.push_back({{"x", x},
                      {"estimate", est.value},
                      {"se", est.se},
                      {"exact", exact},
                      {"z", detail::zscore(est.value, exact, est.se)},
                      {"at_a", est.at_a},
                      {"at_a_se", est.at_a_se},
                      {"lstar", l_star(p, x)},
                      {"at_b", est.at_b},
                      {"at_b_se", est.at_b_se},
                      {"kstar", k_star(p, x)}});
    }
    report = {{"experiment", "survival"},
              {"gamma", gamma},
              {"dt", mc_dt},
              {"n", paths},
              {"rows", rows}};
  } else if (experiment == "mechanisms") {
    const KillingKernel base = parse_kernel(kernel);
    LimitParams p{a, b, base.mass(), 1.0};
    SimConfig proto;
    proto.dt = mc_dt;
    proto.delta = delta;
    proto.bridge_correction = bridge;
    proto.n_paths = paths;
    proto.seed = g.seed;
    const auto rows =
        compare_mechanisms(0.0, t, p, base, epsilons, proto, workers, g.h);
    nlohmann::json jrows = nlohmann::json::array();
    for (const auto& r : rows)
      jrows.push_back({{"label", r.label},
                       {"eps", r.eps},
                       {"mc", r.mc},
                       {"mc_se", r.mc_se},
                       {"pde", r.pde},
                       {"z", detail::zscore(r.mc, r.pde, r.mc_se)}});
    report = {{"experiment", "mechanisms"},
              {"gamma", p.gamma},
              {"t", t},
              {"dt", mc_dt},
              {"n", paths},
              {"rows", jrows}};
  } else {
    throw ValidationError("unknown MC experiment '" + experiment +
                          "' (survival, law, mechanisms)");
  }

  std::fputs((report.dump(2) + "\n").c_str(), stdout);
  if (!g.out.empty()) {
    ensure_dir(g.out);
    detail::write_json(g.out, "mc_" + experiment, report);
    if (!samples_csv.empty())
      detail::write_csv(g.out, "mc_" + experiment + "_samples", "sample",
                        std::move(samples_csv));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interface-killing diffusion laboratory"};
  app.require_subcommand(1);
  // the grid-step flag is spelled --h, so help keeps only its long form
  app.set_help_flag("--help", "print this help message and exit");

  Globals g;
  app.add_option("--out", g.out, "output directory for CSV/JSON artifacts");
  app.add_option("--seed", g.seed, "RNG seed");
  app.add_option("--threads", g.threads,
                 "worker threads (LAB_DETERMINISTIC=1 forces 1)");
  auto* opt_h = app.add_option("--h", g.h, "grid step");
  auto* opt_dt = app.add_option("--dt", g.dt, "time step");

  int rc = 0;

  // fixedpoint
  auto* fp = app.add_subcommand(
      "fixedpoint", "solve the two-sided shooting pair by iteration");
  fp->fallthrough();
  struct {
    std::string kernel = "box:0.5:1";
    double eps = 0.1, lambda = 1.0, a = -1.0, b = 1.0, tol = 1e-10;
  } fpo;
  fp->add_option("--kernel", fpo.kernel, "kernel spec shape:p1:p2");
  fp->add_option("--eps", fpo.eps, "kernel scale");
  fp->add_option("--lambda", fpo.lambda, "spectral parameter");
  fp->add_option("--a", fpo.a, "left endpoint");
  fp->add_option("--b", fpo.b, "right endpoint");
  fp->add_option("--tol", fpo.tol, "iteration tolerance");
  fp->callback([&] {
    cmd_fixedpoint(g, fpo.kernel, fpo.eps, fpo.lambda, fpo.a, fpo.b, fpo.tol);
  });

  // closedform
  auto* cf = app.add_subcommand("closedform",
                                "tabulate the interface closed forms");
  cf->fallthrough();
  struct {
    std::string what = "kstar";
    double gamma = 1.0, lambda = 1.0, a = -1.0, b = 1.0;
  } cfo;
  cf->add_option("--what", cfo.what,
                 "profile: kstar, lstar, klimit, llimit, survival");
  cf->add_option("--gamma", cfo.gamma, "interface strength");
  cf->add_option("--lambda", cfo.lambda, "spectral parameter");
  cf->add_option("--a", cfo.a, "left endpoint");
  cf->add_option("--b", cfo.b, "right endpoint");
  cf->callback(
      [&] { cmd_closedform(g, cfo.what, cfo.gamma, cfo.lambda, cfo.a, cfo.b); });

  // resolvent
  auto* rv = app.add_subcommand("resolvent",
                                "apply the resolvent to a probe datum");
  rv->fallthrough();
  struct {
    std::string data = "cos", kernel = "box:0.5:1";
    double eps = 0.0, lambda = 1.0, gamma = 1.0, a = -1.0, b = 1.0;
  } rvo;
  rv->add_option("--data", rvo.data, "probe datum: one, cos, sine");
  rv->add_option("--kernel", rvo.kernel, "kernel spec (scaled route)");
  rv->add_option("--eps", rvo.eps, "kernel scale; 0 takes the interface limit");
  rv->add_option("--lambda", rvo.lambda, "spectral parameter");
  rv->add_option("--gamma", rvo.gamma, "interface strength (limit route)");
  rv->add_option("--a", rvo.a, "left endpoint");
  rv->add_option("--b", rvo.b, "right endpoint");
  rv->callback([&] {
    cmd_resolvent(g, rvo.data, rvo.kernel, rvo.eps, rvo.lambda, rvo.gamma,
                  rvo.a, rvo.b);
  });

  // evolve
  auto* ev = app.add_subcommand("evolve", "run a semigroup forward in time");
  ev->fallthrough();
  struct {
    std::string gen = "limit", kernel = "box:0.5:1", data = "one",
                scheme = "cn";
    double eps = 0.0, gamma = 1.0, t = 1.0, a = -1.0, b = 1.0;
  } evo;
  ev->add_option("--gen", evo.gen,
                 "generator: limit, eps, dirichlet, g1, g2");
  ev->add_option("--kernel", evo.kernel, "kernel spec (eps generator)");
  ev->add_option("--eps", evo.eps, "kernel scale (eps generator)");
  ev->add_option("--gamma", evo.gamma, "interface strength");
  ev->add_option("--data", evo.data, "initial datum: one, cos, sine");
  ev->add_option("--t", evo.t, "final time");
  ev->add_option("--scheme", evo.scheme, "stepper: cn, expm");
  ev->add_option("--a", evo.a, "left endpoint");
  ev->add_option("--b", evo.b, "right endpoint");
  ev->callback([&] {
    cmd_evolve(g, evo.gen, evo.kernel, evo.eps, evo.gamma, evo.data, evo.t,
               evo.scheme, evo.a, evo.b);
  });

  // decay
  auto* dc = app.add_subcommand("decay",
                                "fit the long-time decay of the remainder");
  dc->fallthrough();
  struct {
    double gamma = 1.0, a = -1.0, b = 1.0;
    std::vector<double> times;
  } dco;
  dc->add_option("--gamma", dco.gamma, "interface strength");
  dc->add_option("--times", dco.times, "fit probe times (increasing)");
  dc->add_option("--a", dco.a, "left endpoint");
  dc->add_option("--b", dco.b, "right endpoint");
  dc->callback([&] { cmd_decay(g, dco.gamma, dco.times, dco.a, dco.b); });

  // blocks
  auto* bl = app.add_subcommand("blocks",
                                "half-line block decomposition diagnostics");
  bl->fallthrough();
  struct {
    double b = 1.0, gamma = 1.0, t = 8.0;
  } blo;
  bl->add_option("--b", blo.b, "half-interval length");
  bl->add_option("--gamma", blo.gamma, "interface strength");
  bl->add_option("--t", blo.t, "long-time probe");
  bl->callback([&] { cmd_blocks(g, blo.b, blo.gamma, blo.t); });

  // mc
  auto* mc = app.add_subcommand("mc", "Monte Carlo estimators");
  mc->fallthrough();
  struct {
    std::string experiment = "law", kernel = "box:0.5:1";
    std::size_t paths = 20000;
    double delta = 0.0, gamma = 1.0, t = 1.0, a = -1.0, b = 1.0;
    bool no_bridge = false, dump_samples = false;
    std::vector<double> epsilons = {0.2, 0.1, 0.05};
  } mco;
  mc->add_option("--experiment", mco.experiment,
                 "survival, law, or mechanisms");
  mc->add_option("--paths", mco.paths, "number of paths");
  mc->add_option("--delta", mco.delta,
                 "occupation window (0 keeps 5 sqrt(dt))");
  mc->add_option("--gamma", mco.gamma, "interface strength");
  mc->add_option("--kernel", mco.kernel, "kernel spec (mechanisms)");
  mc->add_option("--epsilons", mco.epsilons, "scale panel (mechanisms)");
  mc->add_option("--t", mco.t, "horizon (mechanisms)");
  mc->add_option("--a", mco.a, "left endpoint");
  mc->add_option("--b", mco.b, "right endpoint");
  mc->add_flag("--no-bridge", mco.no_bridge, "disable the exit correction");
  mc->add_flag("--dump-samples", mco.dump_samples,
               "write raw samples CSV (law, needs --out)");
  mc->callback([&] {
    // the global default step is tuned for PDE grids; paths step finer
    const double mc_dt = opt_dt->count() > 0 ? g.dt : 1e-4;
    cmd_mc(g, mco.experiment, mco.paths, mc_dt, mco.delta, !mco.no_bridge,
           mco.dump_samples, mco.gamma, mco.kernel, mco.epsilons, mco.t,
           mco.a, mco.b);
  });

  // run
  auto* rn = app.add_subcommand("run", "execute an experiment config");
  rn->fallthrough();
  std::string config_path;
  rn->add_option("config", config_path, "JSON experiment config")->required();
  rn->callback([&] {
    rc = run_experiment(config_path, g.out, effective_workers(g.threads));
  });

  // report
  auto* rp = app.add_subcommand("report", "render tables from a manifest");
  rp->fallthrough();
  std::string manifest_path;
  rp->add_option("manifest", manifest_path, "manifest.json of a finished run")
      ->required();
  rp->callback([&] { std::fputs(render_report(manifest_path).c_str(), stdout); });

  (void)opt_h;
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const loctime::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const loctime::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal failure: %s\n", e.what());
    return 3;
  }
  return rc;
}
