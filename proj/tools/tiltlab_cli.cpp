#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tiltlab/errors.hpp"
#include "tiltlab/foellmer.hpp"
#include "tiltlab/harness.hpp"
#include "tiltlab/measures.hpp"
#include "tiltlab/potential.hpp"
#include "tiltlab/quadrature.hpp"
#include "tiltlab/rng.hpp"
#include "tiltlab/sampling.hpp"

using namespace tiltlab;

namespace {

struct GlobalOpts {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> samples;
  std::optional<std::string> out;
  std::optional<int> dim;
};

SuiteConfig load_config(const std::string& arg) {
  if (arg == "default") return default_matrix();
  std::ifstream in(arg);
  if (!in) throw ParseError("cannot open config file '" + arg + "'", 0);
  return parse_suite_config(in);
}

SuiteConfig load_with_overrides(const std::string& arg, const GlobalOpts& g) {
  SuiteConfig cfg = load_config(arg);
  if (g.seed) cfg.seeds = {*g.seed};
  if (g.samples) cfg.samples = static_cast<std::size_t>(*g.samples);
  if (g.out) cfg.out_path = *g.out;
  if (g.dim)
    std::erase_if(cfg.instances, [&](const InstanceSpec& i) {
      return i.potential->dim() != *g.dim;
    });
  return cfg;
}

void emit(const std::string& text, const std::string& out_path) {
  std::fputs(text.c_str(), stdout);
  if (!out_path.empty()) {
    std::ofstream o(out_path);
    if (!o) {
      std::cerr << "cannot write '" << out_path << "'\n";
      std::exit(2);
    }
    o << text;
    std::cerr << "wrote " << out_path << "\n";
  }
}

const std::vector<std::string> kFunctionalNames = {
    "kl",         "fisher",        "fisher_ibp", "laplacian_mean",
    "x_grad",     "second_moment", "entropy_gap", "width",
    "m",          "w2_sq"};

int run_measure(const SuiteConfig& cfg, const std::string& functional) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-12s %6s  %-14s %16s %12s  %s\n", "instance",
                "seed", "functional", "value", "se", "method");
  out += buf;
  out += std::string(80, '-') + "\n";
  for (const std::uint64_t seed : cfg.seeds) {
    for (std::size_t i = 0; i < cfg.instances.size(); ++i) {
      const InstanceSpec& inst = cfg.instances[i];
      TiltedMeasure m(*inst.potential);
      const SharedBatches sh =
          make_shared_batches(m, cfg, seed, static_cast<std::uint32_t>(i));
      std::optional<Estimate> est;
      std::string why;
      if (functional == "kl") est = sh.kl;
      else if (functional == "fisher") est = sh.fisher;
      else if (functional == "fisher_ibp") est = estimate_fisher_ibp(m, sh.nu);
      else if (functional == "laplacian_mean") est = sh.lap_mean;
      else if (functional == "x_grad") est = sh.x_grad;
      else if (functional == "second_moment") est = sh.second_moment;
      else if (functional == "entropy_gap") est = sh.entropy_gap;
      else if (functional == "width") { est = sh.width; why = sh.width_note; }
      else if (functional == "m") { est = sh.m_term; why = sh.m_note; }
      else if (functional == "w2_sq") { est = sh.w2sq; why = sh.w2_note; }
      if (est) {
        std::snprintf(buf, sizeof(buf), "%-12s %6llu  %-14s %+16.9e %12.3e  %s\n",
                      inst.name.c_str(), static_cast<unsigned long long>(seed),
                      functional.c_str(), est->value, est->std_error,
                      method_name(est->method));
      } else {
        std::snprintf(buf, sizeof(buf), "%-12s %6llu  %-14s %16s %12s  %s\n",
                      inst.name.c_str(), static_cast<unsigned long long>(seed),
                      functional.c_str(), "n/a", "-", why.c_str());
      }
      out += buf;
    }
  }
  emit(out, cfg.out_path);
  return 0;
}

int run_follmer(const SuiteConfig& cfg, bool diagnose) {
  int exit_code = 0;
  std::string out;
  char buf[256];
  for (const std::uint64_t seed : cfg.seeds) {
    for (std::size_t i = 0; i < cfg.instances.size(); ++i) {
      const InstanceSpec& inst = cfg.instances[i];
      const Potential& p = *inst.potential;
      if (!p.capabilities().analytic_drift || !p.capabilities().exact_sampler) {
        std::snprintf(buf, sizeof(buf), "%-12s skipped: no closed-form drift\n",
                      inst.name.c_str());
        out += buf;
        continue;
      }
      DriftSpec drift = analytic_mixture_drift(p);
      RngStream rng(seed, make_stream_id(static_cast<std::uint32_t>(i), 3));
      const PathEnsemble ens =
          simulate(drift, cfg.follmer_steps, cfg.follmer_paths, rng);
      std::snprintf(buf, sizeof(buf), "%-12s seed %llu: %zu paths x %d steps\n",
                    inst.name.c_str(), static_cast<unsigned long long>(seed),
                    ens.paths, ens.steps);
      out += buf;
      if (!diagnose) continue;

      RngStream exact_rng(seed, make_stream_id(static_cast<std::uint32_t>(i), 3, 1));
      const SampleBatch exact = sample_nu_exact(p, cfg.follmer_paths, exact_rng);
      const TerminalLawReport law = diag_terminal_law(ens, exact);
      const MartingaleReport mart = diag_martingale(ens);
      Estimate kl;
      if (p.dim() <= 2) {
        kl.value = quadrature_profile(p).kl;
        kl.method = Method::Quadrature;
      } else {
        RngStream kl_rng(seed, make_stream_id(static_cast<std::uint32_t>(i), 0));
        TiltedMeasure m(p);
        kl = estimate_kl(m, sample_nu_exact(p, cfg.samples, kl_rng));
      }
      const IdentityReport energy = diag_energy_identity(ens, kl);
      const IdentityReport coupling = diag_coupling_identity(ens, kl);

      const double max_ks =
          *std::max_element(law.ks_statistics.begin(), law.ks_statistics.end());
      std::snprintf(buf, sizeof(buf),
                    "  terminal_law  max_ks %.5f  critical %.5f  energy %.5f/%.5f  %s\n",
                    max_ks, law.ks_critical, law.energy_statistic,
                    law.energy_threshold, law.pass ? "PASS" : "FAIL");
      out += buf;
      std::snprintf(buf, sizeof(buf), "  martingale    max |mean|/se %.3f  %s\n",
                    mart.max_ratio, mart.pass ? "PASS" : "FAIL");
      out += buf;
      std::snprintf(buf, sizeof(buf),
                    "  energy        %.6f vs 2*kl %.6f (tol %.6f)  %s\n",
                    energy.statistic, energy.target, energy.tolerance,
                    energy.pass ? "PASS" : "FAIL");
      out += buf;
      std::snprintf(buf, sizeof(buf),
                    "  coupling      %.6f vs 2*kl %.6f (tol %.6f)  %s\n",
                    coupling.statistic, coupling.target, coupling.tolerance,
                    coupling.pass ? "PASS" : "FAIL");
      out += buf;
      if (!law.pass || !mart.pass || !energy.pass || !coupling.pass) exit_code = 1;
    }
  }
  emit(out, cfg.out_path);
  return exit_code;
}

int run_check(SuiteConfig cfg, const std::vector<std::string>& only) {
  if (!only.empty()) {
    cfg.selection.clear();
    cfg.select_none = false;
    for (const std::string& n : only) cfg.selection.push_back(parse_check_name(n));
  }
  const SuiteReport rep = run_suite(cfg);
  std::fputs(rep.console_table().c_str(), stdout);
  if (!cfg.out_path.empty()) {
    std::ofstream o(cfg.out_path);
    if (!o) {
      std::cerr << "cannot write '" << cfg.out_path << "'\n";
      return 2;
    }
    o << rep.machine_report();
    std::cerr << "wrote " << cfg.out_path << "\n";
  }
  return rep.exit_code;
}

int run_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot open report '" << path << "'\n";
    return 2;
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "malformed report: " << e.what() << "\n";
    return 2;
  }
  char buf[200];
  std::snprintf(buf, sizeof(buf), "%-12s %6s  %-28s %-14s %12s %12s\n", "instance",
                "seed", "check", "verdict", "margin", "3se+allow");
  std::string out = buf;
  out += std::string(89, '-') + "\n";
  std::size_t fails = 0, n_a = 0, total = 0;
  try {
    for (const auto& run : j.at("runs")) {
      const std::string instance = run.at("instance");
      const std::uint64_t seed = run.at("seed");
      for (const auto& c : run.at("checks")) {
        const std::string verdict = c.at("verdict");
        ++total;
        if (verdict == "FAILS") ++fails;
        if (verdict == "NOT_APPLICABLE") ++n_a;
        std::snprintf(buf, sizeof(buf), "%-12s %6llu  %-28s %-14s %+12.4e %12.4e\n",
                      instance.c_str(), static_cast<unsigned long long>(seed),
                      c.at("check").get<std::string>().c_str(), verdict.c_str(),
                      c.at("margin").get<double>(),
                      3.0 * c.at("margin_se").get<double>() +
                          c.at("bias_allowance").get<double>());
        out += buf;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "malformed report: " << e.what() << "\n";
    return 2;
  }
  std::snprintf(buf, sizeof(buf),
                "checks: %zu  holds: %zu  fails: %zu  not_applicable: %zu\n", total,
                total - fails - n_a, fails, n_a);
  out += buf;
  std::fputs(out.c_str(), stdout);
  return fails > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tilted Gaussian measures: functional estimators, Schrodinger-"
               "bridge diagnostics, and the inequality harness"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--seed", g.seed, "override config seeds with a single seed");
  app.add_option("--samples", g.samples, "override the per-instance sample count");
  app.add_option("--out", g.out, "write the primary output to this path");
  app.add_option("--dim", g.dim, "keep only instances of this dimension");

  auto* measure = app.add_subcommand("measure", "estimate one functional per instance");
  std::string measure_config;
  std::string functional;
  measure->add_option("config", measure_config, "config path or 'default'")->required();
  measure->add_option("--functional", functional, "functional to estimate")
      ->required()
      ->check(CLI::IsMember(kFunctionalNames));

  auto* follmer = app.add_subcommand("follmer", "simulate the entropic bridge");
  std::string follmer_config;
  bool diagnose = false;
  follmer->add_option("config", follmer_config, "config path or 'default'")->required();
  follmer->add_flag("--diagnose", diagnose, "run terminal-law and identity checks");

  auto* check_cmd = app.add_subcommand("check", "run the inequality suite");
  std::string check_config;
  std::vector<std::string> only;
  check_cmd->add_option("config", check_config, "config path or 'default'")->required();
  check_cmd->add_option("--only", only, "comma-separated check names")
      ->delimiter(',');

  auto* report_cmd = app.add_subcommand("report", "re-render a machine report");
  std::string report_path;
  report_cmd->add_option("path", report_path, "machine report to render")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and friends exit 0; every genuine usage error maps to 2.
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (measure->parsed())
      return run_measure(load_with_overrides(measure_config, g), functional);
    if (follmer->parsed())
      return run_follmer(load_with_overrides(follmer_config, g), diagnose);
    if (check_cmd->parsed())
      return run_check(load_with_overrides(check_config, g), only);
    if (report_cmd->parsed()) return run_report(report_path);
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
