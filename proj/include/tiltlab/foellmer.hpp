#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tiltlab/measures.hpp"
#include "tiltlab/potential.hpp"
#include "tiltlab/rng.hpp"
#include "tiltlab/sampling.hpp"

namespace tiltlab {

// Drift of the entropy-optimal interpolation between Brownian motion and the
// tilted measure. Closed-form (softmax over mixture centers) where the family
// supports it, nested Monte Carlo otherwise.
enum class DriftMode { AnalyticMixture, NestedMC };

struct DriftSpec {
  DriftMode mode = DriftMode::AnalyticMixture;
  const Potential* potential = nullptr;
  int inner_count = 0;          // NestedMC only
  mutable RngStream inner_rng;  // NestedMC only

  DriftSpec(DriftMode m, const Potential& p, int inner, RngStream rng)
      : mode(m), potential(&p), inner_count(inner), inner_rng(rng) {}
};

DriftSpec analytic_mixture_drift(const Potential& p);
DriftSpec nested_mc_drift(const Potential& p, int inner_count,
                          std::uint64_t seed, std::uint64_t stream_id = 0);

struct DriftValue {
  std::vector<double> value;
  double inner_se = 0.0;  // zero for the closed form
};

// v(t, x) for t in [0, 1). The terminal drift is the potential gradient and
// is written by the simulator directly.
DriftValue drift(const DriftSpec& spec, double t, std::span<const double> x);

// Euler-Maruyama ensemble on the uniform grid over [0, 1]. Arrays are laid
// out path-major: index (path, node, coordinate) with nodes 0..steps.
struct PathEnsemble {
  int dim = 0;
  int steps = 0;
  std::size_t paths = 0;
  std::vector<double> time_grid;  // steps + 1 nodes, 0 to 1
  std::vector<double> x_paths;
  std::vector<double> b_paths;
  std::vector<double> v_paths;
  std::uint64_t rng_seed = 0;
  std::uint64_t rng_stream = 0;
  std::string scheme = "euler_maruyama_uniform";

  std::span<const double> x(std::size_t path, int node) const;
  std::span<const double> b(std::size_t path, int node) const;
  std::span<const double> v(std::size_t path, int node) const;
};

using DriftCallable =
    std::function<void(double, std::span<const double>, std::span<double>)>;

PathEnsemble simulate(const DriftSpec& spec, int steps, std::size_t paths,
                      RngStream& rng);

// Same integrator with an arbitrary drift field; the stored terminal drift is
// still the potential gradient. Used for negative controls.
PathEnsemble simulate_with_drift(const Potential& p, const DriftCallable& v,
                                 int steps, std::size_t paths, RngStream& rng);

// Terminal slice as a batch (the approximate law of the endpoint).
SampleBatch terminal_batch(const PathEnsemble& ens);

struct TerminalLawReport {
  std::vector<double> ks_statistics;  // one per random projection
  double ks_critical = 0.0;           // 1% level plus the Euler allowance
  double energy_statistic = 0.0;
  double energy_threshold = 0.0;  // permutation 1% level plus allowance
  double euler_allowance = 0.0;
  bool pass = false;
};

struct MartingaleReport {
  std::vector<double> ratios;  // |mean| / SE per probe pair, max over coords
  double max_ratio = 0.0;
  bool pass = false;
};

struct IdentityReport {
  double statistic = 0.0;
  double statistic_se = 0.0;
  double target = 0.0;
  double target_se = 0.0;
  double gap = 0.0;        // statistic - target
  double tolerance = 0.0;  // 5% of |target| + 3 combined SE
  bool pass = false;
};

// Endpoint distribution against exact draws: KS on random 1-d projections
// and an energy-distance permutation test, both at the 1% level with an
// O(1/steps) discretization allowance.
TerminalLawReport diag_terminal_law(const PathEnsemble& ens,
                                    const SampleBatch& exact);

// Drift-martingale probe over ten fixed grid pairs; PASS iff every
// standardized mean increment is at most 4.
MartingaleReport diag_martingale(const PathEnsemble& ens);

// Expected path energy against twice the divergence.
IdentityReport diag_energy_identity(const PathEnsemble& ens, const Estimate& kl);

// Terminal coupling product against twice the divergence.
IdentityReport diag_coupling_identity(const PathEnsemble& ens,
                                      const Estimate& kl);

// Binary container: fixed header plus little-endian float64 arrays.
void write_path_ensemble(std::ostream& os, const PathEnsemble& ens);
PathEnsemble read_path_ensemble(std::istream& is);

// One line per path holding the terminal coordinates.
void write_terminal_text(std::ostream& os, const PathEnsemble& ens);

}  // namespace tiltlab
