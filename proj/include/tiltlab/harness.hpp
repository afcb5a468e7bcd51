#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tiltlab/measures.hpp"
#include "tiltlab/potential.hpp"
#include "tiltlab/report.hpp"
#include "tiltlab/sampling.hpp"

namespace tiltlab {

struct InstanceSpec {
  std::string name;
  std::shared_ptr<Potential> potential;
};

struct SuiteConfig {
  std::vector<InstanceSpec> instances;
  std::vector<std::uint64_t> seeds = {1};
  std::size_t samples = 100000;
  std::size_t w2_pair_count = 8192;        // sorted-coupling size, 1-d
  std::size_t w2_assignment_count = 1024;  // assignment size, n >= 2
  int follmer_steps = 400;
  std::size_t follmer_paths = 10000;
  std::vector<CheckName> selection;  // empty means every check
  bool select_none = false;          // an explicitly empty selection
  std::string out_path;
  double width_corruption = 0.0;  // test hook: shifts the width estimate
};

// The eight stock instances the suite ships with.
SuiteConfig default_matrix();

// Plain-text config: key/value lines plus embedded potential blocks.
// Throws ParseError with line diagnostics.
SuiteConfig parse_suite_config(std::istream& in);
SuiteConfig parse_suite_config(const std::string& text);

// Per-instance estimation state shared by every check: one tilted batch, one
// Gaussian batch, the per-draw integrand columns, and the policy-selected
// terms. Building it is the expensive step; checks are pure reductions.
struct SharedBatches {
  SampleBatch nu;
  SampleBatch gamma;
  NuColumns cols;
  Estimate kl, fisher, lap_mean, x_grad, second_moment, entropy_gap;
  std::optional<Estimate> width;   // absent when the set is unbounded or the
  std::string width_note;          // search is only a heuristic lower bound
  std::optional<Estimate> m_term;  // exact M or a safe upper bound
  std::string m_note;
  std::optional<Estimate> w2sq;  // closed form or empirical squared distance
  std::string w2_note;
};

SharedBatches make_shared_batches(const TiltedMeasure& m, const SuiteConfig& cfg,
                                  std::uint64_t seed,
                                  std::uint32_t instance_index);

// One named inequality evaluated over the shared state.
InequalityReport check(CheckName name, const TiltedMeasure& m,
                       const SharedBatches& shared);

std::vector<CheckName> all_checks();

struct InstanceRun {
  std::string instance;
  int dim = 0;
  std::uint64_t seed = 0;
  std::vector<InequalityReport> checks;
};

struct SuiteReport {
  std::size_t samples = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> check_names;
  double width_corruption = 0.0;
  std::vector<InstanceRun> runs;
  int exit_code = 0;  // 1 iff any applicable check fails

  std::string machine_report() const;  // deterministic structured text
  std::string console_table() const;   // fixed-width summary
};

SuiteReport run_suite(const SuiteConfig& config);

}  // namespace tiltlab
