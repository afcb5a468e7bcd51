#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "tiltlab/potential.hpp"
#include "tiltlab/rng.hpp"

namespace tiltlab {

enum class BatchSource { Gamma, NuExact, NuMala };

const char* batch_source_name(BatchSource s);

// Row-major count x dim sample matrix with sampler diagnostics. For i.i.d.
// sources the effective sample size equals the count and acceptance is 1.
struct SampleBatch {
  int dim = 0;
  std::size_t count = 0;
  std::vector<double> data;
  BatchSource source = BatchSource::Gamma;
  double acceptance_rate = 1.0;
  double ess = 0.0;
  bool tuning_warning = false;

  std::span<const double> point(std::size_t i) const {
    return {data.data() + i * static_cast<std::size_t>(dim),
            static_cast<std::size_t>(dim)};
  }
  std::span<double> point(std::size_t i) {
    return {data.data() + i * static_cast<std::size_t>(dim),
            static_cast<std::size_t>(dim)};
  }
};

SampleBatch sample_gamma(int dim, std::size_t count, RngStream& rng);

// Requires the exact-sampler capability.
SampleBatch sample_nu_exact(const Potential& p, std::size_t count, RngStream& rng);

// Metropolis-adjusted Langevin chain targeting exp(f(x) - |x|^2/2).
// step_size == 0 auto-tunes during burn-in toward acceptance 0.574.
SampleBatch sample_nu_mala(const Potential& p, std::size_t count, std::size_t burn_in,
                           double step_size, RngStream& rng, int thin = 5);

// --- distributional diagnostics -------------------------------------------

double ks_statistic_one_sample(std::vector<double> values,
                               const std::function<double(double)>& cdf);
double ks_statistic_two_sample(std::vector<double> a, std::vector<double> b);

// 1% critical values of the Kolmogorov distribution (asymptotic).
double ks_critical_one_sample(std::size_t n);
double ks_critical_two_sample(std::size_t n, std::size_t m);

// Szekely-Rizzo energy distance between two point clouds (Euclidean norm).
double energy_distance(const SampleBatch& a, const SampleBatch& b);

struct PermutationTestResult {
  double statistic = 0.0;
  double threshold = 0.0;  // largest permuted statistic
  double p_value = 1.0;
  bool reject = false;
};

// Permutation test for equality of distributions using energy distance.
// Batches larger than `cap` points are subsampled deterministically from rng.
PermutationTestResult energy_permutation_test(const SampleBatch& a,
                                              const SampleBatch& b, RngStream& rng,
                                              int permutations = 99,
                                              std::size_t cap = 2000);

// --- text interchange -------------------------------------------------------

// One point per line, space-separated, 17 significant digits (lossless for
// IEEE doubles).
void write_batch_text(std::ostream& os, const SampleBatch& batch);
SampleBatch read_batch_text(std::istream& is);

}  // namespace tiltlab
