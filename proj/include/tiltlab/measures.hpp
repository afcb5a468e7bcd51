#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "tiltlab/potential.hpp"
#include "tiltlab/rng.hpp"
#include "tiltlab/sampling.hpp"

namespace tiltlab {

enum class Method { Analytic, MonteCarlo, Quadrature, HeuristicBound };
enum class BoundDirection { Exact, Lower, Upper };

const char* method_name(Method m);
const char* bound_direction_name(BoundDirection d);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t sample_count = 0;
  Method method = Method::MonteCarlo;
  BoundDirection bound = BoundDirection::Exact;
};

// dnu = e^f dgamma for the wrapped potential.
struct TiltedMeasure {
  const Potential* potential = nullptr;

  explicit TiltedMeasure(const Potential& p) : potential(&p) {}
  const Potential& p() const { return *potential; }
  int dim() const { return potential->dim(); }
};

// Per-sample integrand columns over one nu batch. Sharing these across
// estimators makes algebraic identities between them hold draw-by-draw.
struct NuColumns {
  std::vector<double> f;
  std::vector<double> grad_sq;
  std::vector<double> laplacian;
  std::vector<double> x_grad;
  std::vector<double> second_moment;
};

NuColumns nu_columns(const Potential& p, const SampleBatch& batch);

Estimate estimate_kl(const TiltedMeasure& m, const SampleBatch& batch);
Estimate estimate_fisher(const TiltedMeasure& m, const SampleBatch& batch);
// Integration-by-parts form: mean of <x, grad f> - laplacian f.
Estimate estimate_fisher_ibp(const TiltedMeasure& m, const SampleBatch& batch);
Estimate estimate_second_moment(const TiltedMeasure& m, const SampleBatch& batch);
Estimate estimate_entropy_gap(const TiltedMeasure& m, const SampleBatch& batch);

// Gaussian width of the gradient set, from a gamma batch. Heuristic-search
// descriptors give a certified-direction lower bound; bounded descriptors give
// plain Monte Carlo. search_rng seeds the multi-start ascent (a fixed internal
// stream is used when absent).
Estimate estimate_width(const Potential& p, const SampleBatch& gamma_batch,
                        RngStream* search_rng = nullptr);

// -inf laplacian: analytic for linear/scaled-quadratic families, multi-start
// minimization (lower-bound direction) otherwise.
Estimate estimate_M(const Potential& p);

// Closed form as an Estimate when the family has one.
std::optional<Estimate> closed_form_estimate(const Potential& p, Functional fn);

// Grows a nu batch (exact sampler when available, MALA otherwise) until the
// requested functional's standard error drops to target_se or the sample cap
// is reached.
Estimate estimate_to_se(const TiltedMeasure& m, Functional fn, double target_se,
                        RngStream& rng, std::size_t cap = 10000000);

}  // namespace tiltlab
