#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

#include "tiltlab/measures.hpp"
#include "tiltlab/report.hpp"
#include "tiltlab/sampling.hpp"

namespace tiltlab {

// Kantorovich dual potentials for the half-squared-distance cost:
// feasible when phi(x) + psi(y) <= |x-y|^2/2 + slack everywhere.
struct DualPair {
  std::function<double(std::span<const double>)> phi;
  std::function<double(std::span<const double>)> psi;
  double slack_tolerance = 1e-9;
};

struct CouplingPlan {
  int dim = 0;
  std::size_t count = 0;                  // points per side
  std::vector<double> left_points;        // row-major count x dim
  std::vector<double> right_points;       // row-major count x dim
  std::vector<std::size_t> assignment;    // exact method: right index per left
  std::vector<double> matrix;             // entropic method: row-major masses
  double cost = 0.0;                      // squared-distance transport cost
};

struct ExactAssignment {};
struct Entropic {
  double epsilon = 0.01;
  double marginal_tolerance = 1e-8;
  std::size_t max_iterations = 200000;
};
using W2Method = std::variant<ExactAssignment, Entropic>;

struct W2Result {
  double cost = 0.0;  // exact: plan cost; entropic: debiased (divergence) cost
  CouplingPlan plan;
};

// Squared quadratic Wasserstein distance between Gaussians, full Bures form.
// Covariances are row-major n x n, symmetric positive semidefinite.
double w2_gaussian_closed_form(std::span<const double> mean1,
                               std::span<const double> cov1,
                               std::span<const double> mean2,
                               std::span<const double> cov2);

W2Result w2_empirical(const SampleBatch& left, const SampleBatch& right,
                      const W2Method& method);

// One-dimensional empirical W2^2 via the sorted (monotone) coupling.
Estimate w2sq_sorted_1d(const SampleBatch& a, const SampleBatch& b);

// Empirical W2^2 between two equal-count batches via exact assignment.
Estimate w2sq_assignment(const SampleBatch& a, const SampleBatch& b);

// Positive finite-sample bias credit for empirical W2^2 estimates; zero for
// analytic values.
double empirical_w2_bias_allowance(const Estimate& w2sq, int dim);

// The dual candidate induced by the gradient set: phi(x) = sup_t [<x,t> -
// |t|^2/2] over the hull, psi(y) = -max over extreme points of <y,t>.
// Requires singleton or finite extreme points.
DualPair dual_candidate_from_gradient_set(const Potential& p);

struct DualFeasibilityReport {
  double max_violation = 0.0;
  bool pass = false;
  std::size_t pairs_checked = 0;
  double slack_tolerance = 0.0;
};

// Exhaustive feasibility scan over all left x right point pairs.
DualFeasibilityReport check_dual_feasibility(const DualPair& pair,
                                             const SampleBatch& left,
                                             const SampleBatch& right);

// Empirical dual objective: mean phi over the nu batch plus mean psi over the
// gamma batch (weak duality: at most half the empirical W2^2).
double dual_objective(const DualPair& pair, const SampleBatch& nu_batch,
                      const SampleBatch& gamma_batch);

InequalityReport check_talagrand(const TiltedMeasure& m, const Estimate& kl,
                                 const Estimate& w2sq);

// Transport inequality with constant C: w2_sq / (2C) <= kl. C = 1 reduces to
// check_talagrand.
InequalityReport check_transport_general(const TiltedMeasure& m, double C,
                                         const Estimate& kl, const Estimate& w2sq);

// log int e^{Z/C} dgamma <= width / C for Z the quadratic dual transform of
// the gradient set, evaluated on a shared gamma batch.
InequalityReport check_vitale(const Potential& p, const SampleBatch& gamma_batch,
                              double C = 1.0);

// Sparse (i, j, mass) triples.
void write_coupling_text(std::ostream& os, const CouplingPlan& plan);

}  // namespace tiltlab
