#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace tiltlab {

// Deterministic reduction: fixed pairwise association order, independent of
// how the caller might later chunk work across lanes.
double pairwise_sum(std::span<const double> xs);

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

MeanSE mean_se(std::span<const double> xs);
double sample_variance(std::span<const double> xs);

double log_sum_exp(std::span<const double> xs);

double dot(std::span<const double> a, std::span<const double> b);
double norm_sq(std::span<const double> a);
double norm(std::span<const double> a);

double normal_pdf(double x);
double normal_cdf(double x);

// Asymptotic Kolmogorov-Smirnov critical constant at the 1% level:
// reject when KS > c / sqrt(n) (one-sample) or c * sqrt((n+m)/(n m)).
inline constexpr double kKsCritical99 = 1.6276;

struct NelderMeadOptions {
  int max_iter = 500;
  double xtol = 1e-10;
  double ftol = 1e-13;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& fn,
                             std::span<const double> x0, double scale,
                             const NelderMeadOptions& opts = {});

// Euclidean projection onto the convex hull of a small vertex set (<= 12
// vertices; exact face enumeration). Returns the projected point.
std::vector<double> project_onto_hull(std::span<const double> x,
                                      const std::vector<std::vector<double>>& vertices);

double hull_distance_sq(std::span<const double> x,
                        const std::vector<std::vector<double>>& vertices);

// In-place Gaussian elimination with partial pivoting; returns false if the
// system is numerically singular. a is n x n row-major, b has length n.
bool solve_linear(std::vector<double>& a, std::vector<double>& b, int n);

}  // namespace tiltlab
