#include "tiltlab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tiltlab/errors.hpp"
#include "tiltlab/math_util.hpp"

namespace tiltlab {

namespace {

struct Grid {
  std::vector<double> nodes;
  std::vector<double> weights;  // trapezoid weights, endpoints halved
};

Grid build_axis(const Potential& p, const GridSpec& spec) {
  const int n = p.dim();
  int m = spec.points_per_axis;
  if (m == 0) m = (n == 1) ? 4001 : 2001;
  if (m < 2) throw ParameterError("grid needs at least two points per axis");
  double r = spec.radius;
  if (r == 0.0) r = p.suggested_radius();
  if (r <= 0.0) throw ParameterError("grid radius must be positive");

  Grid g;
  g.nodes.resize(m);
  g.weights.resize(m);
  const double h = 2.0 * r / (m - 1);
  for (int i = 0; i < m; ++i) {
    g.nodes[i] = -r + h * i;
    g.weights[i] = (i == 0 || i == m - 1) ? 0.5 * h : h;
  }
  return g;
}

// One-dimensional gamma integral of sup_{t in [lo,hi]} y*t. The integrand has
// a kink at the origin, so split into sup = hi*y^+ - lo*y^- and integrate the
// smooth half-line piece y*pdf(y) with a trapezoid plus the Euler-Maclaurin
// endpoint correction, which restores O(h^4) accuracy.
double width_interval_1d(double lo, double hi, const Grid& g) {
  const double r = g.nodes.back();
  const std::size_t m = (g.nodes.size() + 1) / 2;
  const double h = r / static_cast<double>(m - 1);
  double t = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double y = h * static_cast<double>(i);
    const double w = (i == 0 || i == m - 1) ? 0.5 * h : h;
    t += w * y * normal_pdf(y);
  }
  auto dg = [](double y) { return normal_pdf(y) * (1.0 - y * y); };
  t -= h * h / 12.0 * (dg(r) - dg(0.0));
  return (hi - lo) * t;
}

double width_1d(const Potential& p, const Grid& g) {
  if (p.dim() != 1)
    throw UnsupportedError("quadrature width is available only in one dimension");
  const GradientSetDescriptor d = p.gradient_set();
  if (d.unbounded)
    throw NotApplicableError("gradient set is unbounded; width is not finite");
  double lo = 0.0, hi = 0.0;
  switch (d.kind) {
    case GradientSetKind::Singleton:
      lo = hi = d.extreme_points.at(0).at(0);
      break;
    case GradientSetKind::FiniteExtremePoints: {
      lo = hi = d.extreme_points.at(0).at(0);
      for (const auto& pt : d.extreme_points) {
        lo = std::min(lo, pt.at(0));
        hi = std::max(hi, pt.at(0));
      }
      break;
    }
    case GradientSetKind::IntervalBox:
      lo = d.box_lower.at(0);
      hi = d.box_upper.at(0);
      break;
    case GradientSetKind::HeuristicSearch:
      throw NotApplicableError(
          "gradient set has no certified bounds; width oracle unavailable");
  }
  return width_interval_1d(lo, hi, g);
}

}  // namespace

QuadratureProfile quadrature_profile(const Potential& p, GridSpec spec) {
  const int n = p.dim();
  if (n > 2)
    throw UnsupportedError("quadrature oracle supports dimension <= 2");
  const Grid g = build_axis(p, spec);
  const std::size_t m = g.nodes.size();

  // Accumulate unnormalized nu-integrals against exp(f) d(gamma); a final
  // division by the measured mass makes every expectation exact even when the
  // potential's stored normalizer is imperfect.
  double mass = 0.0;
  double sum_f = 0.0, sum_fisher = 0.0, sum_lap = 0.0, sum_xg = 0.0, sum_x2 = 0.0;

  std::vector<double> x(n);
  std::vector<double> grad(n);
  const std::size_t rows = (n == 2) ? m : 1;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double wgamma;
      if (n == 2) {
        x[0] = g.nodes[i];
        x[1] = g.nodes[j];
        wgamma = g.weights[i] * g.weights[j] * normal_pdf(x[0]) * normal_pdf(x[1]);
      } else {
        x[0] = g.nodes[j];
        wgamma = g.weights[j] * normal_pdf(x[0]);
      }
      const double f = p.value(x);
      const double w = wgamma * std::exp(f);
      p.gradient(x, grad);
      mass += w;
      sum_f += w * f;
      sum_fisher += w * norm_sq(grad);
      sum_lap += w * p.laplacian(x);
      sum_xg += w * dot(x, grad);
      sum_x2 += w * norm_sq(x);
    }
  }

  QuadratureProfile out;
  out.log_normalizer = std::log(mass);
  out.kl = sum_f / mass - out.log_normalizer;
  out.fisher = sum_fisher / mass;
  out.laplacian_mean = sum_lap / mass;
  out.x_grad = sum_xg / mass;
  out.second_moment = sum_x2 / mass;
  out.entropy_gap = 0.5 * (out.second_moment - n) - out.kl;
  return out;
}

double quadrature_oracle(const Potential& p, Functional functional, GridSpec spec) {
  if (p.dim() > 2)
    throw UnsupportedError("quadrature oracle supports dimension <= 2");
  if (functional == Functional::Width) {
    const Grid g = build_axis(p, spec);
    return width_1d(p, g);
  }
  const QuadratureProfile prof = quadrature_profile(p, spec);
  switch (functional) {
    case Functional::KL: return prof.kl;
    case Functional::Fisher: return prof.fisher;
    case Functional::LaplacianMean: return prof.laplacian_mean;
    case Functional::XGrad: return prof.x_grad;
    case Functional::SecondMoment: return prof.second_moment;
    case Functional::EntropyGap: return prof.entropy_gap;
    case Functional::LogNormalizer: return prof.log_normalizer;
    case Functional::Width: break;  // handled above
  }
  throw ParameterError("unknown functional");
}

}  // namespace tiltlab
