#include "tiltlab/measures.hpp"

#include <algorithm>
#include <cmath>

#include "tiltlab/errors.hpp"
#include "tiltlab/math_util.hpp"

namespace tiltlab {

const char* method_name(Method m) {
  switch (m) {
    case Method::Analytic: return "analytic";
    case Method::MonteCarlo: return "monte_carlo";
    case Method::Quadrature: return "quadrature";
    case Method::HeuristicBound: return "heuristic_bound";
  }
  return "?";
}

const char* bound_direction_name(BoundDirection d) {
  switch (d) {
    case BoundDirection::Exact: return "exact";
    case BoundDirection::Lower: return "lower";
    case BoundDirection::Upper: return "upper";
  }
  return "?";
}

namespace {

void require_nu(const SampleBatch& batch) {
  if (batch.source == BatchSource::Gamma)
    throw WrongMeasureError("estimator needs a batch drawn from nu, got gamma");
  if (batch.count == 0) throw ParameterError("empty batch");
}

void require_gamma(const SampleBatch& batch) {
  if (batch.source != BatchSource::Gamma)
    throw WrongMeasureError("width needs a batch drawn from gamma");
  if (batch.count == 0) throw ParameterError("empty batch");
}

double effective_count(const SampleBatch& batch) {
  if (batch.source == BatchSource::NuMala)
    return std::max(1.0, std::min(batch.ess, static_cast<double>(batch.count)));
  return static_cast<double>(batch.count);
}

Estimate mc_estimate(std::span<const double> column, const SampleBatch& batch,
                     double offset = 0.0) {
  const MeanSE m = mean_se(column);
  Estimate e;
  e.value = m.mean + offset;
  // mean_se assumes i.i.d.; rescale by the batch's effective sample count so
  // autocorrelated MALA output carries an honest error bar.
  e.std_error = m.se * std::sqrt(static_cast<double>(batch.count) /
                                 effective_count(batch));
  e.sample_count = batch.count;
  e.method = Method::MonteCarlo;
  return e;
}

}  // namespace

NuColumns nu_columns(const Potential& p, const SampleBatch& batch) {
  if (batch.dim != p.dim()) throw DimensionError("batch dimension mismatch");
  NuColumns c;
  c.f.resize(batch.count);
  c.grad_sq.resize(batch.count);
  c.laplacian.resize(batch.count);
  c.x_grad.resize(batch.count);
  c.second_moment.resize(batch.count);
  std::vector<double> grad(p.dim());
  for (std::size_t i = 0; i < batch.count; ++i) {
    const auto x = batch.point(i);
    c.f[i] = p.value(x);
    p.gradient(x, grad);
    c.grad_sq[i] = norm_sq(grad);
    c.laplacian[i] = p.laplacian(x);
    c.x_grad[i] = dot(x, grad);
    c.second_moment[i] = norm_sq(x);
  }
  return c;
}

Estimate estimate_kl(const TiltedMeasure& m, const SampleBatch& batch) {
  require_nu(batch);
  std::vector<double> f(batch.count);
  for (std::size_t i = 0; i < batch.count; ++i) f[i] = m.p().value(batch.point(i));
  return mc_estimate(f, batch, -m.p().log_normalizer());
}

Estimate estimate_fisher(const TiltedMeasure& m, const SampleBatch& batch) {
  require_nu(batch);
  std::vector<double> g2(batch.count);
  std::vector<double> grad(m.dim());
  for (std::size_t i = 0; i < batch.count; ++i) {
    m.p().gradient(batch.point(i), grad);
    g2[i] = norm_sq(grad);
  }
  return mc_estimate(g2, batch);
}

Estimate estimate_fisher_ibp(const TiltedMeasure& m, const SampleBatch& batch) {
  require_nu(batch);
  std::vector<double> v(batch.count);
  std::vector<double> grad(m.dim());
  for (std::size_t i = 0; i < batch.count; ++i) {
    const auto x = batch.point(i);
    m.p().gradient(x, grad);
    v[i] = dot(x, grad) - m.p().laplacian(x);
  }
  return mc_estimate(v, batch);
}

Estimate estimate_second_moment(const TiltedMeasure& m, const SampleBatch& batch) {
  require_nu(batch);
  std::vector<double> v(batch.count);
  for (std::size_t i = 0; i < batch.count; ++i) v[i] = norm_sq(batch.point(i));
  return mc_estimate(v, batch);
}

Estimate estimate_entropy_gap(const TiltedMeasure& m, const SampleBatch& batch) {
  require_nu(batch);
  const double n = static_cast<double>(m.dim());
  std::vector<double> v(batch.count);
  for (std::size_t i = 0; i < batch.count; ++i) {
    const auto x = batch.point(i);
    v[i] = 0.5 * (norm_sq(x) - n) - m.p().value(x);
  }
  return mc_estimate(v, batch, m.p().log_normalizer());
}

namespace {

double heuristic_sup_direction(const Potential& p, std::span<const double> y,
                               const SearchConfig& cfg, RngStream& rng) {
  const int n = p.dim();
  std::vector<double> grad(n);
  auto objective = [&](std::span<const double> x) {
    p.gradient(x, grad);
    return -dot(y, grad);
  };
  NelderMeadOptions opts;
  opts.max_iter = cfg.steps;
  double best = -1e300;
  std::vector<double> x0(n);
  for (int r = 0; r < cfg.restarts; ++r) {
    for (double& c : x0) c = cfg.box_radius * (2.0 * rng.uniform() - 1.0);
    const NelderMeadResult res = nelder_mead(objective, x0, cfg.step_size, opts);
    best = std::max(best, -res.value);
  }
  return best;
}

}  // namespace

Estimate estimate_width(const Potential& p, const SampleBatch& gamma_batch,
                        RngStream* search_rng) {
  require_gamma(gamma_batch);
  if (gamma_batch.dim != p.dim()) throw DimensionError("batch dimension mismatch");
  const GradientSetDescriptor d = p.gradient_set();
  if (d.unbounded)
    throw NotApplicableError("gradient set is unbounded; width is not finite");

  std::vector<double> sup(gamma_batch.count);
  bool heuristic = false;
  switch (d.kind) {
    case GradientSetKind::Singleton:
      for (std::size_t i = 0; i < gamma_batch.count; ++i)
        sup[i] = dot(gamma_batch.point(i), d.extreme_points.at(0));
      break;
    case GradientSetKind::FiniteExtremePoints:
      for (std::size_t i = 0; i < gamma_batch.count; ++i) {
        const auto y = gamma_batch.point(i);
        double best = -1e300;
        for (const auto& t : d.extreme_points) best = std::max(best, dot(y, t));
        sup[i] = best;
      }
      break;
    case GradientSetKind::IntervalBox:
      for (std::size_t i = 0; i < gamma_batch.count; ++i) {
        const auto y = gamma_batch.point(i);
        double acc = 0.0;
        for (int j = 0; j < p.dim(); ++j)
          acc += std::max(y[j] * d.box_lower.at(j), y[j] * d.box_upper.at(j));
        sup[i] = acc;
      }
      break;
    case GradientSetKind::HeuristicSearch: {
      heuristic = true;
      RngStream local(0xD1CE, make_stream_id(0, 6));
      RngStream& rng = search_rng ? *search_rng : local;
      for (std::size_t i = 0; i < gamma_batch.count; ++i)
        sup[i] = heuristic_sup_direction(p, gamma_batch.point(i), d.search, rng);
      break;
    }
  }
  Estimate e = mc_estimate(sup, gamma_batch);
  if (heuristic) {
    e.method = Method::HeuristicBound;
    e.bound = BoundDirection::Lower;
  }
  return e;
}

Estimate estimate_M(const Potential& p) {
  Estimate e;
  e.sample_count = 0;
  if (const auto m = p.analytic_m()) {
    e.value = *m;
    e.method = Method::Analytic;
    return e;
  }
  // Multi-start minimization of the laplacian. Any located minimum only upper
  // bounds inf(laplacian), so the negated value is a lower bound on M.
  const GradientSetDescriptor d = p.gradient_set();
  SearchConfig cfg = d.search;
  double box = cfg.box_radius;
  if (d.kind == GradientSetKind::FiniteExtremePoints) {
    double max_norm = 0.0;
    for (const auto& t : d.extreme_points) max_norm = std::max(max_norm, norm(t));
    box += max_norm;
  }
  auto objective = [&](std::span<const double> x) { return p.laplacian(x); };
  NelderMeadOptions opts;
  opts.max_iter = cfg.steps;
  RngStream rng(0xD1CE, make_stream_id(0, 6, 1));
  double best = 1e300;
  std::vector<double> x0(p.dim());
  for (int r = 0; r < cfg.restarts; ++r) {
    for (double& c : x0) c = box * (2.0 * rng.uniform() - 1.0);
    const NelderMeadResult res = nelder_mead(objective, x0, cfg.step_size, opts);
    best = std::min(best, res.value);
  }
  e.value = -best;
  e.method = Method::HeuristicBound;
  e.bound = BoundDirection::Lower;
  return e;
}

std::optional<Estimate> closed_form_estimate(const Potential& p, Functional fn) {
  const auto v = p.closed_form(fn);
  if (!v) return std::nullopt;
  Estimate e;
  e.value = *v;
  e.method = Method::Analytic;
  return e;
}

namespace {

double column_for(const Potential& p, Functional fn, std::span<const double> x,
                  std::vector<double>& grad) {
  switch (fn) {
    case Functional::KL: return p.value(x) - p.log_normalizer();
    case Functional::Fisher:
      p.gradient(x, grad);
      return norm_sq(grad);
    case Functional::LaplacianMean: return p.laplacian(x);
    case Functional::XGrad:
      p.gradient(x, grad);
      return dot(x, grad);
    case Functional::SecondMoment: return norm_sq(x);
    case Functional::EntropyGap:
      return 0.5 * (norm_sq(x) - static_cast<double>(p.dim())) - p.value(x) +
             p.log_normalizer();
    default:
      throw UnsupportedError("functional has no per-sample nu integrand");
  }
}

}  // namespace

Estimate estimate_to_se(const TiltedMeasure& m, Functional fn, double target_se,
                        RngStream& rng, std::size_t cap) {
  if (target_se <= 0.0) throw ParameterError("target standard error must be positive");
  const Potential& p = m.p();
  const bool exact = p.capabilities().exact_sampler;
  std::vector<double> values;
  std::vector<double> grad(p.dim());
  std::size_t chunk = 100000;
  double ess_scale = 1.0;
  while (true) {
    const SampleBatch batch =
        exact ? sample_nu_exact(p, chunk, rng)
              : sample_nu_mala(p, chunk, 10000, 0.0, rng);
    if (!exact)
      ess_scale = std::sqrt(static_cast<double>(batch.count) /
                            std::max(1.0, batch.ess));
    values.reserve(values.size() + batch.count);
    for (std::size_t i = 0; i < batch.count; ++i)
      values.push_back(column_for(p, fn, batch.point(i), grad));
    const MeanSE ms = mean_se(values);
    const double se = ms.se * ess_scale;
    if (se <= target_se || values.size() >= cap) {
      Estimate e;
      e.value = ms.mean;
      e.std_error = se;
      e.sample_count = values.size();
      e.method = Method::MonteCarlo;
      return e;
    }
    chunk = std::min(values.size(), cap - values.size());
  }
}

}  // namespace tiltlab
