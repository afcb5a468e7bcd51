#include "tiltlab/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "tiltlab/errors.hpp"
#include "tiltlab/math_util.hpp"

namespace tiltlab {

const char* batch_source_name(BatchSource s) {
  switch (s) {
    case BatchSource::Gamma: return "gamma";
    case BatchSource::NuExact: return "nu_exact";
    case BatchSource::NuMala: return "nu_mala";
  }
  return "?";
}

SampleBatch sample_gamma(int dim, std::size_t count, RngStream& rng) {
  if (dim < 1) throw ParameterError("dimension must be positive");
  if (count < 1) throw ParameterError("count must be positive");
  SampleBatch b;
  b.dim = dim;
  b.count = count;
  b.source = BatchSource::Gamma;
  b.data.resize(count * static_cast<std::size_t>(dim));
  rng.fill_gaussian(b.data);
  b.ess = static_cast<double>(count);
  return b;
}

SampleBatch sample_nu_exact(const Potential& p, std::size_t count, RngStream& rng) {
  if (count < 1) throw ParameterError("count must be positive");
  if (!p.capabilities().exact_sampler)
    throw UnsupportedError("family has no exact sampler");
  SampleBatch b;
  b.dim = p.dim();
  b.count = count;
  b.source = BatchSource::NuExact;
  b.data.resize(count * static_cast<std::size_t>(p.dim()));
  for (std::size_t i = 0; i < count; ++i) p.sample_exact(rng, b.point(i));
  b.ess = static_cast<double>(count);
  return b;
}

namespace {

double target_log_density(const Potential& p, std::span<const double> x) {
  return p.value(x) - 0.5 * norm_sq(x);
}

// Geyer initial-positive-sequence effective sample size from a scalar series.
double geyer_ess(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 4) return static_cast<double>(n);
  const double mean =
      std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = series[i] - mean;
  double c0 = 0.0;
  for (double v : centered) c0 += v * v;
  c0 /= static_cast<double>(n);
  if (c0 <= 0.0) return static_cast<double>(n);

  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += centered[i] * centered[i + lag];
    return acc / static_cast<double>(n);
  };

  double tau = 1.0;  // integrated autocorrelation time, 1 + 2 * sum(rho)
  for (std::size_t m = 0;; ++m) {
    const std::size_t l1 = 2 * m + 1, l2 = 2 * m + 2;
    if (l2 + 2 >= n) break;
    const double pair = (autocov(l1) + autocov(l2)) / c0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
    if (m > 1000) break;
  }
  return std::max(1.0, static_cast<double>(n) / tau);
}

}  // namespace

SampleBatch sample_nu_mala(const Potential& p, std::size_t count, std::size_t burn_in,
                           double step_size, RngStream& rng, int thin) {
  if (count < 1) throw ParameterError("count must be positive");
  if (thin < 1) throw ParameterError("thinning factor must be positive");
  if (step_size < 0.0) throw ParameterError("step size must be nonnegative");
  const int n = p.dim();
  const bool tune = (step_size == 0.0);
  double tau = tune ? 0.25 : step_size;

  std::vector<double> x(n, 0.0), grad(n), prop(n), prop_grad(n), noise(n);
  double lx = target_log_density(p, x);
  p.gradient(x, grad);
  for (int j = 0; j < n; ++j) grad[j] -= x[j];

  auto mala_step = [&](bool adapt, std::size_t k) -> double {
    rng.fill_gaussian(noise);
    const double s = std::sqrt(2.0 * tau);
    for (int j = 0; j < n; ++j) prop[j] = x[j] + tau * grad[j] + s * noise[j];
    const double lp = target_log_density(p, prop);
    p.gradient(prop, prop_grad);
    for (int j = 0; j < n; ++j) prop_grad[j] -= prop[j];
    // log q(x | prop) - log q(prop | x)
    double fwd = 0.0, bwd = 0.0;
    for (int j = 0; j < n; ++j) {
      const double df = prop[j] - x[j] - tau * grad[j];
      const double db = x[j] - prop[j] - tau * prop_grad[j];
      fwd += df * df;
      bwd += db * db;
    }
    const double log_alpha = lp - lx + (fwd - bwd) / (4.0 * tau);
    const double alpha = std::min(1.0, std::exp(std::min(0.0, log_alpha)));
    if (rng.uniform() <= alpha) {
      x = prop;
      lx = lp;
      grad = prop_grad;
    }
    if (adapt) {
      const double gain = std::pow(static_cast<double>(k + 1), -0.6);
      tau *= std::exp(gain * (alpha - 0.574));
      tau = std::clamp(tau, 1e-8, 1e4);
    }
    return alpha;
  };

  for (std::size_t k = 0; k < burn_in; ++k) mala_step(tune, k);

  SampleBatch b;
  b.dim = n;
  b.count = count;
  b.source = BatchSource::NuMala;
  b.data.resize(count * static_cast<std::size_t>(n));
  std::vector<double> fx(count);
  double acc_sum = 0.0;
  std::size_t acc_steps = 0;
  for (std::size_t i = 0; i < count; ++i) {
    for (int t = 0; t < thin; ++t) {
      acc_sum += mala_step(false, 0);
      ++acc_steps;
    }
    std::copy(x.begin(), x.end(), b.point(i).begin());
    fx[i] = p.value(x);
  }
  b.acceptance_rate = acc_sum / static_cast<double>(acc_steps);
  b.ess = geyer_ess(fx);
  if (b.acceptance_rate < 0.1 || b.acceptance_rate > 0.9) {
    b.tuning_warning = true;
    std::fprintf(stderr,
                 "warning: MALA acceptance rate %.3f outside [0.1, 0.9] "
                 "(step size %.3g)\n",
                 b.acceptance_rate, tau);
  }
  return b;
}

double ks_statistic_one_sample(std::vector<double> values,
                               const std::function<double(double)>& cdf) {
  if (values.empty()) throw ParameterError("empty sample");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double c = cdf(values[i]);
    d = std::max(d, std::abs(c - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - c));
  }
  return d;
}

double ks_statistic_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ParameterError("empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) {
      ++i;
    } else {
      ++j;
    }
    d = std::max(d, std::abs(static_cast<double>(i) / na -
                             static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical_one_sample(std::size_t n) {
  return kKsCritical99 / std::sqrt(static_cast<double>(n));
}

double ks_critical_two_sample(std::size_t n, std::size_t m) {
  const double hm = static_cast<double>(n) * static_cast<double>(m) /
                    static_cast<double>(n + m);
  return kKsCritical99 / std::sqrt(hm);
}

namespace {

double mean_pairwise_distance(const SampleBatch& a, const SampleBatch& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.count; ++i) {
    const auto pa = a.point(i);
    for (std::size_t j = 0; j < b.count; ++j) {
      const auto pb = b.point(j);
      double d2 = 0.0;
      for (int k = 0; k < a.dim; ++k) {
        const double d = pa[k] - pb[k];
        d2 += d * d;
      }
      acc += std::sqrt(d2);
    }
  }
  return acc / (static_cast<double>(a.count) * static_cast<double>(b.count));
}

SampleBatch subsample(const SampleBatch& b, std::size_t cap, RngStream& rng) {
  if (b.count <= cap) return b;
  std::vector<std::size_t> idx(b.count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < cap; ++i) {
    const std::size_t j = i + rng.integer(b.count - i);
    std::swap(idx[i], idx[j]);
  }
  SampleBatch out;
  out.dim = b.dim;
  out.count = cap;
  out.source = b.source;
  out.acceptance_rate = b.acceptance_rate;
  out.ess = b.ess;
  out.data.resize(cap * static_cast<std::size_t>(b.dim));
  for (std::size_t i = 0; i < cap; ++i) {
    const auto src = b.point(idx[i]);
    std::copy(src.begin(), src.end(), out.point(i).begin());
  }
  return out;
}

double energy_from_points(const SampleBatch& a, const SampleBatch& b) {
  return 2.0 * mean_pairwise_distance(a, b) - mean_pairwise_distance(a, a) -
         mean_pairwise_distance(b, b);
}

}  // namespace

double energy_distance(const SampleBatch& a, const SampleBatch& b) {
  if (a.dim != b.dim) throw DimensionError("batch dimensions differ");
  if (a.count == 0 || b.count == 0) throw ParameterError("empty batch");
  return energy_from_points(a, b);
}

PermutationTestResult energy_permutation_test(const SampleBatch& a,
                                              const SampleBatch& b, RngStream& rng,
                                              int permutations, std::size_t cap) {
  if (a.dim != b.dim) throw DimensionError("batch dimensions differ");
  const SampleBatch sa = subsample(a, cap, rng);
  const SampleBatch sb = subsample(b, cap, rng);

  PermutationTestResult r;
  r.statistic = energy_from_points(sa, sb);

  // Pool and relabel.
  const std::size_t na = sa.count, total = sa.count + sb.count;
  SampleBatch pool;
  pool.dim = sa.dim;
  pool.count = total;
  pool.data.reserve(total * static_cast<std::size_t>(sa.dim));
  pool.data.insert(pool.data.end(), sa.data.begin(), sa.data.end());
  pool.data.insert(pool.data.end(), sb.data.begin(), sb.data.end());

  std::vector<std::size_t> idx(total);
  int exceed = 0;
  double max_perm = -1e300;
  for (int t = 0; t < permutations; ++t) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i + 1 < total; ++i) {
      const std::size_t j = i + rng.integer(total - i);
      std::swap(idx[i], idx[j]);
    }
    SampleBatch pa, pb;
    pa.dim = pb.dim = pool.dim;
    pa.count = na;
    pb.count = total - na;
    pa.data.resize(pa.count * static_cast<std::size_t>(pool.dim));
    pb.data.resize(pb.count * static_cast<std::size_t>(pool.dim));
    for (std::size_t i = 0; i < total; ++i) {
      const auto src = pool.point(idx[i]);
      auto dst = (i < na) ? pa.point(i) : pb.point(i - na);
      std::copy(src.begin(), src.end(), dst.begin());
    }
    const double stat = energy_from_points(pa, pb);
    max_perm = std::max(max_perm, stat);
    if (stat >= r.statistic) ++exceed;
  }
  r.threshold = max_perm;
  r.p_value = static_cast<double>(1 + exceed) / static_cast<double>(1 + permutations);
  r.reject = r.statistic > max_perm;
  return r;
}

void write_batch_text(std::ostream& os, const SampleBatch& batch) {
  char buf[32];
  for (std::size_t i = 0; i < batch.count; ++i) {
    const auto pt = batch.point(i);
    for (int j = 0; j < batch.dim; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", pt[j]);
      if (j) os << ' ';
      os << buf;
    }
    os << '\n';
  }
}

SampleBatch read_batch_text(std::istream& is) {
  SampleBatch b;
  std::string line;
  int line_number = 0;
  while (std::getline(is, line)) {
    ++line_number;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) throw ParseError("malformed numeric literal", line_number);
    if (row.empty()) continue;
    if (b.dim == 0) {
      b.dim = static_cast<int>(row.size());
    } else if (static_cast<int>(row.size()) != b.dim) {
      throw ParseError("inconsistent point dimension", line_number);
    }
    b.data.insert(b.data.end(), row.begin(), row.end());
    ++b.count;
  }
  if (b.count == 0) throw ParseError("no points found", line_number);
  b.ess = static_cast<double>(b.count);
  return b;
}

}  // namespace tiltlab
