#include "tiltlab/foellmer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

#include "tiltlab/errors.hpp"
#include "tiltlab/math_util.hpp"

namespace tiltlab {

namespace {

constexpr std::uint64_t kDiagSeed = 0xD1CE;

void check_time(double t) {
  if (!(t >= 0.0) || t >= 1.0)
    throw ParameterError("drift time must lie in [0, 1)");
}

// Softmax drift of a finite mixture: weights p_i, centers a_i, logits
// log p_i + <a_i, x> - t|a_i|^2/2, evaluated in the log domain.
void mixture_drift(const std::vector<double>& log_weights,
                   const std::vector<std::vector<double>>& centers, double t,
                   std::span<const double> x, std::span<double> out) {
  const std::size_t k = centers.size();
  std::vector<double> logits(k);
  for (std::size_t i = 0; i < k; ++i)
    logits[i] = log_weights[i] + dot(centers[i], x) -
                0.5 * t * norm_sq(centers[i]);
  const double lse = log_sum_exp(logits);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double w = std::exp(logits[i] - lse);
    for (std::size_t d = 0; d < out.size(); ++d) out[d] += w * centers[i][d];
  }
}

}  // namespace

DriftSpec analytic_mixture_drift(const Potential& p) {
  if (!p.capabilities().analytic_drift)
    throw UnsupportedError("family has no closed-form drift");
  return DriftSpec(DriftMode::AnalyticMixture, p, 0, RngStream(0, 0));
}

DriftSpec nested_mc_drift(const Potential& p, int inner_count,
                          std::uint64_t seed, std::uint64_t stream_id) {
  if (inner_count < 2)
    throw ParameterError("nested drift needs at least two inner draws");
  return DriftSpec(DriftMode::NestedMC, p, inner_count,
                   RngStream(seed, stream_id));
}

DriftValue drift(const DriftSpec& spec, double t, std::span<const double> x) {
  check_time(t);
  const Potential& p = *spec.potential;
  if (static_cast<int>(x.size()) != p.dim())
    throw DimensionError("drift input has the wrong dimension");

  DriftValue out;
  out.value.assign(x.size(), 0.0);

  if (spec.mode == DriftMode::AnalyticMixture) {
    if (const auto* lin = dynamic_cast<const LinearPotential*>(&p)) {
      out.value.assign(lin->shift().begin(), lin->shift().end());
      return out;
    }
    const auto* lse = dynamic_cast<const LogSumExpPotential*>(&p);
    if (!lse) throw UnsupportedError("family has no closed-form drift");
    std::vector<double> log_w(lse->component_count());
    for (std::size_t i = 0; i < log_w.size(); ++i)
      log_w[i] = std::log(lse->weights()[i]);
    mixture_drift(log_w, lse->centers(), t, x, out.value);
    return out;
  }

  // Nested Monte Carlo with the likelihood-ratio form: the same inner draws
  // feed numerator and denominator so the ratio noise largely cancels.
  const std::size_t k = static_cast<std::size_t>(spec.inner_count);
  const double sigma = std::sqrt(1.0 - t);
  const std::size_t n = x.size();
  std::vector<double> y(n), grad(n);
  std::vector<double> logw(k), grads(k * n);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t d = 0; d < n; ++d)
      y[d] = x[d] + sigma * spec.inner_rng.gaussian();
    logw[i] = p.value(y);
    p.gradient(y, grad);
    std::copy(grad.begin(), grad.end(), grads.begin() + i * n);
  }
  const double lse_w = log_sum_exp(logw);
  std::vector<double> w(k);
  double wbar = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    w[i] = std::exp(logw[i] - lse_w);  // normalized to max 1 scale
    wbar += w[i];
  }
  wbar /= static_cast<double>(k);
  if (!(wbar > 0.0) || !std::isfinite(wbar))
    throw ConvergenceError("nested drift weights degenerated", 0.0);

  double worst_se = 0.0;
  for (std::size_t d = 0; d < n; ++d) {
    double num = 0.0;
    for (std::size_t i = 0; i < k; ++i) num += w[i] * grads[i * n + d];
    const double r = num / (wbar * static_cast<double>(k));
    out.value[d] = r;
    // Delta-method SE of the ratio estimator.
    double s2 = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double resid = w[i] * (grads[i * n + d] - r);
      s2 += resid * resid;
    }
    s2 /= static_cast<double>(k - 1) * static_cast<double>(k);
    const double se = std::sqrt(s2) / wbar;
    worst_se = std::max(worst_se, se);
    if (!std::isfinite(r))
      throw ConvergenceError("nested drift ratio is not finite", 0.0);
  }
  out.inner_se = worst_se;
  return out;
}

std::span<const double> PathEnsemble::x(std::size_t path, int node) const {
  const std::size_t stride = static_cast<std::size_t>(steps + 1) * dim;
  return {x_paths.data() + path * stride + static_cast<std::size_t>(node) * dim,
          static_cast<std::size_t>(dim)};
}

std::span<const double> PathEnsemble::b(std::size_t path, int node) const {
  const std::size_t stride = static_cast<std::size_t>(steps + 1) * dim;
  return {b_paths.data() + path * stride + static_cast<std::size_t>(node) * dim,
          static_cast<std::size_t>(dim)};
}

std::span<const double> PathEnsemble::v(std::size_t path, int node) const {
  const std::size_t stride = static_cast<std::size_t>(steps + 1) * dim;
  return {v_paths.data() + path * stride + static_cast<std::size_t>(node) * dim,
          static_cast<std::size_t>(dim)};
}

namespace {

PathEnsemble run_euler(const Potential& p, int steps, std::size_t paths,
                       RngStream& rng,
                       const std::function<void(double, std::span<const double>,
                                                std::span<double>, std::size_t,
                                                int)>& drift_at) {
  if (steps < 2) throw ParameterError("simulate needs at least two steps");
  if (paths < 1) throw ParameterError("simulate needs at least one path");

  PathEnsemble ens;
  ens.dim = p.dim();
  ens.steps = steps;
  ens.paths = paths;
  ens.rng_seed = rng.seed();
  ens.rng_stream = rng.stream_id();
  const int nodes = steps + 1;
  const std::size_t n = static_cast<std::size_t>(ens.dim);
  ens.time_grid.resize(nodes);
  const double h = 1.0 / static_cast<double>(steps);
  for (int k = 0; k < nodes; ++k) ens.time_grid[k] = h * k;
  ens.time_grid.back() = 1.0;

  const std::size_t stride = static_cast<std::size_t>(nodes) * n;
  ens.x_paths.assign(paths * stride, 0.0);
  ens.b_paths.assign(paths * stride, 0.0);
  ens.v_paths.assign(paths * stride, 0.0);

  const double root_h = std::sqrt(h);
  std::vector<double> vcur(n), xcur(n, 0.0), bcur(n, 0.0), noise(n);
  for (std::size_t path = 0; path < paths; ++path) {
    std::fill(xcur.begin(), xcur.end(), 0.0);
    std::fill(bcur.begin(), bcur.end(), 0.0);
    double* xrow = ens.x_paths.data() + path * stride;
    double* brow = ens.b_paths.data() + path * stride;
    double* vrow = ens.v_paths.data() + path * stride;
    for (int k = 0; k < steps; ++k) {
      drift_at(ens.time_grid[k], xcur, vcur, path, k);
      std::copy(vcur.begin(), vcur.end(), vrow + static_cast<std::size_t>(k) * n);
      rng.fill_gaussian(noise);
      for (std::size_t d = 0; d < n; ++d) {
        const double db = root_h * noise[d];
        bcur[d] += db;
        xcur[d] += vcur[d] * h + db;
      }
      std::copy(xcur.begin(), xcur.end(),
                xrow + static_cast<std::size_t>(k + 1) * n);
      std::copy(bcur.begin(), bcur.end(),
                brow + static_cast<std::size_t>(k + 1) * n);
    }
    // Terminal drift is the potential gradient by definition.
    p.gradient(xcur, vcur);
    std::copy(vcur.begin(), vcur.end(),
              vrow + static_cast<std::size_t>(steps) * n);
  }
  return ens;
}

}  // namespace

PathEnsemble simulate(const DriftSpec& spec, int steps, std::size_t paths,
                      RngStream& rng) {
  return run_euler(
      *spec.potential, steps, paths, rng,
      [&spec](double t, std::span<const double> x, std::span<double> out,
              std::size_t path, int step) {
        try {
          const DriftValue v = drift(spec, t, x);
          std::copy(v.value.begin(), v.value.end(), out.begin());
        } catch (const ConvergenceError& e) {
          char buf[160];
          std::snprintf(buf, sizeof buf, "path %zu step %d: %s", path, step,
                        e.what());
          throw ConvergenceError(buf, e.residual);
        }
      });
}

PathEnsemble simulate_with_drift(const Potential& p, const DriftCallable& v,
                                 int steps, std::size_t paths, RngStream& rng) {
  PathEnsemble ens = run_euler(
      p, steps, paths, rng,
      [&v](double t, std::span<const double> x, std::span<double> out,
           std::size_t, int) { v(t, x, out); });
  ens.scheme = "euler_maruyama_uniform_custom_drift";
  return ens;
}

SampleBatch terminal_batch(const PathEnsemble& ens) {
  SampleBatch batch;
  batch.dim = ens.dim;
  batch.count = ens.paths;
  batch.source = BatchSource::NuExact;
  batch.data.resize(ens.paths * static_cast<std::size_t>(ens.dim));
  for (std::size_t p = 0; p < ens.paths; ++p) {
    const auto terminal = ens.x(p, ens.steps);
    std::copy(terminal.begin(), terminal.end(),
              batch.data.begin() + p * static_cast<std::size_t>(ens.dim));
  }
  return batch;
}

TerminalLawReport diag_terminal_law(const PathEnsemble& ens,
                                    const SampleBatch& exact) {
  if (exact.dim != ens.dim) throw DimensionError("terminal law dim mismatch");
  TerminalLawReport rep;
  rep.euler_allowance = 2.0 / static_cast<double>(ens.steps);

  RngStream rng(kDiagSeed, make_stream_id(0, 8, 0));
  const SampleBatch term = terminal_batch(ens);

  // KS on dim random unit-vector projections.
  const std::size_t n = static_cast<std::size_t>(ens.dim);
  std::vector<double> dir(n);
  for (int proj = 0; proj < ens.dim; ++proj) {
    rng.fill_gaussian(dir);
    const double len = norm(dir);
    for (auto& d : dir) d /= len;
    std::vector<double> a(term.count), b(exact.count);
    for (std::size_t i = 0; i < term.count; ++i) a[i] = dot(dir, term.point(i));
    for (std::size_t i = 0; i < exact.count; ++i)
      b[i] = dot(dir, exact.point(i));
    rep.ks_statistics.push_back(ks_statistic_two_sample(std::move(a), std::move(b)));
  }
  rep.ks_critical =
      ks_critical_two_sample(term.count, exact.count) + rep.euler_allowance;

  const PermutationTestResult energy =
      energy_permutation_test(term, exact, rng);
  rep.energy_statistic = energy.statistic;
  rep.energy_threshold = energy.threshold + rep.euler_allowance;

  rep.pass = rep.energy_statistic <= rep.energy_threshold;
  for (double ks : rep.ks_statistics)
    if (ks > rep.ks_critical) rep.pass = false;
  return rep;
}

MartingaleReport diag_martingale(const PathEnsemble& ens) {
  MartingaleReport rep;
  // Five fixed nodes spanning the grid give ten ordered probe pairs.
  std::vector<int> nodes;
  for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const int node = static_cast<int>(std::lround(q * ens.steps));
    if (nodes.empty() || node != nodes.back()) nodes.push_back(node);
  }
  const std::size_t n = static_cast<std::size_t>(ens.dim);
  std::vector<double> diffs(ens.paths);
  for (std::size_t si = 0; si < nodes.size(); ++si) {
    for (std::size_t ui = si + 1; ui < nodes.size(); ++ui) {
      double worst = 0.0;
      for (std::size_t d = 0; d < n; ++d) {
        for (std::size_t p = 0; p < ens.paths; ++p)
          diffs[p] = ens.v(p, nodes[ui])[d] - ens.v(p, nodes[si])[d];
        const MeanSE ms = mean_se(diffs);
        double ratio;
        if (ms.se > 0.0)
          ratio = std::abs(ms.mean) / ms.se;
        else
          ratio = ms.mean == 0.0 ? 0.0
                                 : std::numeric_limits<double>::infinity();
        worst = std::max(worst, ratio);
      }
      rep.ratios.push_back(worst);
      rep.max_ratio = std::max(rep.max_ratio, worst);
    }
  }
  rep.pass = rep.max_ratio <= 4.0;
  return rep;
}

namespace {

IdentityReport identity_report(const MeanSE& stat, const Estimate& kl) {
  IdentityReport rep;
  rep.statistic = stat.mean;
  rep.statistic_se = stat.se;
  rep.target = 2.0 * kl.value;
  rep.target_se = 2.0 * kl.std_error;
  rep.gap = rep.statistic - rep.target;
  const double combined =
      std::sqrt(rep.statistic_se * rep.statistic_se + rep.target_se * rep.target_se);
  rep.tolerance = 0.05 * std::abs(rep.target) + 3.0 * combined;
  rep.pass = std::abs(rep.gap) <= rep.tolerance;
  return rep;
}

}  // namespace

IdentityReport diag_energy_identity(const PathEnsemble& ens, const Estimate& kl) {
  const std::size_t n = static_cast<std::size_t>(ens.dim);
  std::vector<double> per_path(ens.paths);
  std::vector<double> weights(static_cast<std::size_t>(ens.steps) + 1);
  for (int k = 0; k <= ens.steps; ++k) {
    const double left = k == 0 ? ens.time_grid[0] : ens.time_grid[k - 1];
    const double right = k == ens.steps ? ens.time_grid[k] : ens.time_grid[k + 1];
    weights[static_cast<std::size_t>(k)] = 0.5 * (right - left);
  }
  for (std::size_t p = 0; p < ens.paths; ++p) {
    double acc = 0.0;
    for (int k = 0; k <= ens.steps; ++k) {
      const auto v = ens.v(p, k);
      double sq = 0.0;
      for (std::size_t d = 0; d < n; ++d) sq += v[d] * v[d];
      acc += weights[static_cast<std::size_t>(k)] * sq;
    }
    per_path[p] = acc;
  }
  return identity_report(mean_se(per_path), kl);
}

IdentityReport diag_coupling_identity(const PathEnsemble& ens,
                                      const Estimate& kl) {
  const std::size_t n = static_cast<std::size_t>(ens.dim);
  std::vector<double> per_path(ens.paths);
  for (std::size_t p = 0; p < ens.paths; ++p) {
    const auto x = ens.x(p, ens.steps);
    const auto b = ens.b(p, ens.steps);
    const auto v = ens.v(p, ens.steps);
    double acc = 0.0;
    for (std::size_t d = 0; d < n; ++d) acc += (x[d] - b[d]) * v[d];
    per_path[p] = acc;
  }
  return identity_report(mean_se(per_path), kl);
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "container writer assumes a little-endian host");

constexpr char kMagic[4] = {'T', 'L', 'P', 'E'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw ParameterError("path ensemble container truncated");
  return v;
}

void put_doubles(std::ostream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void get_doubles(std::istream& is, std::vector<double>& v, std::size_t count) {
  v.resize(count);
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw ParameterError("path ensemble container truncated");
}

}  // namespace

void write_path_ensemble(std::ostream& os, const PathEnsemble& ens) {
  os.write(kMagic, 4);
  put(os, kVersion);
  put(os, static_cast<std::uint32_t>(ens.dim));
  put(os, static_cast<std::uint32_t>(ens.steps));
  put(os, static_cast<std::uint64_t>(ens.paths));
  put(os, ens.rng_seed);
  put(os, ens.rng_stream);
  put(os, static_cast<std::uint32_t>(ens.scheme.size()));
  os.write(ens.scheme.data(), static_cast<std::streamsize>(ens.scheme.size()));
  put_doubles(os, ens.time_grid);
  put_doubles(os, ens.x_paths);
  put_doubles(os, ens.b_paths);
  put_doubles(os, ens.v_paths);
}

PathEnsemble read_path_ensemble(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw ParameterError("path ensemble container has a bad magic header");
  if (get<std::uint32_t>(is) != kVersion)
    throw ParameterError("path ensemble container has an unknown version");
  PathEnsemble ens;
  ens.dim = static_cast<int>(get<std::uint32_t>(is));
  ens.steps = static_cast<int>(get<std::uint32_t>(is));
  ens.paths = get<std::uint64_t>(is);
  ens.rng_seed = get<std::uint64_t>(is);
  ens.rng_stream = get<std::uint64_t>(is);
  const std::uint32_t tag_len = get<std::uint32_t>(is);
  if (tag_len > 256)
    throw ParameterError("path ensemble container scheme tag too long");
  ens.scheme.assign(tag_len, '\0');
  is.read(ens.scheme.data(), tag_len);
  if (!is) throw ParameterError("path ensemble container truncated");
  const std::size_t nodes = static_cast<std::size_t>(ens.steps) + 1;
  const std::size_t total = ens.paths * nodes * static_cast<std::size_t>(ens.dim);
  get_doubles(is, ens.time_grid, nodes);
  get_doubles(is, ens.x_paths, total);
  get_doubles(is, ens.b_paths, total);
  get_doubles(is, ens.v_paths, total);
  return ens;
}

void write_terminal_text(std::ostream& os, const PathEnsemble& ens) {
  char buf[40];
  for (std::size_t p = 0; p < ens.paths; ++p) {
    const auto x = ens.x(p, ens.steps);
    for (std::size_t d = 0; d < x.size(); ++d) {
      std::snprintf(buf, sizeof buf, "%.17g", x[d]);
      if (d) os << ' ';
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace tiltlab
