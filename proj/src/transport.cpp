#include "tiltlab/transport.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "tiltlab/errors.hpp"
#include "tiltlab/math_util.hpp"

namespace tiltlab {

namespace {

Eigen::MatrixXd to_matrix(std::span<const double> flat, int n, const char* what) {
  if (static_cast<int>(flat.size()) != n * n)
    throw DimensionError(std::string(what) + ": expected a square matrix");
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = flat[static_cast<std::size_t>(i) * n + j];
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw ParameterError(std::string(what) + ": covariance is not symmetric");
  return m;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd lam = es.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) {
    if (lam[i] < -1e-10)
      throw ParameterError(std::string(what) + ": covariance is not PSD");
    lam[i] = std::sqrt(std::max(0.0, lam[i]));
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double w2_gaussian_closed_form(std::span<const double> mean1,
                               std::span<const double> cov1,
                               std::span<const double> mean2,
                               std::span<const double> cov2) {
  const int n = static_cast<int>(mean1.size());
  if (mean2.size() != mean1.size()) throw DimensionError("mean dimensions differ");
  const Eigen::MatrixXd c1 = to_matrix(cov1, n, "cov1");
  const Eigen::MatrixXd c2 = to_matrix(cov2, n, "cov2");

  double mean_term = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = mean1[i] - mean2[i];
    mean_term += d * d;
  }

  const Eigen::MatrixXd r2 = psd_sqrt(c2, "cov2");
  const Eigen::MatrixXd inner = r2 * c1 * r2;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
  double cross = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double lam = es.eigenvalues()[i];
    if (lam < -1e-8) throw ParameterError("cov1: covariance is not PSD");
    cross += std::sqrt(std::max(0.0, lam));
  }
  const double trace_term = c1.trace() + c2.trace() - 2.0 * cross;
  return std::max(0.0, mean_term + trace_term);
}

namespace {

// Shortest-augmenting-path solver for the dense linear assignment problem.
// Returns the column assigned to each row. O(N^3).
std::vector<std::size_t> solve_assignment(const std::vector<double>& cost,
                                          std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      const double* row = cost.data() + (i0 - 1) * n;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return acc;
}

std::vector<double> cost_matrix(const SampleBatch& left, const SampleBatch& right) {
  std::vector<double> c(left.count * right.count);
  for (std::size_t i = 0; i < left.count; ++i)
    for (std::size_t j = 0; j < right.count; ++j)
      c[i * right.count + j] = squared_distance(left.point(i), right.point(j));
  return c;
}

// Balanced log-domain Sinkhorn state with uniform weights 1/n and 1/m.
// Alternating updates alone converge too slowly at small epsilon for the
// tight absolute marginal tolerances we promise, so the final stage hands
// over to a damped Newton ascent on the entropic dual once the iterates are
// in its basin.
struct SinkhornState {
  const std::vector<double>& c;
  std::size_t n, m;
  double log_a, log_b;
  std::vector<double> f, g, scratch;
  std::size_t budget;  // remaining iterations before ConvergenceError

  SinkhornState(const std::vector<double>& cost, std::size_t rows,
                std::size_t cols, std::size_t max_iter)
      : c(cost),
        n(rows),
        m(cols),
        log_a(-std::log(static_cast<double>(rows))),
        log_b(-std::log(static_cast<double>(cols))),
        f(rows, 0.0),
        g(cols, 0.0),
        scratch(std::max(rows, cols)),
        budget(max_iter) {}

  void update_f(double eps) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j)
        scratch[j] = (g[j] - c[i * m + j]) / eps + log_b;
      f[i] = -eps * log_sum_exp({scratch.data(), m});
    }
  }

  void update_g(double eps) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i)
        scratch[i] = (f[i] - c[i * m + j]) / eps + log_a;
      g[j] = -eps * log_sum_exp({scratch.data(), n});
    }
  }

  // Row-marginal violation of the plan implied by the current potentials.
  double row_residual(double eps) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < m; ++j)
        row += std::exp((f[i] + g[j] - c[i * m + j]) / eps + log_a + log_b);
      worst = std::max(worst, std::abs(row - std::exp(log_a)));
    }
    return worst;
  }

  // Alternating updates at fixed eps until the row residual reaches tol,
  // the stage cap is hit, or the global budget runs out.
  double sweep(double eps, double tol, std::size_t stage_cap) {
    double residual = row_residual(eps);
    for (std::size_t it = 0; it < stage_cap && budget > 0; ++it) {
      if (residual <= tol) break;
      --budget;
      update_f(eps);
      update_g(eps);
      residual = row_residual(eps);
    }
    return residual;
  }

  // Damped Newton ascent on the entropic dual. Accepts steps that contract
  // the worst marginal violation; returns the violation it reached (which
  // may be above tol if the method stalls — callers fall back to sweeps).
  double newton_polish(double eps, double tol) {
    const std::size_t dim = n + m;
    const double a = std::exp(log_a), b = std::exp(log_b);
    Eigen::MatrixXd h(dim, dim);
    Eigen::VectorXd grad(dim), delta(dim);
    std::vector<double> pi(n * m), trial_f(n), trial_g(m);

    auto plan_residual = [&](const std::vector<double>& ff,
                             const std::vector<double>& gg,
                             std::vector<double>* pi_out) {
      double worst = 0.0;
      std::vector<double> cols(m, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          const double p =
              std::exp((ff[i] + gg[j] - c[i * m + j]) / eps + log_a + log_b);
          row += p;
          cols[j] += p;
          if (pi_out) (*pi_out)[i * m + j] = p;
        }
        worst = std::max(worst, std::abs(row - a));
      }
      for (std::size_t j = 0; j < m; ++j)
        worst = std::max(worst, std::abs(cols[j] - b));
      return worst;
    };

    double residual = plan_residual(f, g, &pi);
    for (int iter = 0; iter < 200 && budget > 0; ++iter, --budget) {
      if (residual <= tol || !std::isfinite(residual)) break;
      h.setZero();
      for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          const double p = pi[i * m + j];
          row += p;
          h(i, n + j) = p / eps;
          h(n + j, i) = p / eps;
          h(n + j, n + j) += p / eps;
        }
        h(i, i) = row / eps;
        grad[i] = a - row;
      }
      for (std::size_t j = 0; j < m; ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < n; ++i) col += pi[i * m + j];
        grad[n + j] = b - col;
      }
      for (std::size_t k = 0; k < dim; ++k) h(k, k) += 1e-12;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
      if (ldlt.info() != Eigen::Success) break;
      delta = ldlt.solve(grad);
      if (!delta.allFinite()) break;

      bool accepted = false;
      double step = 1.0;
      for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
        for (std::size_t i = 0; i < n; ++i) trial_f[i] = f[i] + step * delta[i];
        for (std::size_t j = 0; j < m; ++j)
          trial_g[j] = g[j] + step * delta[n + j];
        const double trial = plan_residual(trial_f, trial_g, &pi);
        if (std::isfinite(trial) && trial < residual) {
          f.swap(trial_f);
          g.swap(trial_g);
          residual = trial;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    return residual;
  }
};

// Full epsilon-scaling solve; returns plan cost <pi, c> and fills the plan
// matrix if requested. The returned potentials give exact column marginals
// and rows within the configured tolerance.
double sinkhorn_solve(const std::vector<double>& c, std::size_t n, std::size_t m,
                      const Entropic& opt, std::vector<double>* plan_out) {
  SinkhornState st(c, n, m, opt.max_iterations);
  double eps = std::max(1.0, opt.epsilon);
  while (eps > opt.epsilon) {
    st.sweep(eps, std::max(1e-4, opt.marginal_tolerance), 5000);
    eps = std::max(eps / 2.0, opt.epsilon);
  }
  double residual = st.sweep(eps, std::max(1e-3, opt.marginal_tolerance), 2000);
  if (residual > opt.marginal_tolerance && n + m <= 3000)
    residual = st.newton_polish(eps, 0.25 * opt.marginal_tolerance);
  if (residual > 0.25 * opt.marginal_tolerance)
    residual = st.sweep(eps, 0.25 * opt.marginal_tolerance,
                        std::numeric_limits<std::size_t>::max());
  st.update_g(eps);  // leave the columns exact
  residual = st.row_residual(eps);
  if (residual > opt.marginal_tolerance)
    throw ConvergenceError("entropic solver did not reach the marginal tolerance",
                           residual);

  double cost = 0.0;
  if (plan_out) plan_out->assign(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double pij = std::exp((st.f[i] + st.g[j] - c[i * m + j]) / eps +
                                  st.log_a + st.log_b);
      cost += pij * c[i * m + j];
      if (plan_out) (*plan_out)[i * m + j] = pij;
    }
  }
  return cost;
}

}  // namespace

W2Result w2_empirical(const SampleBatch& left, const SampleBatch& right,
                      const W2Method& method) {
  if (left.dim != right.dim) throw DimensionError("batch dimensions differ");
  if (left.count != right.count)
    throw ParameterError("w2_empirical requires equal point counts");
  if (left.count == 0) throw ParameterError("empty batch");

  W2Result out;
  out.plan.dim = left.dim;
  out.plan.count = left.count;
  out.plan.left_points = left.data;
  out.plan.right_points = right.data;

  if (std::holds_alternative<ExactAssignment>(method)) {
    if (left.count > 4096)
      throw ParameterError("exact assignment supports at most 4096 points");
    const std::vector<double> c = cost_matrix(left, right);
    out.plan.assignment = solve_assignment(c, left.count);
    std::vector<double> terms(left.count);
    for (std::size_t i = 0; i < left.count; ++i)
      terms[i] = c[i * left.count + out.plan.assignment[i]];
    out.plan.cost = pairwise_sum(terms) / static_cast<double>(left.count);
    out.cost = out.plan.cost;
    return out;
  }

  const Entropic opt = std::get<Entropic>(method);
  if (opt.epsilon <= 0.0) throw ParameterError("entropic epsilon must be positive");
  const std::vector<double> cab = cost_matrix(left, right);
  const double cost_ab = sinkhorn_solve(cab, left.count, right.count, opt,
                                        &out.plan.matrix);
  std::vector<double> terms;
  terms.reserve(cab.size());
  for (std::size_t k = 0; k < cab.size(); ++k)
    terms.push_back(out.plan.matrix[k] * cab[k]);
  out.plan.cost = pairwise_sum(terms);
  // Sinkhorn divergence debiasing: subtract half of each self-transport cost.
  const std::vector<double> caa = cost_matrix(left, left);
  const std::vector<double> cbb = cost_matrix(right, right);
  const double cost_aa = sinkhorn_solve(caa, left.count, left.count, opt, nullptr);
  const double cost_bb = sinkhorn_solve(cbb, right.count, right.count, opt, nullptr);
  out.cost = cost_ab - 0.5 * cost_aa - 0.5 * cost_bb;
  return out;
}

Estimate w2sq_sorted_1d(const SampleBatch& a, const SampleBatch& b) {
  if (a.dim != 1 || b.dim != 1)
    throw DimensionError("sorted coupling applies in one dimension");
  if (a.count != b.count) throw ParameterError("batch counts differ");
  std::vector<double> xs(a.data), ys(b.data);
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  std::vector<double> terms(a.count);
  for (std::size_t i = 0; i < a.count; ++i) {
    const double d = xs[i] - ys[i];
    terms[i] = d * d;
  }
  Estimate e;
  e.value = pairwise_sum(terms) / static_cast<double>(a.count);
  const MeanSE ms = mean_se(terms);
  e.std_error = ms.se;
  e.sample_count = a.count;
  e.method = Method::MonteCarlo;
  e.bound = BoundDirection::Upper;  // empirical transport cost is biased up
  return e;
}

Estimate w2sq_assignment(const SampleBatch& a, const SampleBatch& b) {
  const W2Result r = w2_empirical(a, b, ExactAssignment{});
  std::vector<double> terms(a.count);
  for (std::size_t i = 0; i < a.count; ++i)
    terms[i] = squared_distance(a.point(i), b.point(r.plan.assignment[i]));
  Estimate e;
  e.value = r.cost;
  const MeanSE ms = mean_se(terms);
  e.std_error = ms.se;
  e.sample_count = a.count;
  e.method = Method::MonteCarlo;
  e.bound = BoundDirection::Upper;
  return e;
}

double empirical_w2_bias_allowance(const Estimate& w2sq, int dim) {
  if (w2sq.method == Method::Analytic || w2sq.method == Method::Quadrature)
    return 0.0;
  const double n = static_cast<double>(std::max<std::size_t>(w2sq.sample_count, 2));
  const double rate = -2.0 / static_cast<double>(std::max(dim, 4));
  return 8.0 * (1.0 + std::max(0.0, w2sq.value)) * std::pow(n, rate);
}

namespace {

struct GradientSetGeometry {
  GradientSetDescriptor d;

  double sup_linear(std::span<const double> y) const {
    switch (d.kind) {
      case GradientSetKind::Singleton:
        return dot(y, d.extreme_points.front());
      case GradientSetKind::FiniteExtremePoints: {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& t : d.extreme_points) best = std::max(best, dot(y, t));
        return best;
      }
      case GradientSetKind::IntervalBox: {
        double acc = 0.0;
        for (std::size_t j = 0; j < y.size(); ++j)
          acc += std::max(y[j] * d.box_lower[j], y[j] * d.box_upper[j]);
        return acc;
      }
      case GradientSetKind::HeuristicSearch:
        throw NotApplicableError("gradient set lacks certified extreme points");
    }
    return 0.0;
  }

  // Z(x) = sup_{t in hull} (<x,t> - |t|^2/2) = |x|^2/2 - dist(x, hull)^2/2.
  double quadratic_dual(std::span<const double> x) const {
    switch (d.kind) {
      case GradientSetKind::Singleton: {
        const auto& t = d.extreme_points.front();
        return dot(x, t) - 0.5 * norm_sq(t);
      }
      case GradientSetKind::FiniteExtremePoints:
        return 0.5 * norm_sq(x) - 0.5 * hull_distance_sq(x, d.extreme_points);
      case GradientSetKind::IntervalBox: {
        double dist_sq = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
          const double c = std::clamp(x[j], d.box_lower[j], d.box_upper[j]);
          const double dd = x[j] - c;
          dist_sq += dd * dd;
        }
        return 0.5 * norm_sq(x) - 0.5 * dist_sq;
      }
      case GradientSetKind::HeuristicSearch:
        throw NotApplicableError("gradient set lacks certified extreme points");
    }
    return 0.0;
  }

  bool certified() const {
    return !d.unbounded && d.kind != GradientSetKind::HeuristicSearch;
  }
};

}  // namespace

DualPair dual_candidate_from_gradient_set(const Potential& p) {
  GradientSetGeometry geo{p.gradient_set()};
  if (!geo.certified())
    throw NotApplicableError(
        "dual candidate needs a bounded gradient set with known extremes");
  DualPair pair;
  pair.phi = [geo](std::span<const double> x) { return geo.quadratic_dual(x); };
  pair.psi = [geo](std::span<const double> y) { return -geo.sup_linear(y); };
  return pair;
}

DualFeasibilityReport check_dual_feasibility(const DualPair& pair,
                                             const SampleBatch& left,
                                             const SampleBatch& right) {
  if (left.dim != right.dim) throw DimensionError("batch dimensions differ");
  std::vector<double> phi(left.count), psi(right.count);
  for (std::size_t i = 0; i < left.count; ++i) phi[i] = pair.phi(left.point(i));
  for (std::size_t j = 0; j < right.count; ++j) psi[j] = pair.psi(right.point(j));

  double max_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < left.count; ++i) {
    const auto x = left.point(i);
    for (std::size_t j = 0; j < right.count; ++j) {
      const double v =
          phi[i] + psi[j] - 0.5 * squared_distance(x, right.point(j));
      max_violation = std::max(max_violation, v);
    }
  }
  DualFeasibilityReport r;
  r.max_violation = max_violation;
  r.slack_tolerance = pair.slack_tolerance;
  r.pass = max_violation <= pair.slack_tolerance;
  r.pairs_checked = left.count * right.count;
  return r;
}

double dual_objective(const DualPair& pair, const SampleBatch& nu_batch,
                      const SampleBatch& gamma_batch) {
  std::vector<double> phi(nu_batch.count), psi(gamma_batch.count);
  for (std::size_t i = 0; i < nu_batch.count; ++i)
    phi[i] = pair.phi(nu_batch.point(i));
  for (std::size_t j = 0; j < gamma_batch.count; ++j)
    psi[j] = pair.psi(gamma_batch.point(j));
  return pairwise_sum(phi) / static_cast<double>(nu_batch.count) +
         pairwise_sum(psi) / static_cast<double>(gamma_batch.count);
}

InequalityReport check_transport_general(const TiltedMeasure& m, double C,
                                         const Estimate& kl, const Estimate& w2sq) {
  if (C <= 0.0) throw ParameterError("transport constant must be positive");
  InequalityReport r;
  r.name = CheckName::Talagrand;
  r.lhs = w2sq;
  r.lhs.value = w2sq.value / (2.0 * C);
  r.lhs.std_error = w2sq.std_error / (2.0 * C);
  r.rhs = kl;
  r.terms["kl"] = kl;
  r.terms["w2_sq"] = w2sq;
  if (C != 1.0) {
    Estimate cc;
    cc.value = C;
    cc.method = Method::Analytic;
    r.terms["transport_constant"] = cc;
  }
  r.margin = r.rhs.value - r.lhs.value;
  r.margin_se = std::sqrt(r.rhs.std_error * r.rhs.std_error +
                          r.lhs.std_error * r.lhs.std_error);
  r.bias_allowance = empirical_w2_bias_allowance(w2sq, m.dim()) / (2.0 * C);
  r.verdict = verdict_from_margin(r.margin, r.margin_se, r.bias_allowance);
  char note[160];
  std::snprintf(note, sizeof note,
                "w2_sq/(2*%.17g) <= kl; HOLDS iff margin >= -(3*se + %.6g)", C,
                3.0 * r.margin_se + r.bias_allowance);
  r.note = note;
  return r;
}

InequalityReport check_talagrand(const TiltedMeasure& m, const Estimate& kl,
                                 const Estimate& w2sq) {
  return check_transport_general(m, 1.0, kl, w2sq);
}

InequalityReport check_vitale(const Potential& p, const SampleBatch& gamma_batch,
                              double C) {
  if (C <= 0.0) throw ParameterError("vitale constant must be positive");
  if (gamma_batch.source != BatchSource::Gamma)
    throw WrongMeasureError("vitale check needs a gamma batch");

  InequalityReport r;
  r.name = CheckName::Vitale;
  GradientSetGeometry geo{p.gradient_set()};
  if (geo.d.unbounded || !geo.certified()) {
    r.verdict = Verdict::NotApplicable;
    r.note = geo.d.unbounded ? "gradient set unbounded; width is infinite"
                             : "gradient set has no certified extreme points";
    return r;
  }

  const std::size_t n = gamma_batch.count;
  std::vector<double> expz(n), sup(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = gamma_batch.point(i);
    expz[i] = std::exp(geo.quadratic_dual(y) / C);
    sup[i] = geo.sup_linear(y);
  }
  const MeanSE mz = mean_se(expz);
  const MeanSE ms = mean_se(sup);

  r.lhs.value = C * std::log(mz.mean);
  r.lhs.std_error = C * mz.se / mz.mean;  // delta method for log of a mean
  r.lhs.sample_count = n;
  r.lhs.method = Method::MonteCarlo;

  r.rhs.value = ms.mean;
  r.rhs.std_error = ms.se;
  r.rhs.sample_count = n;
  r.rhs.method = Method::MonteCarlo;

  r.terms["log_partition_z"] = r.lhs;
  r.terms["width"] = r.rhs;
  if (C != 1.0) {
    Estimate cc;
    cc.value = C;
    cc.method = Method::Analytic;
    r.terms["vitale_constant"] = cc;
  }
  r.margin = r.rhs.value - r.lhs.value;
  r.margin_se = std::sqrt(r.lhs.std_error * r.lhs.std_error +
                          r.rhs.std_error * r.rhs.std_error);
  r.verdict = verdict_from_margin(r.margin, r.margin_se, 0.0);
  r.note = "C*log E exp(Z/C) <= width; HOLDS iff margin >= -3*se";
  return r;
}

void write_coupling_text(std::ostream& os, const CouplingPlan& plan) {
  char buf[64];
  if (!plan.assignment.empty()) {
    const double mass = 1.0 / static_cast<double>(plan.count);
    for (std::size_t i = 0; i < plan.count; ++i) {
      std::snprintf(buf, sizeof buf, "%zu %zu %.17g", i, plan.assignment[i], mass);
      os << buf << '\n';
    }
    return;
  }
  for (std::size_t i = 0; i < plan.count; ++i) {
    for (std::size_t j = 0; j < plan.count; ++j) {
      const double mass = plan.matrix[i * plan.count + j];
      if (mass <= 0.0) continue;
      std::snprintf(buf, sizeof buf, "%zu %zu %.17g", i, j, mass);
      os << buf << '\n';
    }
  }
}

}  // namespace tiltlab
