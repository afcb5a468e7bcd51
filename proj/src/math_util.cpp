#include "tiltlab/math_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "tiltlab/errors.hpp"

namespace tiltlab {

namespace {

double pairwise_sum_rec(const double* xs, std::size_t n) {
  if (n <= 128) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += xs[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_rec(xs, half) + pairwise_sum_rec(xs + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> xs) {
  return pairwise_sum_rec(xs.data(), xs.size());
}

MeanSE mean_se(std::span<const double> xs) {
  MeanSE out;
  out.count = xs.size();
  if (xs.empty()) return out;
  out.mean = pairwise_sum(xs) / static_cast<double>(xs.size());
  if (xs.size() < 2) return out;
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - out.mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / static_cast<double>(xs.size() - 1);
  out.se = std::sqrt(var / static_cast<double>(xs.size()));
  return out;
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = pairwise_sum(xs) / static_cast<double>(xs.size());
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - m;
    sq[i] = d * d;
  }
  return pairwise_sum(sq) / static_cast<double>(xs.size() - 1);
}

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_sq(std::span<const double> a) { return dot(a, a); }

double norm(std::span<const double> a) { return std::sqrt(norm_sq(a)); }

double normal_pdf(double x) {
  static const double kInvSqrt2Pi = 0.39894228040143268;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& fn,
                             std::span<const double> x0, double scale,
                             const NelderMeadOptions& opts) {
  const int n = static_cast<int>(x0.size());
  std::vector<std::vector<double>> simplex(n + 1, std::vector<double>(x0.begin(), x0.end()));
  for (int i = 0; i < n; ++i) simplex[i + 1][i] += scale;
  std::vector<double> fv(n + 1);
  for (int i = 0; i <= n; ++i) fv[i] = fn(simplex[i]);

  NelderMeadResult res;
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    // order best..worst
    std::vector<int> idx(n + 1);
    for (int i = 0; i <= n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    {
      std::vector<std::vector<double>> s2(n + 1);
      std::vector<double> f2(n + 1);
      for (int i = 0; i <= n; ++i) {
        s2[i] = simplex[idx[i]];
        f2[i] = fv[idx[i]];
      }
      simplex.swap(s2);
      fv.swap(f2);
    }
    double spread = 0.0;
    for (int i = 0; i < n; ++i)
      spread = std::max(spread, std::abs(simplex[n][i] - simplex[0][i]));
    if (spread < opts.xtol && std::abs(fv[n] - fv[0]) < opts.ftol) {
      res.converged = true;
      break;
    }
    for (int i = 0; i < n; ++i) {
      double c = 0.0;
      for (int j = 0; j < n; ++j) c += simplex[j][i];
      centroid[i] = c / n;
    }
    for (int i = 0; i < n; ++i) xr[i] = centroid[i] + (centroid[i] - simplex[n][i]);
    const double fr = fn(xr);
    if (fr < fv[0]) {
      for (int i = 0; i < n; ++i) xe[i] = centroid[i] + 2.0 * (centroid[i] - simplex[n][i]);
      const double fe = fn(xe);
      if (fe < fr) {
        simplex[n] = xe;
        fv[n] = fe;
      } else {
        simplex[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      simplex[n] = xr;
      fv[n] = fr;
    } else {
      const bool outside = fr < fv[n];
      const std::vector<double>& ref = outside ? xr : simplex[n];
      for (int i = 0; i < n; ++i) xc[i] = centroid[i] + 0.5 * (ref[i] - centroid[i]);
      const double fc = fn(xc);
      if (fc < std::min(fr, fv[n])) {
        simplex[n] = xc;
        fv[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          for (int j = 0; j < n; ++j)
            simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
          fv[i] = fn(simplex[i]);
        }
      }
    }
  }
  res.iterations = iter;
  int best = 0;
  for (int i = 1; i <= n; ++i)
    if (fv[i] < fv[best]) best = i;
  res.x = simplex[best];
  res.value = fv[best];
  return res;
}

bool solve_linear(std::vector<double>& a, std::vector<double>& b, int n) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    if (std::abs(a[piv * n + col]) < 1e-13) return false;
    if (piv != col) {
      for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    const double d = a[col * n + col];
    for (int r = col + 1; r < n; ++r) {
      const double m = a[r * n + col] / d;
      if (m == 0.0) continue;
      for (int c = col; c < n; ++c) a[r * n + c] -= m * a[col * n + c];
      b[r] -= m * b[col];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a[r * n + c] * b[c];
    b[r] = s / a[r * n + r];
  }
  return true;
}

namespace {

// Projection of x onto the affine hull of the chosen vertices, in barycentric
// coordinates. KKT system: [G 1; 1^T 0] [lambda; mu] = [V^T x; 1].
bool affine_project(std::span<const double> x,
                    const std::vector<const std::vector<double>*>& verts,
                    std::vector<double>& lambda) {
  const int k = static_cast<int>(verts.size());
  const int m = k + 1;
  std::vector<double> a(m * m, 0.0), b(m, 0.0);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) a[i * m + j] = dot(*verts[i], *verts[j]);
    a[i * m + k] = 1.0;
    a[k * m + i] = 1.0;
    b[i] = dot(x, *verts[i]);
  }
  b[k] = 1.0;
  if (!solve_linear(a, b, m)) return false;
  lambda.assign(b.begin(), b.begin() + k);
  return true;
}

}  // namespace

std::vector<double> project_onto_hull(std::span<const double> x,
                                      const std::vector<std::vector<double>>& vertices) {
  const std::size_t k = vertices.size();
  if (k == 0) throw ParameterError("project_onto_hull: empty vertex set");
  if (k > 12) throw ParameterError("project_onto_hull: vertex set too large for face enumeration");
  const std::size_t n = vertices[0].size();
  if (x.size() != n) throw DimensionError("project_onto_hull: dimension mismatch");

  std::vector<double> best(vertices[0]);
  double best_d = std::numeric_limits<double>::infinity();
  std::vector<double> diff(n), cand(n), lambda;
  std::vector<const std::vector<double>*> face;
  for (std::size_t mask = 1; mask < (std::size_t{1} << k); ++mask) {
    face.clear();
    for (std::size_t i = 0; i < k; ++i)
      if (mask & (std::size_t{1} << i)) face.push_back(&vertices[i]);
    if (face.size() == 1) {
      for (std::size_t i = 0; i < n; ++i) diff[i] = x[i] - (*face[0])[i];
      const double d = norm_sq(diff);
      if (d < best_d) {
        best_d = d;
        best = *face[0];
      }
      continue;
    }
    if (!affine_project(x, face, lambda)) continue;
    bool feasible = true;
    for (double l : lambda)
      if (l < -1e-12) {
        feasible = false;
        break;
      }
    if (!feasible) continue;
    std::fill(cand.begin(), cand.end(), 0.0);
    for (std::size_t i = 0; i < face.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) cand[j] += lambda[i] * (*face[i])[j];
    for (std::size_t i = 0; i < n; ++i) diff[i] = x[i] - cand[i];
    const double d = norm_sq(diff);
    if (d < best_d) {
      best_d = d;
      best = cand;
    }
  }
  return best;
}

double hull_distance_sq(std::span<const double> x,
                        const std::vector<std::vector<double>>& vertices) {
  const std::vector<double> p = project_onto_hull(x, vertices);
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double t = x[i] - p[i];
    d += t * t;
  }
  return d;
}

}  // namespace tiltlab
