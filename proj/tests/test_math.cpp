#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "tiltlab/math_util.hpp"
#include "tiltlab/rng.hpp"

using namespace tiltlab;

TEST_CASE("pairwise_sum matches long-double reference on mixed magnitudes") {
  RngStream rng(99, 0);
  std::vector<double> xs(1 << 20);
  long double ref = 0.0L;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = rng.gaussian() * std::pow(10.0, static_cast<double>(i % 7) - 3.0);
    ref += xs[i];
  }
  const double got = pairwise_sum(xs);
  CHECK(std::abs(got - static_cast<double>(ref)) <=
        1e-9 * (1.0 + std::abs(static_cast<double>(ref))));
}

TEST_CASE("pairwise_sum trivial cases") {
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
  CHECK(pairwise_sum(std::vector<double>{3.5}) == 3.5);
  std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  CHECK(pairwise_sum(xs) == 10.0);
}

TEST_CASE("mean_se basic statistics") {
  std::vector<double> xs{1.0, 2.0, 3.0, 4.0, 5.0};
  const MeanSE m = mean_se(xs);
  CHECK(m.mean == doctest::Approx(3.0));
  // sd = sqrt(2.5), se = sd / sqrt(5)
  CHECK(m.se == doctest::Approx(std::sqrt(2.5 / 5.0)));
  CHECK(m.count == 5);
}

TEST_CASE("log_sum_exp is overflow and underflow safe") {
  std::vector<double> big{1000.0, 1000.1};
  CHECK(log_sum_exp(big) == doctest::Approx(1000.1 + std::log1p(std::exp(-0.1))));
  std::vector<double> small{-1000.0, -1000.1};
  CHECK(log_sum_exp(small) == doctest::Approx(-1000.0 + std::log1p(std::exp(-0.1))));
  std::vector<double> one{2.5};
  CHECK(log_sum_exp(one) == doctest::Approx(2.5));
}

TEST_CASE("normal_cdf known values and symmetry") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(normal_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-12));
  CHECK(normal_cdf(-2.0) + normal_cdf(2.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-14));
}

TEST_CASE("nelder_mead minimizes quadratic and rosenbrock") {
  auto quad = [](std::span<const double> x) {
    return (x[0] - 1.5) * (x[0] - 1.5) + 2.0 * (x[1] + 0.5) * (x[1] + 0.5);
  };
  std::vector<double> x0{0.0, 0.0};
  auto r = nelder_mead(quad, x0, 1.0);
  CHECK(r.x[0] == doctest::Approx(1.5).epsilon(1e-5));
  CHECK(r.x[1] == doctest::Approx(-0.5).epsilon(1e-5));

  auto rosen = [](std::span<const double> x) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    return a * a + 100.0 * b * b;
  };
  NelderMeadOptions opts;
  opts.max_iter = 2000;
  auto r2 = nelder_mead(rosen, std::vector<double>{-1.2, 1.0}, 0.5, opts);
  CHECK(r2.value < 1e-8);
}

TEST_CASE("project_onto_hull interval and triangle") {
  // 1-d interval [-1, 1]
  std::vector<std::vector<double>> interval{{-1.0}, {1.0}};
  CHECK(project_onto_hull(std::vector<double>{2.0}, interval)[0] == doctest::Approx(1.0));
  CHECK(project_onto_hull(std::vector<double>{-3.0}, interval)[0] == doctest::Approx(-1.0));
  CHECK(project_onto_hull(std::vector<double>{0.3}, interval)[0] == doctest::Approx(0.3));

  // triangle (0,0), (1,0), (0,1)
  std::vector<std::vector<double>> tri{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  // interior point projects to itself
  auto p = project_onto_hull(std::vector<double>{0.2, 0.2}, tri);
  CHECK(p[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.2).epsilon(1e-12));
  // beyond hypotenuse projects onto it
  auto q = project_onto_hull(std::vector<double>{1.0, 1.0}, tri);
  CHECK(q[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(q[1] == doctest::Approx(0.5).epsilon(1e-10));
  // beyond a vertex projects to the vertex
  auto v = project_onto_hull(std::vector<double>{-1.0, -1.0}, tri);
  CHECK(v[0] == doctest::Approx(0.0));
  CHECK(v[1] == doctest::Approx(0.0));
  CHECK(hull_distance_sq(std::vector<double>{-1.0, -1.0}, tri) == doctest::Approx(2.0));

  // duplicated vertices must not break the face enumeration
  std::vector<std::vector<double>> dup{{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  auto d = project_onto_hull(std::vector<double>{2.0, 0.0}, dup);
  CHECK(d[0] == doctest::Approx(1.0));
  CHECK(d[1] == doctest::Approx(0.0));
}

TEST_CASE("solve_linear solves and flags singular") {
  std::vector<double> a{2.0, 1.0, 1.0, 3.0};
  std::vector<double> b{3.0, 5.0};
  REQUIRE(solve_linear(a, b, 2));
  CHECK(b[0] == doctest::Approx(0.8));
  CHECK(b[1] == doctest::Approx(1.4));
  std::vector<double> s{1.0, 2.0, 2.0, 4.0};
  std::vector<double> sb{1.0, 2.0};
  CHECK_FALSE(solve_linear(s, sb, 2));
}

TEST_CASE("RngStream determinism and stream independence") {
  RngStream a(7, 0), b(7, 0), c(7, 1);
  bool identical = true, differs = false;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.gaussian();
    if (x != b.gaussian()) identical = false;
    if (x != c.gaussian()) differs = true;
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("RngStream gaussian moments at CLT scale") {
  RngStream rng(42, 3);
  const std::size_t n = 100000;
  std::vector<double> xs(n);
  rng.fill_gaussian(xs);
  const MeanSE m = mean_se(xs);
  CHECK(std::abs(m.mean) <= 3.0 / std::sqrt(static_cast<double>(n)));
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = xs[i] * xs[i];
  const MeanSE m2 = mean_se(sq);
  CHECK(std::abs(m2.mean - 1.0) <= 3.0 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST_CASE("RngStream uniform stays in (0,1] and integer respects bound") {
  RngStream rng(5, 2);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
  for (int i = 0; i < 1000; ++i) CHECK(rng.integer(17) < 17);
}

TEST_CASE("make_stream_id blocks do not collide across instances") {
  CHECK(make_stream_id(0, 1) != make_stream_id(1, 1));
  CHECK(make_stream_id(2, 3, 10) != make_stream_id(2, 3, 11));
  CHECK(make_stream_id(1, 0, 65535) < make_stream_id(1, 1, 0));
}
