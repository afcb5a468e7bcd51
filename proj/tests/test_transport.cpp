#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "tiltlab/errors.hpp"
#include "tiltlab/math_util.hpp"
#include "tiltlab/measures.hpp"
#include "tiltlab/potential.hpp"
#include "tiltlab/rng.hpp"
#include "tiltlab/sampling.hpp"
#include "tiltlab/transport.hpp"

using namespace tiltlab;

namespace {

std::vector<double> identity_cov(int n) {
  std::vector<double> c(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(i) * n + i] = 1.0;
  return c;
}

double brute_force_cost(const SampleBatch& a, const SampleBatch& b) {
  std::vector<std::size_t> perm(a.count);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = 1e300;
  std::vector<double> terms(a.count);
  do {
    for (std::size_t i = 0; i < a.count; ++i) {
      double d2 = 0.0;
      const auto x = a.point(i);
      const auto y = b.point(perm[i]);
      for (int k = 0; k < a.dim; ++k) {
        const double d = x[k] - y[k];
        d2 += d * d;
      }
      terms[i] = d2;
    }
    best = std::min(best, pairwise_sum(terms) / static_cast<double>(a.count));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Estimate analytic(double v) {
  Estimate e;
  e.value = v;
  e.method = Method::Analytic;
  return e;
}

}  // namespace

TEST_CASE("gaussian closed form covers shifts, scalings, and rotations") {
  const auto id1 = identity_cov(1);
  const auto id2 = identity_cov(2);

  std::vector<double> m0{0.0, 0.0}, m1{0.6, -0.8};
  CHECK(w2_gaussian_closed_form(m0, id2, m0, id2) == 0.0);
  CHECK(std::abs(w2_gaussian_closed_form(m1, id2, m0, id2) - 1.0) <= 1e-12);

  std::vector<double> m5(5, 0.0), a5(5, 0.0);
  a5[0] = 2.0;
  const auto id5 = identity_cov(5);
  CHECK(std::abs(w2_gaussian_closed_form(a5, id5, m5, id5) - 4.0) <= 1e-12);

  std::vector<double> z1{0.0};
  std::vector<double> half{0.5};
  const double expect = (1.0 - 1.0 / std::sqrt(2.0)) * (1.0 - 1.0 / std::sqrt(2.0));
  CHECK(w2_gaussian_closed_form(z1, half, z1, id1) ==
        doctest::Approx(expect).epsilon(1e-12));
  CHECK(expect == doctest::Approx(0.08578643762690495));

  // n=2 dilation: cov 2I vs I
  std::vector<double> two_id{2.0, 0.0, 0.0, 2.0};
  const double sq05 = 2.0 * (std::sqrt(2.0) - 1.0) * (std::sqrt(2.0) - 1.0);
  CHECK(w2_gaussian_closed_form(m0, two_id, m0, id2) ==
        doctest::Approx(sq05).epsilon(1e-12));
  CHECK(sq05 == doctest::Approx(0.3431457505076198));

  // rotation invariance of the trace term against the identity
  const double c = std::cos(0.5), s = std::sin(0.5);
  // R diag(2, 0.5) R^T
  std::vector<double> rot{2.0 * c * c + 0.5 * s * s, 1.5 * c * s,
                          1.5 * c * s, 2.0 * s * s + 0.5 * c * c};
  const double want = (std::sqrt(2.0) - 1.0) * (std::sqrt(2.0) - 1.0) +
                      (std::sqrt(0.5) - 1.0) * (std::sqrt(0.5) - 1.0);
  CHECK(w2_gaussian_closed_form(m0, rot, m0, id2) ==
        doctest::Approx(want).epsilon(1e-12));

  std::vector<double> notpsd{1.0, 2.0, 2.0, 1.0};  // eigenvalues 3, -1
  CHECK_THROWS_AS(w2_gaussian_closed_form(m0, notpsd, m0, id2), ParameterError);
  std::vector<double> asym{1.0, 0.3, 0.0, 1.0};
  CHECK_THROWS_AS(w2_gaussian_closed_form(m0, asym, m0, id2), ParameterError);
}

TEST_CASE("exact assignment solves trivial and adversarial small cases") {
  RngStream rng(211, 0);
  SampleBatch a = sample_gamma(2, 16, rng);
  const W2Result same = w2_empirical(a, a, ExactAssignment{});
  CHECK(same.cost == 0.0);
  for (std::size_t i = 0; i < a.count; ++i) CHECK(same.plan.assignment[i] == i);

  for (int rep = 0; rep < 10; ++rep) {
    SampleBatch l = sample_gamma(2, 7, rng);
    SampleBatch r = sample_gamma(2, 7, rng);
    const W2Result jv = w2_empirical(l, r, ExactAssignment{});
    CHECK(jv.cost == brute_force_cost(l, r));
  }
  for (int rep = 0; rep < 10; ++rep) {
    SampleBatch l = sample_gamma(1, 8, rng);
    SampleBatch r = sample_gamma(1, 8, rng);
    const W2Result jv = w2_empirical(l, r, ExactAssignment{});
    CHECK(jv.cost == brute_force_cost(l, r));
  }

  SampleBatch l = sample_gamma(1, 8, rng);
  SampleBatch r = sample_gamma(1, 9, rng);
  CHECK_THROWS_AS(w2_empirical(l, r, ExactAssignment{}), ParameterError);
}

TEST_CASE("one-dimensional assignment equals the sorted coupling bit for bit") {
  LinearPotential lin({1.0});
  RngStream rn(223, 0), rg(223, 1);
  const SampleBatch nu = sample_nu_exact(lin, 1024, rn);
  const SampleBatch g = sample_gamma(1, 1024, rg);
  const W2Result jv = w2_empirical(nu, g, ExactAssignment{});
  const Estimate sorted = w2sq_sorted_1d(nu, g);
  CHECK(jv.cost == sorted.value);

  // empirical cost approaches the closed form with positive bias
  RngStream rn2(223, 2), rg2(223, 3);
  const SampleBatch nu2 = sample_nu_exact(lin, 2048, rn2);
  const SampleBatch g2 = sample_gamma(1, 2048, rg2);
  const Estimate big = w2sq_sorted_1d(nu2, g2);
  CHECK(std::abs(big.value - 1.0) <= 0.08);
  CHECK(big.bound == BoundDirection::Upper);
}

TEST_CASE("entropic plan satisfies marginals and dominates the exact cost") {
  LinearPotential lin({1.0});
  RngStream rn(227, 0), rg(227, 1);
  const SampleBatch nu = sample_nu_exact(lin, 128, rn);
  const SampleBatch g = sample_gamma(1, 128, rg);

  const W2Result exact = w2_empirical(nu, g, ExactAssignment{});
  const W2Result ent = w2_empirical(nu, g, Entropic{0.05, 1e-8, 200000});

  const std::size_t n = nu.count;
  const double target = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row += ent.plan.matrix[i * n + j];
      col += ent.plan.matrix[j * n + i];
    }
    CHECK(std::abs(row - target) <= 1e-8);
    CHECK(std::abs(col - target) <= 1e-8);
  }
  CHECK(exact.cost <= ent.plan.cost + 1e-12);

  CHECK_THROWS_AS(w2_empirical(nu, g, Entropic{0.0}), ParameterError);
  try {
    w2_empirical(nu, g, Entropic{0.01, 1e-8, 3});
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual > 0.0);
  }
}

TEST_CASE("debiased entropic cost converges to the exact cost as eps shrinks") {
  LinearPotential lin({1.0});
  RngStream rn(229, 0), rg(229, 1);
  const SampleBatch nu = sample_nu_exact(lin, 256, rn);
  const SampleBatch g = sample_gamma(1, 256, rg);
  const W2Result exact = w2_empirical(nu, g, ExactAssignment{});

  double prev_gap = 1e300;
  double final_gap = 1e300;
  for (double eps : {1.0, 0.5, 0.25, 0.1, 0.05, 0.01}) {
    const W2Result ent = w2_empirical(nu, g, Entropic{eps, 1e-8, 200000});
    const double gap = std::abs(ent.cost - exact.cost);
    CHECK(gap <= prev_gap + 3e-4);  // monotone within solver noise
    prev_gap = gap;
    final_gap = gap;
  }
  CHECK(final_gap < 1e-3);
}

TEST_CASE("dual candidate is feasible and the negative control is caught") {
  LogSumExpPotential pm1({1.0, 1.0}, {{1.0}, {-1.0}});
  RngStream rn(233, 0), rg(233, 1);
  const SampleBatch nu = sample_nu_exact(pm1, 10000, rn);
  const SampleBatch g = sample_gamma(1, 10000, rg);

  const DualPair pair = dual_candidate_from_gradient_set(pm1);
  const DualFeasibilityReport ok = check_dual_feasibility(pair, nu, g);
  CHECK(ok.pass);
  CHECK(ok.max_violation <= 1e-12);
  CHECK(ok.pairs_checked == 100000000);

  DualPair shifted = pair;
  shifted.phi = [&pair](std::span<const double> x) { return pair.phi(x) + 0.1; };
  const DualFeasibilityReport bad = check_dual_feasibility(shifted, nu, g);
  CHECK_FALSE(bad.pass);
  CHECK(std::abs(bad.max_violation - 0.1) <= 1e-6);
}

TEST_CASE("singleton dual candidate is feasible by the quadratic inequality") {
  LinearPotential lin({0.7, -0.2});
  RngStream rn(239, 0), rg(239, 1);
  const SampleBatch nu = sample_nu_exact(lin, 2000, rn);
  const SampleBatch g = sample_gamma(2, 2000, rg);
  const DualPair pair = dual_candidate_from_gradient_set(lin);
  const DualFeasibilityReport rep = check_dual_feasibility(pair, nu, g);
  CHECK(rep.pass);
  CHECK(rep.max_violation <= 1e-12);
}

TEST_CASE("weak duality holds at the sample level") {
  LogSumExpPotential pm1({1.0, 1.0}, {{1.0}, {-1.0}});
  RngStream rn(241, 0), rg(241, 1);
  const SampleBatch nu = sample_nu_exact(pm1, 1024, rn);
  const SampleBatch g = sample_gamma(1, 1024, rg);
  const DualPair pair = dual_candidate_from_gradient_set(pm1);
  const double dual = dual_objective(pair, nu, g);
  const W2Result primal = w2_empirical(nu, g, ExactAssignment{});
  CHECK(dual <= 0.5 * primal.cost + 1e-8);

  LinearPotential lin({1.0});
  RngStream rn2(241, 2), rg2(241, 3);
  const SampleBatch nu2 = sample_nu_exact(lin, 1024, rn2);
  const SampleBatch g2 = sample_gamma(1, 1024, rg2);
  const DualPair pair2 = dual_candidate_from_gradient_set(lin);
  const double dual2 = dual_objective(pair2, nu2, g2);
  const W2Result primal2 = w2_empirical(nu2, g2, ExactAssignment{});
  CHECK(dual2 <= 0.5 * primal2.cost + 1e-8);
}

TEST_CASE("talagrand check on extremal, trivial, and mixture instances") {
  LinearPotential lin({1.0});
  const TiltedMeasure ml(lin);
  const InequalityReport sharp =
      check_talagrand(ml, analytic(0.5), analytic(1.0));
  CHECK(sharp.verdict == Verdict::Holds);
  CHECK(sharp.margin == 0.0);
  CHECK(sharp.name == CheckName::Talagrand);

  LinearPotential zero({0.0});
  const InequalityReport triv =
      check_talagrand(TiltedMeasure(zero), analytic(0.0), analytic(0.0));
  CHECK(triv.verdict == Verdict::Holds);
  CHECK(triv.margin == 0.0);

  // estimate-driven path for the mixture
  LogSumExpPotential pm1({1.0, 1.0}, {{1.0}, {-1.0}});
  RngStream rn(251, 0), rg(251, 1), rk(251, 2);
  SampleBatch nu = sample_nu_exact(pm1, 8192, rn);
  const SampleBatch g = sample_gamma(1, 8192, rg);
  const Estimate w2 = w2sq_sorted_1d(nu, g);
  const SampleBatch klb = sample_nu_exact(pm1, 100000, rk);
  const TiltedMeasure m(pm1);
  const Estimate kl = estimate_kl(m, klb);
  const InequalityReport rep = check_talagrand(m, kl, w2);
  CHECK(rep.verdict == Verdict::Holds);
  CHECK(rep.margin > 0.0);
  CHECK(rep.bias_allowance > 0.0);
  CHECK(rep.terms.at("w2_sq").value == w2.value);
}

TEST_CASE("general transport constant threads through and can fail honestly") {
  LinearPotential lin({1.0});
  const TiltedMeasure m(lin);
  const Estimate kl = analytic(0.5);
  const Estimate w2 = analytic(1.0);

  const InequalityReport c1 = check_transport_general(m, 1.0, kl, w2);
  const InequalityReport tala = check_talagrand(m, kl, w2);
  CHECK(c1.margin == tala.margin);
  CHECK(c1.verdict == tala.verdict);

  const InequalityReport c2 = check_transport_general(m, 2.0, kl, w2);
  CHECK(c2.margin == doctest::Approx(0.25));
  CHECK(c2.verdict == Verdict::Holds);

  const InequalityReport c04 = check_transport_general(m, 0.4, kl, w2);
  CHECK(c04.margin == doctest::Approx(0.5 - 1.25));
  CHECK(c04.verdict == Verdict::Fails);

  CHECK_THROWS_AS(check_transport_general(m, 0.0, kl, w2), ParameterError);
}

TEST_CASE("vitale check: equality on singletons, positive margin on mixtures") {
  RngStream rg(257, 0);
  const SampleBatch g1 = sample_gamma(1, 100000, rg);

  LinearPotential lin({1.0});
  const InequalityReport eq = check_vitale(lin, g1);
  CHECK(eq.verdict == Verdict::Holds);
  CHECK(std::abs(eq.lhs.value) <= 3.0 * eq.lhs.std_error);
  CHECK(std::abs(eq.rhs.value) <= 3.0 * eq.rhs.std_error);
  CHECK(std::abs(eq.margin) <= 3.0 * eq.margin_se);

  LinearPotential zero({0.0});
  const InequalityReport triv = check_vitale(zero, g1);
  CHECK(triv.lhs.value == 0.0);
  CHECK(triv.rhs.value == 0.0);
  CHECK(triv.verdict == Verdict::Holds);

  LogSumExpPotential pm1({1.0, 1.0}, {{1.0}, {-1.0}});
  const InequalityReport mix = check_vitale(pm1, g1);
  CHECK(mix.verdict == Verdict::Holds);
  CHECK(mix.margin >= 3.0 * mix.margin_se);
  CHECK(std::abs(mix.lhs.value - 0.5866107297679963) <= 4.0 * mix.lhs.std_error);
  CHECK(std::abs(mix.rhs.value - 0.7978845608028654) <= 4.0 * mix.rhs.std_error);

  const InequalityReport c2 = check_vitale(pm1, g1, 2.0);
  CHECK(c2.verdict == Verdict::Holds);
  CHECK(c2.margin > mix.margin);  // the generalized side shrinks with C

  ScaledQuadraticPotential sq(1.0, 1);
  const InequalityReport na = check_vitale(sq, g1);
  CHECK(na.verdict == Verdict::NotApplicable);

  RngStream rn(257, 1);
  const SampleBatch nu = sample_nu_exact(pm1, 100, rn);
  CHECK_THROWS_AS(check_vitale(pm1, nu), WrongMeasureError);
}

TEST_CASE("coupling plans export as sparse triples") {
  RngStream rng(263, 0);
  const SampleBatch a = sample_gamma(1, 4, rng);
  const SampleBatch b = sample_gamma(1, 4, rng);

  const W2Result exact = w2_empirical(a, b, ExactAssignment{});
  std::ostringstream os;
  write_coupling_text(os, exact.plan);
  int lines = 0;
  std::istringstream is(os.str());
  std::string line;
  double mass_total = 0.0;
  while (std::getline(is, line)) {
    ++lines;
    std::istringstream ls(line);
    std::size_t i, j;
    double mass;
    ls >> i >> j >> mass;
    CHECK(mass == 0.25);
    mass_total += mass;
  }
  CHECK(lines == 4);
  CHECK(mass_total == doctest::Approx(1.0));

  const W2Result ent = w2_empirical(a, b, Entropic{0.5, 1e-8, 100000});
  std::ostringstream os2;
  write_coupling_text(os2, ent.plan);
  std::istringstream is2(os2.str());
  double total = 0.0;
  while (std::getline(is2, line)) {
    std::istringstream ls(line);
    std::size_t i, j;
    double mass;
    ls >> i >> j >> mass;
    total += mass;
  }
  CHECK(std::abs(total - 1.0) <= 1e-9);
}
