#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "tiltlab/errors.hpp"
#include "tiltlab/math_util.hpp"
#include "tiltlab/potential.hpp"
#include "tiltlab/quadrature.hpp"
#include "tiltlab/rng.hpp"
#include "tiltlab/sampling.hpp"

using namespace tiltlab;

namespace {

std::vector<double> coordinate(const SampleBatch& b, int j) {
  std::vector<double> out(b.count);
  for (std::size_t i = 0; i < b.count; ++i) out[i] = b.point(i)[j];
  return out;
}

double coord_mean(const SampleBatch& b, int j, double* se = nullptr) {
  const auto col = coordinate(b, j);
  const MeanSE m = mean_se(col);
  if (se) *se = m.se;
  return m.mean;
}

}  // namespace

TEST_CASE("gamma batches have standard moments and are reproducible") {
  RngStream rng(7, 0);
  const SampleBatch b = sample_gamma(1, 100000, rng);
  CHECK(b.count == 100000);
  CHECK(b.source == BatchSource::Gamma);
  double se = 0.0;
  const double mean = coord_mean(b, 0, &se);
  CHECK(std::abs(mean) <= 3.0 / std::sqrt(1e5));
  std::vector<double> sq(b.count);
  for (std::size_t i = 0; i < b.count; ++i) sq[i] = b.data[i] * b.data[i];
  const MeanSE m2 = mean_se(sq);
  CHECK(std::abs(m2.mean - 1.0) <= 3.0 * std::sqrt(2.0 / 1e5));

  RngStream r1(7, 0), r2(7, 0);
  const SampleBatch c1 = sample_gamma(3, 1000, r1);
  const SampleBatch c2 = sample_gamma(3, 1000, r2);
  CHECK(c1.data == c2.data);
}

TEST_CASE("exact nu samplers hit analytic moments") {
  LinearPotential lin({1.0, 0.0});
  RngStream rng(11, 1);
  const SampleBatch b = sample_nu_exact(lin, 100000, rng);
  double se = 0.0;
  const double mean = coord_mean(b, 0, &se);
  CHECK(std::abs(mean - 1.0) <= 3.0 * se);

  LogSumExpPotential lse({1.0, 1.0}, {{1.0}, {-1.0}});
  RngStream rng2(11, 2);
  const SampleBatch s = sample_nu_exact(lse, 100000, rng2);
  const double smean = coord_mean(s, 0, &se);
  CHECK(std::abs(smean) <= 3.0 * se);

  ScaledQuadraticPotential sq(1.0, 1);
  RngStream rng3(11, 3);
  const SampleBatch q = sample_nu_exact(sq, 100000, rng3);
  std::vector<double> second(q.count);
  for (std::size_t i = 0; i < q.count; ++i) second[i] = q.data[i] * q.data[i];
  const MeanSE m = mean_se(second);
  CHECK(std::abs(m.mean - 0.5) <= 3.0 * m.se);

  BlackBoxPotential bb(1, [](std::span<const double> x) { return 0.0 * x[0]; });
  RngStream rng4(11, 4);
  CHECK_THROWS_AS(sample_nu_exact(bb, 10, rng4), UnsupportedError);
}

TEST_CASE("exact sampler marginals pass a KS test against analytic CDFs") {
  RngStream rng(13, 0);
  const std::size_t n = 100000;
  const double crit = ks_critical_one_sample(n);

  LinearPotential lin({0.5});
  SampleBatch b = sample_nu_exact(lin, n, rng);
  CHECK(ks_statistic_one_sample(coordinate(b, 0), [&](double v) {
          return lin.marginal_cdf(0, v);
        }) < crit);

  LogSumExpPotential pm1({1.0, 1.0}, {{1.0}, {-1.0}});
  b = sample_nu_exact(pm1, n, rng);
  CHECK(ks_statistic_one_sample(coordinate(b, 0), [&](double v) {
          return pm1.marginal_cdf(0, v);
        }) < crit);

  LogSumExpPotential lse2({1.0, 1.0}, {{1.0, 0.0}, {0.0, 1.0}});
  b = sample_nu_exact(lse2, n, rng);
  for (int j = 0; j < 2; ++j) {
    CHECK(ks_statistic_one_sample(coordinate(b, j), [&](double v) {
            return lse2.marginal_cdf(j, v);
          }) < crit);
  }

  ScaledQuadraticPotential sq(1.0, 1);
  b = sample_nu_exact(sq, n, rng);
  CHECK(ks_statistic_one_sample(coordinate(b, 0), [&](double v) {
          return sq.marginal_cdf(0, v);
        }) < crit);
}

TEST_CASE("mala targets gamma when the potential vanishes") {
  BlackBoxPotential zero(1, [](std::span<const double>) { return 0.0; });
  RngStream rng(19, 0);
  const SampleBatch b = sample_nu_mala(zero, 100000, 10000, 0.0, rng);
  CHECK(b.source == BatchSource::NuMala);
  CHECK(b.acceptance_rate > 0.1);
  CHECK(b.acceptance_rate < 0.9);
  const auto col = coordinate(b, 0);
  const MeanSE m = mean_se(col);
  const double sd = std::sqrt(sample_variance(col));
  const double se_eff = sd / std::sqrt(std::min(b.ess, static_cast<double>(b.count)));
  CHECK(std::abs(m.mean) <= 4.0 * se_eff);
}

TEST_CASE("mala matches the exact sampler for a linear potential") {
  LinearPotential lin({1.0, 0.0});
  BlackBoxPotential bb(2, [&](std::span<const double> x) { return lin.value(x); });
  RngStream rng(23, 0);
  const SampleBatch b = sample_nu_mala(bb, 100000, 10000, 0.0, rng);
  const auto col = coordinate(b, 0);
  const MeanSE m = mean_se(col);
  const double sd = std::sqrt(sample_variance(col));
  const double se_eff = sd / std::sqrt(b.ess);
  CHECK(std::abs(m.mean - 1.0) <= 4.0 * se_eff);
  CHECK(b.ess > 100.0);
}

TEST_CASE("mala visits both modes of a separated mixture") {
  LogSumExpPotential pm2({1.0, 1.0}, {{2.0}, {-2.0}});
  RngStream rng(29, 0);
  // 2e5 recorded x thin 5 = 1e6 chain steps
  const SampleBatch b = sample_nu_mala(pm2, 200000, 10000, 0.0, rng);
  std::size_t positive = 0;
  for (std::size_t i = 0; i < b.count; ++i)
    if (b.point(i)[0] > 0.0) ++positive;
  const double occ = static_cast<double>(positive) / static_cast<double>(b.count);
  CHECK(occ > 0.45);
  CHECK(occ < 0.55);
}

TEST_CASE("mala and exact sampler agree on bounded statistics") {
  LogSumExpPotential lse({1.0, 1.0}, {{1.0, 0.0}, {0.0, 1.0}});
  RngStream re(31, 0), rm(31, 1), rw(31, 2);
  const SampleBatch exact = sample_nu_exact(lse, 100000, re);
  const SampleBatch mala = sample_nu_mala(lse, 50000, 10000, 0.0, rm);
  const double infl = std::sqrt(static_cast<double>(mala.count) / mala.ess);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> w(2);
    rw.fill_gaussian(w);
    const double bias = 6.28318530717958648 * rw.uniform();
    auto stat = [&](const SampleBatch& b, std::size_t i) {
      return std::cos(dot(b.point(i), w) + bias);
    };
    std::vector<double> se_vals(exact.count), sm_vals(mala.count);
    for (std::size_t i = 0; i < exact.count; ++i) se_vals[i] = stat(exact, i);
    for (std::size_t i = 0; i < mala.count; ++i) sm_vals[i] = stat(mala, i);
    const MeanSE me = mean_se(se_vals);
    const MeanSE mm = mean_se(sm_vals);
    const double combined =
        std::sqrt(me.se * me.se + infl * infl * mm.se * mm.se);
    CHECK(std::abs(me.mean - mm.mean) <= 4.0 * combined);
  }
}

TEST_CASE("mala is reproducible and warns on a hopeless fixed step") {
  LogSumExpPotential pm1({1.0, 1.0}, {{1.0}, {-1.0}});
  RngStream r1(41, 0), r2(41, 0);
  const SampleBatch b1 = sample_nu_mala(pm1, 2000, 1000, 0.0, r1);
  const SampleBatch b2 = sample_nu_mala(pm1, 2000, 1000, 0.0, r2);
  CHECK(b1.data == b2.data);
  CHECK(b1.acceptance_rate == b2.acceptance_rate);
  CHECK(b1.ess == b2.ess);

  RngStream r3(41, 1);
  const SampleBatch bad = sample_nu_mala(pm1, 500, 200, 50.0, r3);
  CHECK(bad.tuning_warning);
  CHECK(bad.acceptance_rate < 0.1);
}

// --- quadrature oracle -------------------------------------------------------

TEST_CASE("quadrature reproduces closed forms for the reference families") {
  LinearPotential zero({0.0});
  CHECK(std::abs(quadrature_oracle(zero, Functional::KL)) <= 1e-10);

  LinearPotential lin({1.0});
  CHECK(quadrature_oracle(lin, Functional::KL) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(quadrature_oracle(lin, Functional::Fisher) ==
        doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(quadrature_oracle(lin, Functional::LogNormalizer)) <= 1e-9);

  ScaledQuadraticPotential sq1(1.0, 1);
  CHECK(quadrature_oracle(sq1, Functional::KL) ==
        doctest::Approx(0.09657359027997264).epsilon(1e-9));
  CHECK(quadrature_oracle(sq1, Functional::Fisher) ==
        doctest::Approx(0.5).epsilon(1e-9));
  CHECK(quadrature_oracle(sq1, Functional::SecondMoment) ==
        doctest::Approx(0.5).epsilon(1e-9));
  CHECK(quadrature_oracle(sq1, Functional::EntropyGap) ==
        doctest::Approx(-0.5 * std::log(2.0)).epsilon(1e-9));

  ScaledQuadraticPotential sq05(-0.5, 2);
  CHECK(quadrature_oracle(sq05, Functional::KL) ==
        doctest::Approx(0.3068528194400547).epsilon(1e-8));
  CHECK(quadrature_oracle(sq05, Functional::Fisher) ==
        doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("quadrature matches frozen mixture references") {
  LogSumExpPotential pm1({1.0, 1.0}, {{1.0}, {-1.0}});
  CHECK(quadrature_oracle(pm1, Functional::KL) ==
        doctest::Approx(0.16316917965317018).epsilon(1e-10));
  CHECK(quadrature_oracle(pm1, Functional::Fisher) ==
        doctest::Approx(0.5504004907933067).epsilon(1e-10));
  CHECK(quadrature_oracle(pm1, Functional::LaplacianMean) ==
        doctest::Approx(0.4495995092066934).epsilon(1e-10));
  CHECK(quadrature_oracle(pm1, Functional::XGrad) ==
        doctest::Approx(1.0).epsilon(1e-10));
  CHECK(quadrature_oracle(pm1, Functional::SecondMoment) ==
        doctest::Approx(2.0).epsilon(1e-10));
  CHECK(quadrature_oracle(pm1, Functional::EntropyGap) ==
        doctest::Approx(0.3368308203468298).epsilon(1e-9));
  CHECK(quadrature_oracle(pm1, Functional::Width) ==
        doctest::Approx(0.7978845608028654).epsilon(1e-10));

  LogSumExpPotential lse2({1.0, 1.0}, {{1.0, 0.0}, {0.0, 1.0}});
  CHECK(quadrature_oracle(lse2, Functional::KL) ==
        doctest::Approx(0.29865452841519513).epsilon(1e-9));
  CHECK(quadrature_oracle(lse2, Functional::Fisher) ==
        doctest::Approx(0.6750567023375658).epsilon(1e-9));
  CHECK(quadrature_oracle(lse2, Functional::LaplacianMean) ==
        doctest::Approx(0.3249432976624347).epsilon(1e-9));
  CHECK(quadrature_oracle(lse2, Functional::XGrad) ==
        doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("quadrature width handles interval geometry and refuses unbounded sets") {
  LogSumExpPotential spread({1.0, 1.0, 1.0}, {{-1.0}, {1.0}, {2.0}});
  CHECK(quadrature_oracle(spread, Functional::Width) ==
        doctest::Approx(1.1968268412042982).epsilon(1e-10));

  LinearPotential lin({0.7});
  CHECK(std::abs(quadrature_oracle(lin, Functional::Width)) <= 1e-12);

  ScaledQuadraticPotential sq(1.0, 1);
  CHECK_THROWS_AS(quadrature_oracle(sq, Functional::Width), NotApplicableError);

  LogSumExpPotential lse2({1.0, 1.0}, {{1.0, 0.0}, {0.0, 1.0}});
  CHECK_THROWS_AS(quadrature_oracle(lse2, Functional::Width), UnsupportedError);

  LinearPotential lin3({1.0, 0.0, 0.0});
  CHECK_THROWS_AS(quadrature_oracle(lin3, Functional::KL), UnsupportedError);
}

TEST_CASE("quadrature is stable under grid doubling") {
  LogSumExpPotential pm1({1.0, 1.0}, {{1.0}, {-1.0}});
  LinearPotential lin({2.0});
  ScaledQuadraticPotential sq(1.0, 1);
  for (const Potential* p : {static_cast<const Potential*>(&pm1),
                             static_cast<const Potential*>(&lin),
                             static_cast<const Potential*>(&sq)}) {
    for (Functional f : {Functional::KL, Functional::Fisher,
                         Functional::SecondMoment, Functional::LogNormalizer}) {
      const double a = quadrature_oracle(*p, f, {4001, 0.0});
      const double b = quadrature_oracle(*p, f, {8001, 0.0});
      CHECK(std::abs(a - b) < 1e-8);
    }
  }
  const double w1 = quadrature_oracle(pm1, Functional::Width, {4001, 0.0});
  const double w2 = quadrature_oracle(pm1, Functional::Width, {8001, 0.0});
  CHECK(std::abs(w1 - w2) < 1e-8);

  LogSumExpPotential lse2({1.0, 1.0}, {{1.0, 0.0}, {0.0, 1.0}});
  const double a = quadrature_oracle(lse2, Functional::KL, {2001, 0.0});
  const double b = quadrature_oracle(lse2, Functional::KL, {4001, 0.0});
  CHECK(std::abs(a - b) < 1e-8);
}

// --- distribution diagnostics ------------------------------------------------

TEST_CASE("ks statistics detect shifts and accept identical laws") {
  RngStream rng(53, 0);
  const SampleBatch a = sample_gamma(1, 20000, rng);
  CHECK(ks_statistic_one_sample(coordinate(a, 0), [](double v) {
          return normal_cdf(v);
        }) < ks_critical_one_sample(a.count));
  // shifted cdf must be detected decisively
  CHECK(ks_statistic_one_sample(coordinate(a, 0), [](double v) {
          return normal_cdf(v - 0.2);
        }) > 3.0 * ks_critical_one_sample(a.count));

  const SampleBatch b = sample_gamma(1, 20000, rng);
  CHECK(ks_statistic_two_sample(coordinate(a, 0), coordinate(b, 0)) <
        ks_critical_two_sample(a.count, b.count));
}

TEST_CASE("energy distance permutation test separates distinct laws") {
  LinearPotential lin({1.0, 0.0});
  RngStream rg(59, 0), re(59, 1), rp(59, 2), rp2(59, 3);
  const SampleBatch g = sample_gamma(2, 4000, rg);
  const SampleBatch nu = sample_nu_exact(lin, 4000, re);
  const PermutationTestResult different = energy_permutation_test(g, nu, rp);
  CHECK(different.reject);
  CHECK(different.p_value <= 0.01);

  RngStream re2(59, 4);
  const SampleBatch nu2 = sample_nu_exact(lin, 4000, re2);
  const PermutationTestResult same = energy_permutation_test(nu, nu2, rp2);
  CHECK_FALSE(same.reject);
}

TEST_CASE("batch text round-trip is lossless") {
  RngStream rng(61, 0);
  SampleBatch b = sample_gamma(3, 500, rng);
  b.data[0] = 1e-300;
  b.data[1] = -0.1;
  b.data[2] = 12345.678901234567;
  std::ostringstream os;
  write_batch_text(os, b);
  std::istringstream is(os.str());
  const SampleBatch back = read_batch_text(is);
  CHECK(back.dim == b.dim);
  CHECK(back.count == b.count);
  CHECK(back.data == b.data);

  std::istringstream bad("1.0 2.0\n3.0 oops\n");
  try {
    read_batch_text(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
}
