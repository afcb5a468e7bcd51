#include "tiltlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <istream>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "tiltlab/errors.hpp"
#include "tiltlab/math_util.hpp"
#include "tiltlab/rng.hpp"
#include "tiltlab/transport.hpp"

namespace tiltlab {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::uint16_t kPurposeNu = 0;
constexpr std::uint16_t kPurposeGamma = 1;
constexpr std::uint16_t kPurposeW2 = 4;
constexpr std::uint16_t kPurposeWidthSearch = 6;

Estimate analytic_estimate(double value, BoundDirection bound) {
  Estimate e;
  e.value = value;
  e.std_error = 0.0;
  e.sample_count = 0;
  e.method = Method::Analytic;
  e.bound = bound;
  return e;
}

double ess_scale(const SampleBatch& b) {
  if (b.source != BatchSource::NuMala) return 1.0;
  return std::sqrt(static_cast<double>(b.count) / std::max(1.0, b.ess));
}

// Linear combination of the per-draw nu-side columns plus a constant; the
// paired reduction is what keeps margin SEs honest when both sides of an
// inequality are estimated from the same batch.
struct ComboWeights {
  double f = 0.0;
  double grad_sq = 0.0;
  double laplacian = 0.0;
  double x_grad = 0.0;
  double second_moment = 0.0;
  double constant = 0.0;
};

MeanSE combo_reduce(const SharedBatches& sh, const ComboWeights& w) {
  const NuColumns& c = sh.cols;
  std::vector<double> v(c.f.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = w.f * c.f[i] + w.grad_sq * c.grad_sq[i] + w.laplacian * c.laplacian[i] +
           w.x_grad * c.x_grad[i] + w.second_moment * c.second_moment[i] + w.constant;
  }
  MeanSE ms = mean_se(v);
  ms.se *= ess_scale(sh.nu);
  return ms;
}

// Extra (independently estimated) terms entering the margin with a coefficient.
struct ExtraTerm {
  double coef = 0.0;
  Estimate est;
};

void insert_base_terms(InequalityReport& r, const SharedBatches& sh) {
  r.terms["kl"] = sh.kl;
  r.terms["fisher"] = sh.fisher;
  r.terms["laplacian_mean"] = sh.lap_mean;
  r.terms["x_grad"] = sh.x_grad;
  r.terms["second_moment"] = sh.second_moment;
  r.terms["entropy_gap"] = sh.entropy_gap;
  if (sh.m_term) r.terms["m"] = *sh.m_term;
  if (sh.width) r.terms["width"] = *sh.width;
  if (sh.w2sq) r.terms["w2_sq"] = *sh.w2sq;
}

InequalityReport not_applicable(CheckName name, const SharedBatches& sh,
                                const std::string& why) {
  InequalityReport r;
  r.name = name;
  r.verdict = Verdict::NotApplicable;
  r.note = why;
  insert_base_terms(r, sh);
  return r;
}

// Assemble a report whose margin is combo (paired, nu batch) plus a sum of
// coef * independent-term values.
InequalityReport finish(CheckName name, const SharedBatches& sh,
                        const Estimate& lhs, const Estimate& rhs,
                        const ComboWeights& combo,
                        const std::vector<ExtraTerm>& extras,
                        const std::string& note) {
  InequalityReport r;
  r.name = name;
  r.lhs = lhs;
  r.rhs = rhs;
  const MeanSE paired = combo_reduce(sh, combo);
  double margin = paired.mean;
  double var = paired.se * paired.se;
  for (const ExtraTerm& t : extras) {
    margin += t.coef * t.est.value;
    var += (t.coef * t.est.std_error) * (t.coef * t.est.std_error);
  }
  r.margin = margin;
  r.margin_se = std::sqrt(var);
  r.bias_allowance = 0.0;
  r.verdict = verdict_from_margin(r.margin, r.margin_se, r.bias_allowance);
  r.note = note;
  insert_base_terms(r, sh);
  return r;
}

Estimate scaled(const Estimate& e, double c) {
  Estimate out = e;
  out.value *= c;
  out.std_error *= std::abs(c);
  return out;
}

Estimate sum_estimates(const std::vector<std::pair<double, Estimate>>& parts,
                       Method method) {
  Estimate out;
  double var = 0.0;
  std::size_t count = 0;
  bool upper = false;
  for (const auto& [c, e] : parts) {
    out.value += c * e.value;
    var += (c * e.std_error) * (c * e.std_error);
    count = std::max(count, e.sample_count);
    if (e.bound != BoundDirection::Exact) upper = true;
  }
  out.std_error = std::sqrt(var);
  out.sample_count = count;
  out.method = method;
  out.bound = upper ? BoundDirection::Upper : BoundDirection::Exact;
  return out;
}

const char* kToleranceNote = "HOLDS iff margin >= -(3*margin_se + bias_allowance)";

std::string with_tolerance(const std::string& s) {
  return s + "; " + kToleranceNote;
}

// Width-consuming checks surface the width caveats (e.g. the injected
// negative-control offset) on their own notes.
std::string width_suffix(const SharedBatches& sh) {
  if (sh.width_note.empty()) return {};
  return "; " + sh.width_note;
}

// width^(2/3) * fisher^(1/3) with a symmetric-interval standard error; the
// two-thirds power has an unbounded derivative at zero, so a delta method is
// useless exactly where the linear instances live.
Estimate fractional_term(const Estimate& width, const Estimate& fisher) {
  auto eval = [](double d, double i) {
    d = std::max(d, 0.0);
    i = std::max(i, 0.0);
    return std::cbrt(d * d) * std::cbrt(i);
  };
  Estimate t;
  t.value = eval(width.value, fisher.value);
  const double hi = eval(width.value + 3.0 * width.std_error,
                         fisher.value + 3.0 * fisher.std_error);
  const double lo = eval(width.value - 3.0 * width.std_error,
                         fisher.value - 3.0 * fisher.std_error);
  t.std_error = (hi - lo) / 6.0;
  t.sample_count = std::max(width.sample_count, fisher.sample_count);
  t.method = Method::MonteCarlo;
  t.bound = width.bound;
  return t;
}

InequalityReport check_log_sobolev(const SharedBatches& sh) {
  ComboWeights w;
  w.grad_sq = 0.5;
  w.f = -1.0;
  return finish(CheckName::LogSobolev, sh, sh.kl, scaled(sh.fisher, 0.5), w, {},
                with_tolerance("kl <= fisher/2"));
}

InequalityReport check_reverse_lsi_fractional(const SharedBatches& sh) {
  if (!sh.width)
    return not_applicable(CheckName::ReverseLsiFractional, sh, sh.width_note);
  if (!sh.m_term)
    return not_applicable(CheckName::ReverseLsiFractional, sh, sh.m_note);
  Estimate m_plus = *sh.m_term;
  m_plus.value = std::max(m_plus.value, 0.0);
  const Estimate frac = fractional_term(*sh.width, sh.fisher);
  ComboWeights w;
  w.f = 1.0;
  w.grad_sq = -0.5;
  InequalityReport r = finish(
      CheckName::ReverseLsiFractional, sh, scaled(sh.fisher, 0.5),
      sum_estimates({{1.0, sh.kl}, {0.5, m_plus}, {1.0, frac}}, Method::MonteCarlo),
      w, {{0.5, m_plus}, {1.0, frac}},
      with_tolerance("fisher/2 <= kl + m_plus/2 + width^(2/3)*fisher^(1/3)") + width_suffix(sh));
  r.terms["m_plus"] = m_plus;
  r.terms["fractional_term"] = frac;
  return r;
}

InequalityReport check_reverse_lsi_additive(const SharedBatches& sh) {
  if (!sh.width)
    return not_applicable(CheckName::ReverseLsiAdditive, sh, sh.width_note);
  if (!sh.m_term)
    return not_applicable(CheckName::ReverseLsiAdditive, sh, sh.m_note);
  ComboWeights w;
  w.f = 1.0;
  w.grad_sq = -0.5;
  return finish(CheckName::ReverseLsiAdditive, sh, scaled(sh.fisher, 0.5),
                sum_estimates({{1.0, sh.kl}, {1.0, *sh.m_term}, {1.0, *sh.width}},
                              Method::MonteCarlo),
                w, {{1.0, *sh.m_term}, {1.0, *sh.width}},
                with_tolerance("fisher/2 <= kl + m + width") + width_suffix(sh));
}

InequalityReport check_transport_intermediate(const SharedBatches& sh) {
  if (!sh.width)
    return not_applicable(CheckName::TransportIntermediate, sh, sh.width_note);
  if (!sh.m_term)
    return not_applicable(CheckName::TransportIntermediate, sh, sh.m_note);
  if (!sh.w2sq)
    return not_applicable(CheckName::TransportIntermediate, sh, sh.w2_note);
  ComboWeights w;
  w.grad_sq = -0.5;
  return finish(CheckName::TransportIntermediate, sh, scaled(sh.fisher, 0.5),
                sum_estimates({{1.0, *sh.m_term}, {1.0, *sh.width}, {0.5, *sh.w2sq}},
                              Method::MonteCarlo),
                w, {{1.0, *sh.m_term}, {1.0, *sh.width}, {0.5, *sh.w2sq}},
                with_tolerance("fisher/2 <= m + width + w2_sq/2") + width_suffix(sh));
}

InequalityReport check_reverse_transport(const SharedBatches& sh) {
  if (!sh.width)
    return not_applicable(CheckName::ReverseTransport, sh, sh.width_note);
  if (!sh.m_term)
    return not_applicable(CheckName::ReverseTransport, sh, sh.m_note);
  if (!sh.w2sq)
    return not_applicable(CheckName::ReverseTransport, sh, sh.w2_note);
  ComboWeights w;
  w.f = -1.0;
  return finish(CheckName::ReverseTransport, sh, sh.kl,
                sum_estimates({{0.5, *sh.w2sq}, {1.0, *sh.m_term}, {1.0, *sh.width}},
                              Method::MonteCarlo),
                w, {{0.5, *sh.w2sq}, {1.0, *sh.m_term}, {1.0, *sh.width}},
                with_tolerance("kl <= w2_sq/2 + m + width") + width_suffix(sh));
}

InequalityReport check_second_moment_bound(const SharedBatches& sh) {
  if (!sh.width)
    return not_applicable(CheckName::SecondMomentBound, sh, sh.width_note);
  ComboWeights w;
  w.f = 2.0;
  w.x_grad = -1.0;
  return finish(CheckName::SecondMomentBound, sh, sh.x_grad,
                sum_estimates({{2.0, sh.kl}, {1.0, *sh.width}}, Method::MonteCarlo),
                w, {{1.0, *sh.width}},
                with_tolerance("int <x, grad f> dnu <= 2*kl + width") + width_suffix(sh));
}

InequalityReport check_entropy_width_bound(const SharedBatches& sh, int dim) {
  if (!sh.width)
    return not_applicable(CheckName::EntropyWidthBound, sh, sh.width_note);
  ComboWeights w;
  w.f = 1.0;
  w.second_moment = -0.5;
  w.constant = 0.5 * static_cast<double>(dim);
  return finish(CheckName::EntropyWidthBound, sh, sh.entropy_gap,
                scaled(*sh.width, 0.5), w, {{0.5, *sh.width}},
                with_tolerance("entropy_gap <= width/2") + width_suffix(sh));
}

std::string dominance_note(const SharedBatches& sh) {
  // rhs(halved) <= rhs(full) exactly when width >= laplacian mean; recorded,
  // not asserted.
  char buf[160];
  const double d = sh.width ? sh.width->value : 0.0;
  const double lap = sh.lap_mean.value;
  std::snprintf(buf, sizeof(buf),
                "halved rhs %s the doubled rhs here (width %+.6f vs laplacian mean %+.6f)",
                d >= lap ? "does not exceed" : "exceeds", d, lap);
  return buf;
}

InequalityReport check_reverse_lsi_halved_laplacian(const SharedBatches& sh) {
  if (!sh.width)
    return not_applicable(CheckName::ReverseLsiHalvedLaplacian, sh, sh.width_note);
  ComboWeights w;
  w.f = 1.0;
  w.laplacian = -0.5;
  w.grad_sq = -0.5;
  return finish(CheckName::ReverseLsiHalvedLaplacian, sh, scaled(sh.fisher, 0.5),
                sum_estimates({{1.0, sh.kl}, {-0.5, sh.lap_mean}, {0.5, *sh.width}},
                              Method::MonteCarlo),
                w, {{0.5, *sh.width}},
                with_tolerance("fisher/2 <= kl - laplacian_mean/2 + width/2") +
                    width_suffix(sh) + "; " + dominance_note(sh));
}

InequalityReport check_reverse_lsi_full_laplacian(const SharedBatches& sh) {
  if (!sh.width)
    return not_applicable(CheckName::ReverseLsiFullLaplacian, sh, sh.width_note);
  ComboWeights w;
  w.f = 1.0;
  w.laplacian = -1.0;
  w.grad_sq = -0.5;
  return finish(CheckName::ReverseLsiFullLaplacian, sh, scaled(sh.fisher, 0.5),
                sum_estimates({{1.0, sh.kl}, {-1.0, sh.lap_mean}, {1.0, *sh.width}},
                              Method::MonteCarlo),
                w, {{1.0, *sh.width}},
                with_tolerance("fisher/2 <= kl - laplacian_mean + width") + width_suffix(sh));
}

}  // namespace

std::vector<CheckName> all_checks() {
  std::vector<CheckName> v;
  v.reserve(kCheckCount);
  for (int i = 0; i < kCheckCount; ++i) v.push_back(static_cast<CheckName>(i));
  return v;
}

SharedBatches make_shared_batches(const TiltedMeasure& m, const SuiteConfig& cfg,
                                  std::uint64_t seed,
                                  std::uint32_t instance_index) {
  const Potential& p = m.p();
  SharedBatches sh;

  RngStream nu_rng(seed, make_stream_id(instance_index, kPurposeNu));
  RngStream gamma_rng(seed, make_stream_id(instance_index, kPurposeGamma));
  sh.nu = p.capabilities().exact_sampler
              ? sample_nu_exact(p, cfg.samples, nu_rng)
              : sample_nu_mala(p, cfg.samples, 10000, 0.0, nu_rng);
  sh.gamma = sample_gamma(p.dim(), cfg.samples, gamma_rng);
  sh.cols = nu_columns(p, sh.nu);

  sh.kl = estimate_kl(m, sh.nu);
  sh.fisher = estimate_fisher(m, sh.nu);
  sh.second_moment = estimate_second_moment(m, sh.nu);
  sh.entropy_gap = estimate_entropy_gap(m, sh.nu);
  {
    ComboWeights w;
    w.laplacian = 1.0;
    const MeanSE ms = combo_reduce(sh, w);
    sh.lap_mean.value = ms.mean;
    sh.lap_mean.std_error = ms.se;
    sh.lap_mean.sample_count = ms.count;
    sh.lap_mean.method = Method::MonteCarlo;
    w = ComboWeights{};
    w.x_grad = 1.0;
    const MeanSE xs = combo_reduce(sh, w);
    sh.x_grad.value = xs.mean;
    sh.x_grad.std_error = xs.se;
    sh.x_grad.sample_count = xs.count;
    sh.x_grad.method = Method::MonteCarlo;
  }

  try {
    RngStream search_rng(seed, make_stream_id(instance_index, kPurposeWidthSearch));
    Estimate w = estimate_width(p, sh.gamma, &search_rng);
    if (w.bound == BoundDirection::Lower) {
      sh.width_note =
          "width search is only a heuristic lower bound; width-dependent "
          "right-hand sides are skipped";
    } else {
      w.value += cfg.width_corruption;
      sh.width = w;
      if (cfg.width_corruption != 0.0)
        sh.width_note = "width estimate includes an injected offset (negative control)";
    }
  } catch (const NotApplicableError& e) {
    sh.width_note = e.what();
  }

  if (const auto am = p.analytic_m()) {
    sh.m_term = analytic_estimate(*am, BoundDirection::Exact);
  } else if (const auto ub = p.m_upper_bound()) {
    sh.m_term = analytic_estimate(*ub, BoundDirection::Upper);
    sh.m_note = "m enters right-hand sides as a safe upper bound";
  } else {
    sh.m_note = "no exact value or safe upper bound available for m";
  }

  switch (p.family()) {
    case Family::Linear: {
      const auto& shift = static_cast<const LinearPotential&>(p).shift();
      sh.w2sq = analytic_estimate(norm_sq(shift), BoundDirection::Exact);
      break;
    }
    case Family::ScaledQuadratic: {
      const double s = static_cast<const ScaledQuadraticPotential&>(p).stiffness();
      const double sigma = 1.0 / std::sqrt(1.0 + s);
      sh.w2sq = analytic_estimate(p.dim() * (sigma - 1.0) * (sigma - 1.0),
                                  BoundDirection::Exact);
      break;
    }
    default: {
      if (!p.capabilities().exact_sampler) {
        sh.w2_note =
            "no exact sampler; empirical transport distance would inherit "
            "unquantified MCMC bias";
        break;
      }
      const std::size_t n_pts =
          p.dim() == 1 ? cfg.w2_pair_count : cfg.w2_assignment_count;
      RngStream a_rng(seed, make_stream_id(instance_index, kPurposeW2, 0));
      RngStream b_rng(seed, make_stream_id(instance_index, kPurposeW2, 1));
      const SampleBatch na = sample_nu_exact(p, n_pts, a_rng);
      const SampleBatch gb = sample_gamma(p.dim(), n_pts, b_rng);
      sh.w2sq = p.dim() == 1 ? w2sq_sorted_1d(na, gb) : w2sq_assignment(na, gb);
      sh.w2_note = "empirical plan cost (upward-biased)";
      break;
    }
  }
  return sh;
}

InequalityReport check(CheckName name, const TiltedMeasure& m,
                       const SharedBatches& shared) {
  InequalityReport r;
  switch (name) {
    case CheckName::LogSobolev:
      r = check_log_sobolev(shared);
      break;
    case CheckName::ReverseLsiFractional:
      r = check_reverse_lsi_fractional(shared);
      break;
    case CheckName::ReverseLsiAdditive:
      r = check_reverse_lsi_additive(shared);
      break;
    case CheckName::TransportIntermediate:
      r = check_transport_intermediate(shared);
      break;
    case CheckName::Talagrand:
      if (!shared.w2sq) {
        r = not_applicable(CheckName::Talagrand, shared, shared.w2_note);
      } else {
        r = check_talagrand(m, shared.kl, *shared.w2sq);
        insert_base_terms(r, shared);
      }
      break;
    case CheckName::ReverseTransport:
      r = check_reverse_transport(shared);
      break;
    case CheckName::Vitale: {
      r = check_vitale(m.p(), shared.gamma, 1.0);
      auto own = r.terms;
      insert_base_terms(r, shared);
      for (auto& [k, v] : own) r.terms[k] = v;
      break;
    }
    case CheckName::SecondMomentBound:
      r = check_second_moment_bound(shared);
      break;
    case CheckName::EntropyWidthBound:
      r = check_entropy_width_bound(shared, m.dim());
      break;
    case CheckName::ReverseLsiHalvedLaplacian:
      r = check_reverse_lsi_halved_laplacian(shared);
      break;
    case CheckName::ReverseLsiFullLaplacian:
      r = check_reverse_lsi_full_laplacian(shared);
      break;
    default:
      throw ParameterError("unknown check");
  }
  return r;
}

SuiteConfig default_matrix() {
  SuiteConfig cfg;
  auto add = [&cfg](const std::string& name, std::shared_ptr<Potential> p) {
    cfg.instances.push_back({name, std::move(p)});
  };
  add("linear_05", std::make_shared<LinearPotential>(std::vector<double>{0.5}));
  add("linear_1", std::make_shared<LinearPotential>(std::vector<double>{1.0, 0.0}));
  add("linear_2",
      std::make_shared<LinearPotential>(std::vector<double>{2.0, 0.0, 0.0, 0.0, 0.0}));
  add("lse_pm1", std::make_shared<LogSumExpPotential>(
                     std::vector<double>{0.5, 0.5},
                     std::vector<std::vector<double>>{{1.0}, {-1.0}}));
  add("lse_2d", std::make_shared<LogSumExpPotential>(
                    std::vector<double>{0.5, 0.5},
                    std::vector<std::vector<double>>{{1.0, 0.0}, {0.0, 1.0}}));
  add("lse_5d",
      std::make_shared<LogSumExpPotential>(
          std::vector<double>{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
          std::vector<std::vector<double>>{{1.0, 1.0, 0.0, 0.0, 0.0},
                                           {-1.0, -1.0, 0.0, 0.0, 0.0},
                                           {0.0, 0.0, 2.0, 0.0, 0.0}}));
  add("sq_1", std::make_shared<ScaledQuadraticPotential>(1.0, 1));
  add("sq_05", std::make_shared<ScaledQuadraticPotential>(-0.5, 2));
  return cfg;
}

namespace {

std::uint64_t parse_u64_field(const std::string& tok, const char* field, int line) {
  try {
    if (!tok.empty() && tok[0] == '-') throw std::invalid_argument("negative");
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError(std::string("field '") + field + "' expects an unsigned integer, got '" +
                         tok + "'",
                     line);
  }
}

double parse_double_field(const std::string& tok, const char* field, int line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError(
        std::string("field '") + field + "' expects a number, got '" + tok + "'", line);
  }
}

}  // namespace

SuiteConfig parse_suite_config(std::istream& in) {
  SuiteConfig cfg;
  bool seeds_explicit = false;
  std::set<std::string> names;
  int line_number = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_number;
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key) || key[0] == '#') continue;
    if (key == "samples") {
      std::string tok;
      ls >> tok;
      cfg.samples = parse_u64_field(tok, "samples", line_number);
      if (cfg.samples == 0) throw ParseError("samples must be positive", line_number);
    } else if (key == "seed") {
      std::string tok;
      ls >> tok;
      const std::uint64_t s = parse_u64_field(tok, "seed", line_number);
      if (!seeds_explicit) cfg.seeds.clear();
      seeds_explicit = true;
      cfg.seeds.push_back(s);
    } else if (key == "w2_pairs") {
      std::string tok;
      ls >> tok;
      cfg.w2_pair_count = parse_u64_field(tok, "w2_pairs", line_number);
    } else if (key == "w2_assignment") {
      std::string tok;
      ls >> tok;
      cfg.w2_assignment_count = parse_u64_field(tok, "w2_assignment", line_number);
    } else if (key == "follmer_steps") {
      std::string tok;
      ls >> tok;
      cfg.follmer_steps =
          static_cast<int>(parse_u64_field(tok, "follmer_steps", line_number));
    } else if (key == "follmer_paths") {
      std::string tok;
      ls >> tok;
      cfg.follmer_paths = parse_u64_field(tok, "follmer_paths", line_number);
    } else if (key == "corrupt_width") {
      std::string tok;
      ls >> tok;
      cfg.width_corruption = parse_double_field(tok, "corrupt_width", line_number);
    } else if (key == "out") {
      std::string tok;
      ls >> tok;
      if (tok.empty()) throw ParseError("field 'out' expects a path", line_number);
      cfg.out_path = tok;
    } else if (key == "checks") {
      cfg.selection.clear();
      cfg.select_none = false;
      std::string tok;
      bool any = false;
      while (ls >> tok) {
        any = true;
        if (tok == "all") {
          cfg.selection.clear();
          cfg.select_none = false;
        } else if (tok == "none") {
          cfg.selection.clear();
          cfg.select_none = true;
        } else {
          try {
            cfg.selection.push_back(parse_check_name(tok));
          } catch (const ParameterError&) {
            throw ParseError("unknown check name '" + tok + "'", line_number);
          }
        }
      }
      if (!any)
        throw ParseError("field 'checks' expects 'all', 'none', or check names",
                         line_number);
    } else if (key == "instance") {
      std::string name;
      ls >> name;
      if (name.empty())
        throw ParseError("field 'instance' expects a name", line_number);
      if (!names.insert(name).second)
        throw ParseError("duplicate instance name '" + name + "'", line_number);
      std::shared_ptr<Potential> p = parse_potential(in, line_number);
      cfg.instances.push_back({name, std::move(p)});
    } else {
      throw ParseError("unknown directive '" + key + "'", line_number);
    }
  }
  return cfg;
}

SuiteConfig parse_suite_config(const std::string& text) {
  std::istringstream in(text);
  return parse_suite_config(in);
}

SuiteReport run_suite(const SuiteConfig& config) {
  SuiteReport rep;
  rep.samples = config.samples;
  rep.seeds = config.seeds;
  rep.width_corruption = config.width_corruption;
  const std::vector<CheckName> sel = config.select_none
                                         ? std::vector<CheckName>{}
                                         : (config.selection.empty() ? all_checks()
                                                                     : config.selection);
  for (const CheckName c : sel) rep.check_names.push_back(check_name_str(c));
  if (sel.empty() || config.instances.empty()) return rep;

  std::vector<std::future<InstanceRun>> futures;
  futures.reserve(config.seeds.size() * config.instances.size());
  for (const std::uint64_t seed : config.seeds) {
    for (std::size_t i = 0; i < config.instances.size(); ++i) {
      const InstanceSpec inst = config.instances[i];
      const std::uint32_t idx = static_cast<std::uint32_t>(i);
      futures.push_back(std::async(std::launch::async, [&config, &sel, inst, seed, idx] {
        TiltedMeasure m(*inst.potential);
        const SharedBatches shared = make_shared_batches(m, config, seed, idx);
        InstanceRun run;
        run.instance = inst.name;
        run.dim = inst.potential->dim();
        run.seed = seed;
        run.checks.reserve(sel.size());
        for (const CheckName name : sel) {
          InequalityReport r = check(name, m, shared);
          r.instance = inst.name;
          run.checks.push_back(std::move(r));
        }
        return run;
      }));
    }
  }
  for (auto& f : futures) rep.runs.push_back(f.get());
  for (const InstanceRun& run : rep.runs)
    for (const InequalityReport& r : run.checks)
      if (r.verdict == Verdict::Fails) rep.exit_code = 1;
  return rep;
}

namespace {

const char* bound_str(BoundDirection b) {
  switch (b) {
    case BoundDirection::Exact: return "exact";
    case BoundDirection::Lower: return "lower";
    case BoundDirection::Upper: return "upper";
  }
  return "exact";
}

ordered_json estimate_json(const Estimate& e) {
  ordered_json j;
  j["value"] = e.value;
  j["se"] = e.std_error;
  j["count"] = e.sample_count;
  j["method"] = method_name(e.method);
  j["bound"] = bound_str(e.bound);
  return j;
}

}  // namespace

std::string SuiteReport::machine_report() const {
  ordered_json j;
  j["format"] = "tiltlab-suite-report";
  j["version"] = 1;
  j["samples"] = samples;
  j["seeds"] = seeds;
  j["checks"] = check_names;
  j["width_corruption"] = width_corruption;
  j["exit_code"] = exit_code;
  ordered_json runs_json = ordered_json::array();
  for (const InstanceRun& run : runs) {
    ordered_json rj;
    rj["instance"] = run.instance;
    rj["dim"] = run.dim;
    rj["seed"] = run.seed;
    ordered_json checks_json = ordered_json::array();
    for (const InequalityReport& r : run.checks) {
      ordered_json cj;
      cj["check"] = check_name_str(r.name);
      cj["verdict"] = verdict_str(r.verdict);
      cj["margin"] = r.margin;
      cj["margin_se"] = r.margin_se;
      cj["bias_allowance"] = r.bias_allowance;
      cj["lhs"] = estimate_json(r.lhs);
      cj["rhs"] = estimate_json(r.rhs);
      ordered_json terms_json;
      for (const auto& [k, v] : r.terms) terms_json[k] = estimate_json(v);
      cj["terms"] = terms_json;
      cj["note"] = r.note;
      checks_json.push_back(std::move(cj));
    }
    rj["checks"] = std::move(checks_json);
    runs_json.push_back(std::move(rj));
  }
  j["runs"] = std::move(runs_json);
  return j.dump(2) + "\n";
}

std::string SuiteReport::console_table() const {
  std::string out;
  char buf[200];
  std::snprintf(buf, sizeof(buf), "%-12s %6s  %-28s %-14s %12s %12s\n", "instance",
                "seed", "check", "verdict", "margin", "3se+allow");
  out += buf;
  out += std::string(89, '-') + "\n";
  std::size_t fails = 0, n_a = 0, total = 0;
  for (const InstanceRun& run : runs) {
    for (const InequalityReport& r : run.checks) {
      ++total;
      if (r.verdict == Verdict::Fails) ++fails;
      if (r.verdict == Verdict::NotApplicable) ++n_a;
      std::snprintf(buf, sizeof(buf), "%-12s %6llu  %-28s %-14s %+12.4e %12.4e\n",
                    run.instance.c_str(),
                    static_cast<unsigned long long>(run.seed), check_name_str(r.name),
                    verdict_str(r.verdict), r.margin,
                    3.0 * r.margin_se + r.bias_allowance);
      out += buf;
    }
  }
  std::snprintf(buf, sizeof(buf),
                "checks: %zu  holds: %zu  fails: %zu  not_applicable: %zu\n", total,
                total - fails - n_a, fails, n_a);
  out += buf;
  return out;
}

}  // namespace tiltlab
