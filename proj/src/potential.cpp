#include "tiltlab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <sstream>

#include "tiltlab/errors.hpp"

namespace tiltlab {

const char* family_name(Family f) {
  switch (f) {
    case Family::Linear: return "linear";
    case Family::ScaledQuadratic: return "scaled_quadratic";
    case Family::LogSumExp: return "logsumexp";
    case Family::BlackBox: return "black_box";
  }
  return "?";
}

const char* functional_name(Functional f) {
  switch (f) {
    case Functional::KL: return "kl";
    case Functional::Fisher: return "fisher";
    case Functional::LaplacianMean: return "laplacian_mean";
    case Functional::XGrad: return "x_grad";
    case Functional::SecondMoment: return "second_moment";
    case Functional::EntropyGap: return "entropy_gap";
    case Functional::Width: return "width";
    case Functional::LogNormalizer: return "log_normalizer";
  }
  return "?";
}

Potential::Potential(Family family, int dim, Capabilities caps)
    : family_(family), dim_(dim), caps_(caps) {
  if (dim <= 0) throw ParameterError("potential dimension must be positive");
}

void Potential::check_dim(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_)
    throw DimensionError("point dimension does not match potential dimension");
}

std::vector<double> Potential::gradient(std::span<const double> x) const {
  std::vector<double> g(dim_);
  gradient(x, g);
  return g;
}

double Potential::suggested_radius() const { return 8.0; }

double Potential::marginal_cdf(int, double) const {
  throw UnsupportedError("marginal_cdf: no closed-form marginals for this family");
}

void Potential::sample_exact(RngStream&, std::span<double>) const {
  throw UnsupportedError("sample_exact: family has no exact sampler");
}

std::string Potential::serialize() const {
  throw UnsupportedError("serialize: family is not serializable");
}

// ---------------------------------------------------------------------------
// Linear: f(x) = <alpha, x> - |alpha|^2 / 2, nu = N(alpha, Id).

LinearPotential::LinearPotential(std::vector<double> shift)
    : Potential(Family::Linear, static_cast<int>(shift.size()),
                Capabilities{.exact_sampler = true,
                             .analytic_kl = true,
                             .analytic_fisher = true,
                             .analytic_width = true,
                             .analytic_m = true,
                             .analytic_drift = true,
                             .finite_extreme_points = true}),
      shift_(std::move(shift)) {
  for (double v : shift_)
    if (!std::isfinite(v)) throw ParameterError("linear potential: shift must be finite");
  half_norm_sq_ = 0.5 * norm_sq(shift_);
}

double LinearPotential::value(std::span<const double> x) const {
  check_dim(x);
  return dot(shift_, x) - half_norm_sq_;
}

void LinearPotential::gradient(std::span<const double> x, std::span<double> out) const {
  check_dim(x);
  std::copy(shift_.begin(), shift_.end(), out.begin());
}

double LinearPotential::laplacian(std::span<const double> x) const {
  check_dim(x);
  return 0.0;
}

GradientSetDescriptor LinearPotential::gradient_set() const {
  GradientSetDescriptor d;
  d.kind = GradientSetKind::Singleton;
  d.extreme_points = {shift_};
  return d;
}

double LinearPotential::suggested_radius() const {
  return std::max(8.0, 4.0 + norm(shift_));
}

std::optional<double> LinearPotential::closed_form(Functional f) const {
  const double a2 = 2.0 * half_norm_sq_;
  switch (f) {
    case Functional::KL: return 0.5 * a2;
    case Functional::Fisher: return a2;
    case Functional::LaplacianMean: return 0.0;
    case Functional::XGrad: return a2;
    case Functional::SecondMoment: return static_cast<double>(dim_) + a2;
    case Functional::EntropyGap: return 0.0;
    case Functional::Width: return 0.0;
    case Functional::LogNormalizer: return 0.0;
  }
  return std::nullopt;
}

double LinearPotential::marginal_cdf(int coord, double v) const {
  return normal_cdf(v - shift_.at(coord));
}

void LinearPotential::sample_exact(RngStream& rng, std::span<double> out) const {
  for (int i = 0; i < dim_; ++i) out[i] = shift_[i] + rng.gaussian();
}

std::string LinearPotential::serialize() const {
  std::ostringstream os;
  os << "potential linear\n"
     << "dim " << dim_ << "\n"
     << "shift";
  for (double v : shift_) os << ' ' << format_hex_double(v);
  os << "\nend\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// LogSumExp: f(x) = log sum_i p_i exp(<c_i, x> - |c_i|^2/2); nu is the
// Gaussian mixture sum_i p_i N(c_i, Id). Normalized by construction.

LogSumExpPotential::LogSumExpPotential(std::vector<double> weights,
                                       std::vector<std::vector<double>> centers)
    : Potential(Family::LogSumExp,
                centers.empty() ? 1 : static_cast<int>(centers.front().size()),
                Capabilities{.exact_sampler = true,
                             .analytic_kl = false,
                             .analytic_fisher = false,
                             .analytic_width = false,
                             .analytic_m = false,
                             .analytic_drift = true,
                             .finite_extreme_points = true}),
      weights_(std::move(weights)),
      centers_(std::move(centers)) {
  if (centers_.empty()) throw ParameterError("logsumexp potential: need at least one center");
  if (weights_.size() != centers_.size())
    throw ParameterError("logsumexp potential: weight/center count mismatch");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w > 0.0)) throw ParameterError("logsumexp potential: weights must be positive");
    total += w;
  }
  max_center_norm_ = 0.0;
  for (const auto& c : centers_) {
    if (static_cast<int>(c.size()) != dim_)
      throw ParameterError("logsumexp potential: inconsistent center dimensions");
    for (double v : c)
      if (!std::isfinite(v)) throw ParameterError("logsumexp potential: centers must be finite");
    max_center_norm_ = std::max(max_center_norm_, norm(c));
  }
  log_weights_.resize(weights_.size());
  half_sq_norms_.resize(weights_.size());
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    weights_[i] /= total;
    log_weights_[i] = std::log(weights_[i]);
    half_sq_norms_[i] = 0.5 * norm_sq(centers_[i]);
  }
}

void LogSumExpPotential::logits(std::span<const double> x, std::span<double> out) const {
  for (std::size_t i = 0; i < centers_.size(); ++i)
    out[i] = log_weights_[i] + dot(centers_[i], x) - half_sq_norms_[i];
}

double LogSumExpPotential::value(std::span<const double> x) const {
  check_dim(x);
  std::vector<double> l(centers_.size());
  logits(x, l);
  return log_sum_exp(l);
}

void LogSumExpPotential::responsibilities(std::span<const double> x,
                                          std::span<double> out) const {
  std::vector<double> l(centers_.size());
  logits(x, l);
  const double lse = log_sum_exp(l);
  for (std::size_t i = 0; i < l.size(); ++i) out[i] = std::exp(l[i] - lse);
}

void LogSumExpPotential::gradient(std::span<const double> x, std::span<double> out) const {
  check_dim(x);
  std::vector<double> r(centers_.size());
  responsibilities(x, r);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < centers_.size(); ++i)
    for (int j = 0; j < dim_; ++j) out[j] += r[i] * centers_[i][j];
}

double LogSumExpPotential::laplacian(std::span<const double> x) const {
  check_dim(x);
  std::vector<double> r(centers_.size());
  responsibilities(x, r);
  std::vector<double> g(dim_, 0.0);
  double second = 0.0;
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    second += r[i] * 2.0 * half_sq_norms_[i];
    for (int j = 0; j < dim_; ++j) g[j] += r[i] * centers_[i][j];
  }
  return second - norm_sq(g);
}

GradientSetDescriptor LogSumExpPotential::gradient_set() const {
  GradientSetDescriptor d;
  d.kind = centers_.size() == 1 ? GradientSetKind::Singleton
                                : GradientSetKind::FiniteExtremePoints;
  d.extreme_points = centers_;
  return d;
}

double LogSumExpPotential::suggested_radius() const {
  return std::max(8.0, 4.0 + max_center_norm_);
}

std::optional<double> LogSumExpPotential::closed_form(Functional f) const {
  if (f == Functional::LogNormalizer) return 0.0;
  if (centers_.size() == 1) {
    // degenerate single-component case is the linear family
    return LinearPotential(centers_.front()).closed_form(f);
  }
  return std::nullopt;
}

std::vector<double> LogSumExpPotential::center(std::size_t i) const { return centers_.at(i); }

double LogSumExpPotential::marginal_cdf(int coord, double v) const {
  double c = 0.0;
  for (std::size_t i = 0; i < centers_.size(); ++i)
    c += weights_[i] * normal_cdf(v - centers_[i].at(coord));
  return c;
}

void LogSumExpPotential::sample_exact(RngStream& rng, std::span<double> out) const {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t pick = centers_.size() - 1;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    acc += weights_[i];
    if (u <= acc) {
      pick = i;
      break;
    }
  }
  for (int j = 0; j < dim_; ++j) out[j] = centers_[pick][j] + rng.gaussian();
}

std::string LogSumExpPotential::serialize() const {
  std::ostringstream os;
  os << "potential logsumexp\n"
     << "dim " << dim_ << "\n"
     << "weights";
  for (double w : weights_) os << ' ' << format_hex_double(w);
  os << "\n";
  for (const auto& c : centers_) {
    os << "center";
    for (double v : c) os << ' ' << format_hex_double(v);
    os << "\n";
  }
  os << "end\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// ScaledQuadratic: f(x) = -(s/2)|x|^2 + (n/2) log(1+s); nu = N(0, Id/(1+s)).

namespace {

Capabilities scaled_quadratic_caps(double s) {
  return Capabilities{.exact_sampler = true,
                      .analytic_kl = true,
                      .analytic_fisher = true,
                      .analytic_width = s == 0.0,
                      .analytic_m = true,
                      .analytic_drift = false,
                      .finite_extreme_points = s == 0.0};
}

}  // namespace

ScaledQuadraticPotential::ScaledQuadraticPotential(double stiffness, int dim)
    : Potential(Family::ScaledQuadratic, dim, scaled_quadratic_caps(stiffness)),
      stiffness_(stiffness) {
  if (!(stiffness > -1.0) || !std::isfinite(stiffness))
    throw ParameterError("scaled_quadratic potential: require stiffness > -1");
}

double ScaledQuadraticPotential::value(std::span<const double> x) const {
  check_dim(x);
  return -0.5 * stiffness_ * norm_sq(x) + 0.5 * dim_ * std::log1p(stiffness_);
}

void ScaledQuadraticPotential::gradient(std::span<const double> x, std::span<double> out) const {
  check_dim(x);
  for (int i = 0; i < dim_; ++i) out[i] = -stiffness_ * x[i];
}

double ScaledQuadraticPotential::laplacian(std::span<const double> x) const {
  check_dim(x);
  return -stiffness_ * dim_;
}

GradientSetDescriptor ScaledQuadraticPotential::gradient_set() const {
  GradientSetDescriptor d;
  if (stiffness_ == 0.0) {
    d.kind = GradientSetKind::Singleton;
    d.extreme_points = {std::vector<double>(dim_, 0.0)};
  } else {
    // K = {-s x : x in R^n} is all of R^n: no finite width exists.
    d.kind = GradientSetKind::HeuristicSearch;
    d.unbounded = true;
  }
  return d;
}

double ScaledQuadraticPotential::suggested_radius() const {
  return std::max(8.0, 8.0 * std::sqrt(variance()));
}

std::optional<double> ScaledQuadraticPotential::closed_form(Functional f) const {
  const double n = static_cast<double>(dim_);
  const double s2 = variance();
  switch (f) {
    case Functional::KL: return 0.5 * n * (s2 - 1.0 - std::log(s2));
    case Functional::Fisher: return stiffness_ * stiffness_ * n * s2;
    case Functional::LaplacianMean: return -stiffness_ * n;
    case Functional::XGrad: return -stiffness_ * n * s2;
    case Functional::SecondMoment: return n * s2;
    case Functional::EntropyGap: return 0.5 * n * std::log(s2);
    case Functional::Width:
      if (stiffness_ == 0.0) return 0.0;
      return std::nullopt;
    case Functional::LogNormalizer: return 0.0;
  }
  return std::nullopt;
}

std::optional<double> ScaledQuadraticPotential::analytic_m() const {
  return stiffness_ * dim_;
}

double ScaledQuadraticPotential::marginal_cdf(int coord, double v) const {
  if (coord < 0 || coord >= dim_) throw DimensionError("marginal_cdf: coordinate out of range");
  return normal_cdf(v / std::sqrt(variance()));
}

void ScaledQuadraticPotential::sample_exact(RngStream& rng, std::span<double> out) const {
  const double sigma = std::sqrt(variance());
  for (int i = 0; i < dim_; ++i) out[i] = sigma * rng.gaussian();
}

std::string ScaledQuadraticPotential::serialize() const {
  std::ostringstream os;
  os << "potential scaled_quadratic\n"
     << "dim " << dim_ << "\n"
     << "stiffness " << format_hex_double(stiffness_) << "\n"
     << "end\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// BlackBox: user callables with central finite-difference fallbacks.

namespace {
constexpr double kFdStep = 1e-4;
}

BlackBoxPotential::BlackBoxPotential(int dim, ValueFn value, GradientFn gradient,
                                     LaplacianFn laplacian)
    : Potential(Family::BlackBox, dim, Capabilities{}),
      value_fn_(std::move(value)),
      gradient_fn_(std::move(gradient)),
      laplacian_fn_(std::move(laplacian)) {
  if (!value_fn_) throw ParameterError("black_box potential: value callable required");
}

double BlackBoxPotential::value(std::span<const double> x) const {
  check_dim(x);
  return value_fn_(x);
}

void BlackBoxPotential::gradient(std::span<const double> x, std::span<double> out) const {
  check_dim(x);
  if (gradient_fn_) {
    gradient_fn_(x, out);
    return;
  }
  std::vector<double> p(x.begin(), x.end());
  for (int i = 0; i < dim_; ++i) {
    const double orig = p[i];
    p[i] = orig + kFdStep;
    const double up = value_fn_(p);
    p[i] = orig - kFdStep;
    const double down = value_fn_(p);
    p[i] = orig;
    out[i] = (up - down) / (2.0 * kFdStep);
  }
}

double BlackBoxPotential::laplacian(std::span<const double> x) const {
  check_dim(x);
  if (laplacian_fn_) return laplacian_fn_(x);
  // n Hessian-diagonal second differences: 2n+1 evaluations.
  std::vector<double> p(x.begin(), x.end());
  const double f0 = value_fn_(p);
  double lap = 0.0;
  for (int i = 0; i < dim_; ++i) {
    const double orig = p[i];
    p[i] = orig + kFdStep;
    const double up = value_fn_(p);
    p[i] = orig - kFdStep;
    const double down = value_fn_(p);
    p[i] = orig;
    lap += (up - 2.0 * f0 + down) / (kFdStep * kFdStep);
  }
  return lap;
}

GradientSetDescriptor BlackBoxPotential::gradient_set() const {
  GradientSetDescriptor d;
  d.kind = GradientSetKind::HeuristicSearch;
  return d;
}

MeanSE BlackBoxPotential::estimate_log_normalizer(RngStream& rng, std::size_t count) {
  std::vector<double> w(count);
  std::vector<double> y(dim_);
  for (std::size_t i = 0; i < count; ++i) {
    rng.fill_gaussian(y);
    w[i] = std::exp(value_fn_(y));
  }
  const MeanSE m = mean_se(w);
  MeanSE out;
  out.mean = std::log(m.mean);
  out.se = m.se / m.mean;  // delta method
  out.count = count;
  set_log_normalizer(out.mean, out.se);
  return out;
}

void BlackBoxPotential::set_log_normalizer(double value, double se) {
  log_normalizer_ = value;
  log_normalizer_se_ = se;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Potential> make_linear(std::vector<double> alpha) {
  return std::make_unique<LinearPotential>(std::move(alpha));
}

std::unique_ptr<Potential> make_logsumexp(std::vector<double> weights,
                                          std::vector<std::vector<double>> centers) {
  return std::make_unique<LogSumExpPotential>(std::move(weights), std::move(centers));
}

std::unique_ptr<Potential> make_scaled_quadratic(double s, int dim) {
  return std::make_unique<ScaledQuadraticPotential>(s, dim);
}

std::unique_ptr<Potential> make_black_box(int dim, BlackBoxPotential::ValueFn value,
                                          BlackBoxPotential::GradientFn gradient,
                                          BlackBoxPotential::LaplacianFn laplacian) {
  return std::make_unique<BlackBoxPotential>(dim, std::move(value), std::move(gradient),
                                             std::move(laplacian));
}

std::unique_ptr<Potential> product_potential(const std::vector<const Potential*>& blocks) {
  if (blocks.empty()) throw ParameterError("product_potential: need at least one block");
  // collect (weights, centers) per block
  std::vector<std::vector<double>> block_weights;
  std::vector<std::vector<std::vector<double>>> block_centers;
  int total_dim = 0;
  std::size_t total_centers = 1;
  for (const Potential* b : blocks) {
    if (const auto* lin = dynamic_cast<const LinearPotential*>(b)) {
      block_weights.push_back({1.0});
      block_centers.push_back({lin->shift()});
    } else if (const auto* lse = dynamic_cast<const LogSumExpPotential*>(b)) {
      block_weights.push_back(lse->weights());
      block_centers.push_back(lse->centers());
    } else {
      throw UnsupportedError("product_potential: blocks must be linear or logsumexp");
    }
    total_dim += b->dim();
    total_centers *= block_centers.back().size();
    if (total_centers > 4096)
      throw ParameterError("product_potential: too many product centers");
  }
  std::vector<double> weights;
  std::vector<std::vector<double>> centers;
  weights.reserve(total_centers);
  centers.reserve(total_centers);
  std::vector<std::size_t> index(blocks.size(), 0);
  for (;;) {
    double w = 1.0;
    std::vector<double> c;
    c.reserve(total_dim);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      w *= block_weights[b][index[b]];
      const auto& bc = block_centers[b][index[b]];
      c.insert(c.end(), bc.begin(), bc.end());
    }
    weights.push_back(w);
    centers.push_back(std::move(c));
    std::size_t b = 0;
    for (; b < blocks.size(); ++b) {
      if (++index[b] < block_centers[b].size()) break;
      index[b] = 0;
    }
    if (b == blocks.size()) break;
  }
  return make_logsumexp(std::move(weights), std::move(centers));
}

// ---------------------------------------------------------------------------
// Serialization.

std::string format_hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

namespace {

double parse_double_token(const std::string& tok, int line) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw ParseError("malformed numeric literal '" + tok + "'", line);
  return v;
}

std::vector<double> parse_doubles(std::istringstream& is, int line) {
  std::vector<double> out;
  std::string tok;
  while (is >> tok) out.push_back(parse_double_token(tok, line));
  return out;
}

}  // namespace

std::unique_ptr<Potential> parse_potential(std::istream& in, int& line_number) {
  std::string line, family;
  int dim = -1;
  std::vector<double> weights, shift;
  std::vector<std::vector<double>> centers;
  double stiffness = 0.0;
  bool have_stiffness = false, have_shift = false, seen_header = false, ended = false;

  while (std::getline(in, line)) {
    ++line_number;
    std::istringstream is(line);
    std::string key;
    if (!(is >> key) || key[0] == '#') continue;
    if (!seen_header) {
      if (key != "potential") throw ParseError("expected 'potential <family>'", line_number);
      if (!(is >> family)) throw ParseError("missing family name", line_number);
      seen_header = true;
      continue;
    }
    if (key == "dim") {
      if (!(is >> dim) || dim <= 0) throw ParseError("field 'dim': need a positive integer", line_number);
    } else if (key == "shift") {
      shift = parse_doubles(is, line_number);
      have_shift = true;
    } else if (key == "weights") {
      weights = parse_doubles(is, line_number);
    } else if (key == "center") {
      centers.push_back(parse_doubles(is, line_number));
    } else if (key == "stiffness") {
      std::string tok;
      if (!(is >> tok)) throw ParseError("field 'stiffness': missing value", line_number);
      stiffness = parse_double_token(tok, line_number);
      have_stiffness = true;
    } else if (key == "end") {
      ended = true;
      break;
    } else {
      throw ParseError("unknown field '" + key + "'", line_number);
    }
  }
  if (!seen_header) throw ParseError("no potential block found", line_number);
  if (!ended) throw ParseError("potential block not terminated by 'end'", line_number);
  if (dim <= 0) throw ParseError("potential block is missing 'dim'", line_number);

  try {
    if (family == "linear") {
      if (!have_shift) throw ParseError("linear potential requires 'shift'", line_number);
      if (static_cast<int>(shift.size()) != dim)
        throw ParseError("field 'shift': length does not match dim", line_number);
      return make_linear(std::move(shift));
    }
    if (family == "logsumexp") {
      if (centers.empty()) throw ParseError("logsumexp potential requires 'center' lines", line_number);
      for (const auto& c : centers)
        if (static_cast<int>(c.size()) != dim)
          throw ParseError("field 'center': length does not match dim", line_number);
      if (weights.empty()) weights.assign(centers.size(), 1.0);
      if (weights.size() != centers.size())
        throw ParseError("field 'weights': count does not match centers", line_number);
      return make_logsumexp(std::move(weights), std::move(centers));
    }
    if (family == "scaled_quadratic") {
      if (!have_stiffness)
        throw ParseError("scaled_quadratic potential requires 'stiffness'", line_number);
      return make_scaled_quadratic(stiffness, dim);
    }
  } catch (const ParameterError& e) {
    throw ParseError(e.what(), line_number);
  }
  throw ParseError("unknown potential family '" + family + "'", line_number);
}

std::unique_ptr<Potential> parse_potential(const std::string& text) {
  std::istringstream is(text);
  int line = 0;
  return parse_potential(is, line);
}

}  // namespace tiltlab
