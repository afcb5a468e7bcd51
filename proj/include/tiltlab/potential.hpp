#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tiltlab/math_util.hpp"
#include "tiltlab/rng.hpp"

namespace tiltlab {

enum class Family { Linear, ScaledQuadratic, LogSumExp, BlackBox };

const char* family_name(Family f);

struct Capabilities {
  bool exact_sampler = false;
  bool analytic_kl = false;
  bool analytic_fisher = false;
  bool analytic_width = false;
  bool analytic_m = false;
  bool analytic_drift = false;
  bool finite_extreme_points = false;
};

enum class GradientSetKind { Singleton, FiniteExtremePoints, IntervalBox, HeuristicSearch };

struct SearchConfig {
  int restarts = 20;
  int steps = 300;
  double step_size = 0.5;
  double box_radius = 10.0;
};

// Description of K = closure{grad f(x) : x in R^n}.
struct GradientSetDescriptor {
  GradientSetKind kind = GradientSetKind::HeuristicSearch;
  std::vector<std::vector<double>> extreme_points;
  std::vector<double> box_lower, box_upper;
  SearchConfig search;
  bool unbounded = false;  // infinite-width marker; width checks not applicable
};

// Scalar functionals of the tilted measure dnu = e^f dgamma.
enum class Functional {
  KL,            // int f dnu
  Fisher,        // int |grad f|^2 dnu
  LaplacianMean, // int (lap f) dnu
  XGrad,         // int <x, grad f> dnu
  SecondMoment,  // int |x|^2 dnu
  EntropyGap,    // H(nu) - H(gamma)
  Width,         // E_gamma sup_{t in K} <y,t>
  LogNormalizer  // log int e^f dgamma
};

const char* functional_name(Functional f);

// The potential f defining dnu = e^f dgamma. Structured families are
// normalized at construction so the log-normalizer is exactly zero; black-box
// potentials carry a separately estimated one with a standard error.
// Instances are immutable after construction and safe to share across lanes.
class Potential {
 public:
  virtual ~Potential() = default;

  Family family() const { return family_; }
  int dim() const { return dim_; }
  double log_normalizer() const { return log_normalizer_; }
  double log_normalizer_se() const { return log_normalizer_se_; }
  const Capabilities& capabilities() const { return caps_; }

  virtual double value(std::span<const double> x) const = 0;
  virtual void gradient(std::span<const double> x, std::span<double> out) const = 0;
  virtual double laplacian(std::span<const double> x) const = 0;
  std::vector<double> gradient(std::span<const double> x) const;

  virtual GradientSetDescriptor gradient_set() const = 0;

  // Quadrature/tail radius: tail mass outside [-R, R]^n is negligible.
  virtual double suggested_radius() const;

  // Closed-form functional values where the family admits them.
  virtual std::optional<double> closed_form(Functional) const { return std::nullopt; }

  // Exact M = -inf lap f, when the family knows it.
  virtual std::optional<double> analytic_m() const { return std::nullopt; }
  // Certified upper bound on M usable on the right-hand side of bounds.
  virtual std::optional<double> m_upper_bound() const { return analytic_m(); }

  // CDF of marginal j of nu; only exact-sampler families implement it.
  virtual double marginal_cdf(int coord, double v) const;

  virtual void sample_exact(RngStream& rng, std::span<double> out) const;

  virtual std::string serialize() const;

 protected:
  Potential(Family family, int dim, Capabilities caps);
  void check_dim(std::span<const double> x) const;

  Family family_;
  int dim_;
  Capabilities caps_;
  double log_normalizer_ = 0.0;
  double log_normalizer_se_ = 0.0;
};

class LinearPotential final : public Potential {
 public:
  explicit LinearPotential(std::vector<double> shift);
  double value(std::span<const double> x) const override;
  void gradient(std::span<const double> x, std::span<double> out) const override;
  double laplacian(std::span<const double> x) const override;
  GradientSetDescriptor gradient_set() const override;
  double suggested_radius() const override;
  std::optional<double> closed_form(Functional f) const override;
  std::optional<double> analytic_m() const override { return 0.0; }
  double marginal_cdf(int coord, double v) const override;
  void sample_exact(RngStream& rng, std::span<double> out) const override;
  std::string serialize() const override;

  const std::vector<double>& shift() const { return shift_; }

 private:
  std::vector<double> shift_;
  double half_norm_sq_;
};

class LogSumExpPotential final : public Potential {
 public:
  LogSumExpPotential(std::vector<double> weights, std::vector<std::vector<double>> centers);
  double value(std::span<const double> x) const override;
  void gradient(std::span<const double> x, std::span<double> out) const override;
  double laplacian(std::span<const double> x) const override;
  GradientSetDescriptor gradient_set() const override;
  double suggested_radius() const override;
  std::optional<double> closed_form(Functional f) const override;
  // LogSumExp has a positive semidefinite Hessian, so inf lap f >= 0
  // and 0 is always a valid upper bound for M.
  std::optional<double> m_upper_bound() const override { return 0.0; }
  double marginal_cdf(int coord, double v) const override;
  void sample_exact(RngStream& rng, std::span<double> out) const override;
  std::string serialize() const override;

  std::size_t component_count() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double> center(std::size_t i) const;
  const std::vector<std::vector<double>>& centers() const { return centers_; }
  // Softmax component responsibilities at x (the gradient is their
  // weighted center average).
  void responsibilities(std::span<const double> x, std::span<double> out) const;

 private:
  void logits(std::span<const double> x, std::span<double> out) const;

  std::vector<double> weights_;     // normalized, sum 1
  std::vector<double> log_weights_;
  std::vector<std::vector<double>> centers_;
  std::vector<double> half_sq_norms_;
  double max_center_norm_;
};

class ScaledQuadraticPotential final : public Potential {
 public:
  ScaledQuadraticPotential(double stiffness, int dim);
  double value(std::span<const double> x) const override;
  void gradient(std::span<const double> x, std::span<double> out) const override;
  double laplacian(std::span<const double> x) const override;
  GradientSetDescriptor gradient_set() const override;
  double suggested_radius() const override;
  std::optional<double> closed_form(Functional f) const override;
  std::optional<double> analytic_m() const override;
  double marginal_cdf(int coord, double v) const override;
  void sample_exact(RngStream& rng, std::span<double> out) const override;
  std::string serialize() const override;

  double stiffness() const { return stiffness_; }
  double variance() const { return 1.0 / (1.0 + stiffness_); }

 private:
  double stiffness_;
};

class BlackBoxPotential final : public Potential {
 public:
  using ValueFn = std::function<double(std::span<const double>)>;
  using GradientFn = std::function<void(std::span<const double>, std::span<double>)>;
  using LaplacianFn = std::function<double(std::span<const double>)>;

  BlackBoxPotential(int dim, ValueFn value, GradientFn gradient = nullptr,
                    LaplacianFn laplacian = nullptr);
  double value(std::span<const double> x) const override;
  void gradient(std::span<const double> x, std::span<double> out) const override;
  double laplacian(std::span<const double> x) const override;
  GradientSetDescriptor gradient_set() const override;

  // Monte Carlo estimate of log int e^f dgamma, stored on the potential so
  // downstream KL estimates can subtract it.
  MeanSE estimate_log_normalizer(RngStream& rng, std::size_t count);
  void set_log_normalizer(double value, double se);

 private:
  ValueFn value_fn_;
  GradientFn gradient_fn_;
  LaplacianFn laplacian_fn_;
};

std::unique_ptr<Potential> make_linear(std::vector<double> alpha);
std::unique_ptr<Potential> make_logsumexp(std::vector<double> weights,
                                          std::vector<std::vector<double>> centers);
std::unique_ptr<Potential> make_scaled_quadratic(double s, int dim);
std::unique_ptr<Potential> make_black_box(int dim, BlackBoxPotential::ValueFn value,
                                          BlackBoxPotential::GradientFn gradient = nullptr,
                                          BlackBoxPotential::LaplacianFn laplacian = nullptr);

// Tensor product of Linear/LogSumExp blocks: f(x_1,..,x_k) = sum_j f_j(x_j).
// The result is again a (normalized) LogSumExp potential whose centers are
// the Cartesian product of the block centers.
std::unique_ptr<Potential> product_potential(const std::vector<const Potential*>& blocks);

inline double eval_f(const Potential& p, std::span<const double> x) { return p.value(x); }
inline std::vector<double> eval_grad(const Potential& p, std::span<const double> x) {
  return p.gradient(x);
}
inline double eval_laplacian(const Potential& p, std::span<const double> x) {
  return p.laplacian(x);
}

// Round-trippable plain-text serialization; floats written as C hex literals
// so parse(serialize(p)) reproduces parameters bit for bit.
std::string format_hex_double(double v);
std::unique_ptr<Potential> parse_potential(std::istream& in, int& line_number);
std::unique_ptr<Potential> parse_potential(const std::string& text);

}  // namespace tiltlab
