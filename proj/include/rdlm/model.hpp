#pragma once

#include <Eigen/Core>

#include <optional>
#include <variant>
#include <vector>

namespace rdlm {

// Observed series with an optional missing-value mask. Masked entries take no
// part in the likelihood.
struct TimeSeries {
  Eigen::VectorXd values;
  std::vector<bool> observed;  // empty means fully observed

  TimeSeries() = default;
  explicit TimeSeries(Eigen::VectorXd v) : values(std::move(v)) {}
  TimeSeries(Eigen::VectorXd v, std::vector<bool> mask)
      : values(std::move(v)), observed(std::move(mask)) {}

  Eigen::Index size() const { return values.size(); }
  bool is_observed(Eigen::Index t) const {
    return observed.empty() || observed[static_cast<std::size_t>(t)];
  }
  Eigen::Index observed_count() const;
};

void validate(const TimeSeries& series);

struct GaussianNoise {
  double variance = 1.0;
};

struct StudentTNoise {
  double marginal_precision = 1.0;  // Var(w) = 1/tau, so nu > 2 is required
  double dof = 10.0;
};

// System-noise family. The stored values act as generating/reference values;
// inference treats the corresponding hyperparameters as free.
using NoiseFamily = std::variant<GaussianNoise, StudentTNoise>;

inline bool is_student_t(const NoiseFamily& family) {
  return std::holds_alternative<StudentTNoise>(family);
}

struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
};

// log density of Gamma(shape, rate) at x > 0.
double gamma_log_pdf(const GammaPrior& prior, double x);

// Prior on the Student-t degrees of freedom. The flexibility kappa = 1/nu
// lives on (0, 1/2) and gets an Exponential(lambda) truncated to that
// interval, so the prior mode kappa = 0 recovers the Gaussian model. lambda
// is solved from the mass constraint P(2 < nu <= 10) = df.
class DofPrior {
 public:
  explicit DofPrior(double df);

  double df() const { return df_; }
  double rate() const { return lambda_; }
  double log_pdf(double nu) const;  // density of nu on (2, inf)

 private:
  double df_;
  double lambda_;
};

struct PriorSpec {
  GammaPrior obs_precision_prior{1.0, 2.375};
  GammaPrior sys_precision_prior{1.0, 2.375};
  double dof_df = 0.3;
};

void validate(const PriorSpec& priors);

// Declarative first-order DLM: y_t = a_t + v_t with Gaussian v_t, and
// a_t = a_{t-1} + w_t with w_t from the selected noise family.
struct DlmSpec {
  TimeSeries series;
  double obs_variance = 1.0;  // generating/reference value of the v_t variance
  NoiseFamily sys_noise = GaussianNoise{};
  PriorSpec priors;
};

void validate(const DlmSpec& spec);

// Hyperparameter point in natural coordinates. dof is present only for the
// Student-t system-noise family.
struct HyperPoint {
  double obs_precision = 1.0;
  double sys_precision = 1.0;
  std::optional<double> dof;
};

// Unbounded internal coordinates used for exploration:
//   z1 = log obs precision, z2 = log sys precision, z3 = log(nu - 2).
// The two functions are mutually inverse on valid points.
Eigen::VectorXd transform_to_internal(const HyperPoint& h);
HyperPoint transform_from_internal(const Eigen::VectorXd& z);

// Log prior density of the internal coordinates: Gamma log densities on the
// precisions, the dof prior when present, plus the log-Jacobian of the
// transform. Tends to -inf at the boundaries (precision -> 0, nu -> 2).
double log_prior(const PriorSpec& priors, const HyperPoint& h);

}  // namespace rdlm
