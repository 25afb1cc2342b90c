#include "rdlm/model.hpp"

#include <cmath>
#include <stdexcept>

namespace rdlm {

Eigen::Index TimeSeries::observed_count() const {
  if (observed.empty()) return values.size();
  Eigen::Index n = 0;
  for (Eigen::Index t = 0; t < values.size(); ++t)
    if (is_observed(t)) ++n;
  return n;
}

void validate(const TimeSeries& series) {
  if (series.size() < 2)
    throw std::invalid_argument("TimeSeries: need at least 2 observations");
  if (!series.observed.empty() &&
      static_cast<Eigen::Index>(series.observed.size()) != series.size())
    throw std::invalid_argument("TimeSeries: mask length mismatch");
  for (Eigen::Index t = 0; t < series.size(); ++t)
    if (series.is_observed(t) && !std::isfinite(series.values[t]))
      throw std::invalid_argument("TimeSeries: non-finite observed value");
}

double gamma_log_pdf(const GammaPrior& prior, double x) {
  if (!(prior.shape > 0.0) || !(prior.rate > 0.0))
    throw std::domain_error("gamma_log_pdf: shape and rate must be positive");
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return prior.shape * std::log(prior.rate) - std::lgamma(prior.shape) +
         (prior.shape - 1.0) * std::log(x) - prior.rate * x;
}

namespace {

// Mass the truncated Exponential(lambda) on kappa in (0, 1/2) puts on
// kappa >= 1/10, i.e. P(nu <= 10).
double tail_mass(double lambda) {
  if (lambda == 0.0) return 0.8;  // uniform limit: 0.4 / 0.5
  return (std::exp(-0.1 * lambda) - std::exp(-0.5 * lambda)) /
         (1.0 - std::exp(-0.5 * lambda));
}

}  // namespace

DofPrior::DofPrior(double df) : df_(df) {
  if (!(df > 0.0 && df < 1.0))
    throw std::invalid_argument("DofPrior: df must lie in (0, 1)");
  if (df >= 0.8)
    throw std::invalid_argument(
        "DofPrior: df >= 0.8 is unreachable for this prior family");
  // tail_mass decreases monotonically from 0.8 (lambda -> 0) to 0; bisect.
  double lo = 0.0, hi = 1.0;
  while (tail_mass(hi) > df) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (tail_mass(mid) > df ? lo : hi) = mid;
  }
  lambda_ = 0.5 * (lo + hi);
}

double DofPrior::log_pdf(double nu) const {
  if (!(nu > 2.0)) return -std::numeric_limits<double>::infinity();
  // kappa = 1/nu with density lambda*exp(-lambda*kappa)/(1 - exp(-lambda/2)),
  // times the Jacobian 1/nu^2.
  return std::log(lambda_) - lambda_ / nu -
         std::log1p(-std::exp(-0.5 * lambda_)) - 2.0 * std::log(nu);
}

void validate(const PriorSpec& priors) {
  if (!(priors.obs_precision_prior.shape > 0.0) ||
      !(priors.obs_precision_prior.rate > 0.0) ||
      !(priors.sys_precision_prior.shape > 0.0) ||
      !(priors.sys_precision_prior.rate > 0.0))
    throw std::invalid_argument("PriorSpec: Gamma parameters must be positive");
  if (!(priors.dof_df > 0.0 && priors.dof_df < 1.0))
    throw std::invalid_argument("PriorSpec: dof_df must lie in (0, 1)");
}

void validate(const DlmSpec& spec) {
  validate(spec.series);
  validate(spec.priors);
  if (!(spec.obs_variance > 0.0))
    throw std::invalid_argument("DlmSpec: obs_variance must be positive");
  if (const auto* g = std::get_if<GaussianNoise>(&spec.sys_noise)) {
    if (!(g->variance > 0.0))
      throw std::invalid_argument("DlmSpec: system variance must be positive");
  } else {
    const auto& t = std::get<StudentTNoise>(spec.sys_noise);
    if (!(t.marginal_precision > 0.0))
      throw std::invalid_argument("DlmSpec: marginal precision must be positive");
    if (!(t.dof > 2.0))
      throw std::invalid_argument("DlmSpec: dof must exceed 2");
  }
}

Eigen::VectorXd transform_to_internal(const HyperPoint& h) {
  if (!std::isfinite(h.obs_precision) || !std::isfinite(h.sys_precision) ||
      (h.dof && !std::isfinite(*h.dof)))
    throw std::domain_error("transform_to_internal: non-finite input");
  if (!(h.obs_precision > 0.0) || !(h.sys_precision > 0.0))
    throw std::domain_error("transform_to_internal: precisions must be positive");
  if (h.dof && !(*h.dof > 2.0))
    throw std::domain_error("transform_to_internal: dof must exceed 2");
  Eigen::VectorXd z(h.dof ? 3 : 2);
  z[0] = std::log(h.obs_precision);
  z[1] = std::log(h.sys_precision);
  if (h.dof) z[2] = std::log(*h.dof - 2.0);
  return z;
}

HyperPoint transform_from_internal(const Eigen::VectorXd& z) {
  if (z.size() != 2 && z.size() != 3)
    throw std::invalid_argument("transform_from_internal: expected 2 or 3 coords");
  if (!z.allFinite())
    throw std::domain_error("transform_from_internal: non-finite input");
  HyperPoint h;
  h.obs_precision = std::exp(z[0]);
  h.sys_precision = std::exp(z[1]);
  if (z.size() == 3) h.dof = 2.0 + std::exp(z[2]);
  return h;
}

double log_prior(const PriorSpec& priors, const HyperPoint& h) {
  double lp = gamma_log_pdf(priors.obs_precision_prior, h.obs_precision) +
              std::log(h.obs_precision) +
              gamma_log_pdf(priors.sys_precision_prior, h.sys_precision) +
              std::log(h.sys_precision);
  if (h.dof) {
    const DofPrior dof_prior(priors.dof_df);
    lp += dof_prior.log_pdf(*h.dof);
    lp += (*h.dof > 2.0) ? std::log(*h.dof - 2.0)
                         : -std::numeric_limits<double>::infinity();
  }
  return lp;
}

}  // namespace rdlm
