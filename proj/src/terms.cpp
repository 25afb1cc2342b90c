#include "rdlm/terms.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rdlm {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

TermEval gaussian_obs_term(double y, double mean, double precision) {
  if (!(precision > 0.0))
    throw std::domain_error("gaussian_obs_term: precision must be positive");
  const double r = y - mean;
  TermEval out;
  out.value = 0.5 * (std::log(precision) - kLog2Pi) - 0.5 * precision * r * r;
  out.d1 = precision * r;
  out.d2 = -precision;
  return out;
}

TermEval gaussian_correction_term(double delta, double precision) {
  if (!(precision > 0.0))
    throw std::domain_error("gaussian_correction_term: precision must be positive");
  TermEval out;
  out.value =
      0.5 * (std::log(precision) - kLog2Pi) - 0.5 * precision * delta * delta;
  out.d1 = -precision * delta;
  out.d2 = -precision;
  return out;
}

TermEval student_t_correction_term(double delta, double tau, double nu) {
  if (!(tau > 0.0))
    throw std::domain_error("student_t_correction_term: tau must be positive");
  if (!(nu > 2.0))
    throw std::domain_error(
        "student_t_correction_term: nu must exceed 2 for marginal precision");
  const double sigma2 = (nu - 2.0) / (nu * tau);
  const double s2nu = sigma2 * nu;  // = (nu-2)/tau
  TermEval out;
  out.value = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
              0.5 * std::log(std::numbers::pi * nu) - 0.5 * std::log(sigma2) -
              0.5 * (nu + 1.0) * std::log1p(delta * delta / s2nu);
  const double denom = s2nu + delta * delta;
  out.d1 = -(nu + 1.0) * delta / denom;
  out.d2 = -(nu + 1.0) * (s2nu - delta * delta) / (denom * denom);
  return out;
}

}  // namespace rdlm
