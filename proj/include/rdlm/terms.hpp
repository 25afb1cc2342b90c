#pragma once

namespace rdlm {

// Value and first two derivatives of a scalar log-density term with respect
// to its argument: the state for observation terms, the state increment for
// correction terms.
struct TermEval {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

// log N(y; mean, 1/precision); derivatives taken w.r.t. mean.
TermEval gaussian_obs_term(double y, double mean, double precision);

// log N(0; delta, 1/precision): Gaussian evolution density at increment
// delta. Identical to gaussian_obs_term(0, delta, precision) up to the sign
// convention of the derivatives (taken w.r.t. delta).
TermEval gaussian_correction_term(double delta, double precision);

// log t(0; delta, tau, nu) parametrized by its marginal precision tau, so
// Var = 1/tau and the scale is sigma^2 = (nu-2)/(nu*tau). Requires nu > 2.
// d2 turns positive for |delta| > sigma*sqrt(nu); the Newton solver clamps it
// when assembling the approximation Hessian.
TermEval student_t_correction_term(double delta, double tau, double nu);

}  // namespace rdlm
