#pragma once

#include <stdexcept>
#include <string>

#include "rdlm/augment.hpp"
#include "rdlm/tridiag.hpp"

namespace rdlm {

// Gaussian approximation to the full conditional of the state vector:
// matched mode and curvature, banded precision, and the quantities the
// engine integrates over.
struct GaussianApprox {
  Eigen::VectorXd mode;
  BandedSpd precision;
  double log_det_precision = 0.0;
  Eigen::VectorXd marginal_variances;
  int newton_iterations = 0;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& msg, Eigen::VectorXd last, int iters)
      : std::runtime_error(msg), last_iterate(std::move(last)), iterations(iters) {}

  Eigen::VectorXd last_iterate;
  int iterations = 0;
};

struct NewtonOptions {
  double grad_tol = 1e-8;
  double step_tol = 1e-10;
  int max_iterations = 100;
  int max_halvings = 20;
  double hessian_clamp = -1e-10;  // per-term d2 is capped at this value
  double step_cap = 100.0;        // sup-norm bound before the line search;
                                  // clamped tail curvature can blow up the
                                  // raw Newton step
};

// Log density terms of the full conditional at state x, without the
// hyperparameter prior: the flat epsilon state prior plus every active
// observation and correction term.
double log_field_at(const AugmentedModel& model, const HyperValues& h,
                    const Eigen::VectorXd& x);

// log pi(x, theta, y): hyperparameter prior plus log_field_at.
double log_joint_at(const AugmentedModel& model, const HyperValues& h,
                    const Eigen::VectorXd& x);
double log_joint_at(const AugmentedModel& model, const HyperPoint& h,
                    const Eigen::VectorXd& x);

// Newton mode search with per-term second-order expansion and a halving line
// search. Quadratic objectives (Gaussian noise) converge in one step. Throws
// ConvergenceError with the last iterate when the iteration cap is hit.
GaussianApprox find_mode(const AugmentedModel& model, const HyperValues& h,
                         const NewtonOptions& opts = {},
                         const Eigen::VectorXd* warm_start = nullptr);
GaussianApprox find_mode(const AugmentedModel& model, const HyperPoint& h,
                         const NewtonOptions& opts = {});

// Cold-start state: per-state mean of its active observations, with linear
// interpolation across states that have none.
Eigen::VectorXd newton_cold_start(const AugmentedModel& model);

}  // namespace rdlm
