#pragma once

#include <Eigen/Core>

#include "rdlm/augment.hpp"

namespace rdlm {

// Exact Gaussian-model smoothing results used to validate the engine.
struct SmootherResult {
  Eigen::VectorXd means;
  Eigen::VectorXd variances;
  double log_marginal_likelihood = 0.0;
};

// Sequential Kalman filter plus RTS smoother for the collapsed Gaussian
// model. The flat state prior of the augmented formulation is matched
// exactly: state 1 starts from N(0, diffuse_prior_variance) and every later
// state receives an extra zero pseudo-observation with that same variance,
// so the posterior is N(mean, Q^{-1}) with
//   Q = eps*I + sys_variance^{-1} R + obs_variance^{-1} I_obs,
// eps = 1/diffuse_prior_variance. The log marginal likelihood comes from the
// prediction-error decomposition over data and pseudo-observations, which is
// the exact normalizing constant of the field density the engine maximizes.
SmootherResult kalman_smooth(const TimeSeries& y, double obs_variance,
                             double sys_variance, double diffuse_prior_variance);

// Tensor-grid specification for the brute-force posterior: bounds and counts
// per hyperparameter axis in internal coordinates (count 1 pins the axis at
// its lower bound) and a shared uniform state grid.
struct DenseGridSpec {
  Eigen::MatrixXd theta_bounds;  // hyper_dim x 2
  Eigen::VectorXi theta_counts;  // per-axis counts, each <= 41
  double state_lo = -1.0;
  double state_hi = 1.0;
  int state_resolution = 41;
};

struct DensePosterior {
  Eigen::MatrixXd theta_points;        // one row per tensor point, internal coords
  Eigen::VectorXd theta_mass;          // sums to 1
  Eigen::VectorXd state_grid;          // shared support, length K
  Eigen::MatrixXd state_marginal;      // K x n_d, each column sums to 1
  Eigen::VectorXd state_marginal_mean;
  Eigen::VectorXd state_marginal_sd;
};

// Brute-force gridded posterior over (theta, a). Per theta point the state
// chain is summed exactly on the tensor grid (the chain structure lets the
// tensor sum factor step by step, which reproduces the naive enumeration
// bit-for-bit up to summation order). Refuses state_dim > 8 or resolutions
// above 41 per axis.
DensePosterior dense_posterior(const AugmentedModel& model, const DenseGridSpec& grid);

}  // namespace rdlm
