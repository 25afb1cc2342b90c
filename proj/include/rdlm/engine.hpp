#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rdlm/gaussian_approx.hpp"

namespace rdlm {

// One explored hyperparameter configuration: internal coordinates, integer
// lattice offsets along the standardized exploration axes, the unnormalized
// log posterior, the normalized integration weight and the state
// approximation solved there.
struct ThetaGridPoint {
  HyperValues h;
  Eigen::VectorXd internal;
  Eigen::VectorXi lattice;
  double log_post_unnorm = 0.0;
  double weight = 0.0;
  GaussianApprox approx;
};

struct PosteriorMarginal {
  Eigen::VectorXd support;
  Eigen::VectorXd density;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double median = 0.0;
  double q975 = 0.0;
  bool degenerate = false;
};

struct FitDiagnostics {
  int grid_size = 0;
  int mode_search_iterations = 0;
  long long newton_iterations = 0;
  double wall_seconds = 0.0;
  std::vector<int> masked_indices;
  std::vector<std::string> warnings;
};

struct FitOptions {
  double grid_step = 0.75;      // standardized axis step
  double grid_log_drop = 2.5;   // log-density drop ending the exploration
  double epsilon = 1e-5;        // flat state-prior precision
  double fd_step = 1e-4;        // finite-difference step in internal coords
  double mode_grad_tol = 1e-5;  // quasi-Newton stop on the FD gradient
  int max_mode_iterations = 200;
  int max_axis_steps = 20;
  int marginal_points = 75;
  int threads = 1;
  NewtonOptions newton;
  std::optional<double> fixed_obs_precision;  // pins every observation group
  std::optional<double> fixed_sys_precision;
  std::optional<double> fixed_dof;
};

struct FitResult {
  std::vector<PosteriorMarginal> state_marginals;
  std::vector<PosteriorMarginal> hyper_marginals;
  std::vector<std::string> hyper_names;
  std::vector<ThetaGridPoint> grid;
  FitDiagnostics diagnostics;
};

// Laplace-ratio log posterior of the hyperparameters (up to a constant):
// log pi(x*, theta, y) - log pi_G(x*|theta, y) at the conditional mode x*.
// Exact up to integration error when every term is Gaussian.
double log_post_theta(const AugmentedModel& model, const HyperValues& h,
                      const NewtonOptions& newton = {},
                      const Eigen::VectorXd* warm_start = nullptr,
                      GaussianApprox* approx_out = nullptr);
double log_post_theta(const AugmentedModel& model, const HyperPoint& h,
                      const NewtonOptions& newton = {});

// Locates the posterior mode in internal coordinates, standardizes the axes
// with the finite-difference Hessian, walks every axis until the log density
// drops by grid_log_drop, fills the axis-aligned box, and normalizes the
// resulting integration weights. Points are ordered by lattice offset, so
// the output does not depend on scheduling.
std::vector<ThetaGridPoint> explore_grid(const AugmentedModel& model,
                                         const FitOptions& options = {},
                                         FitDiagnostics* diagnostics = nullptr);

// Per-state mixture of the grid's conditional Gaussians, evaluated on a
// common support of `points` values spanning mean +- 6 sd. Summaries come
// from the exact mixture, the stored curve is trapezoid-normalized.
std::vector<PosteriorMarginal> state_marginals(const std::vector<ThetaGridPoint>& grid,
                                               int points = 75);

// Collapses grid weights onto each internal axis, smooths the log density,
// and maps it to the natural coordinate (precision or dof) with the
// transform Jacobian. Axes the grid never moves along come back degenerate.
std::vector<PosteriorMarginal> hyper_marginals(const AugmentedModel& model,
                                               const std::vector<ThetaGridPoint>& grid);

std::vector<std::string> hyper_names(const AugmentedModel& model);

// The all-zero lattice point (the located mode).
const ThetaGridPoint& grid_mode(const std::vector<ThetaGridPoint>& grid);

FitResult fit_model(const AugmentedModel& model, const FitOptions& options = {});
FitResult fit(const DlmSpec& spec, const FitOptions& options = {});

// Trapezoid summaries of a gridded density (used for hyper marginals).
void summarize_density(PosteriorMarginal& marginal);

}  // namespace rdlm
