#pragma once

#include <Eigen/Core>

#include <limits>
#include <vector>

#include "rdlm/model.hpp"

namespace rdlm {

enum class RowRole { observation, evolution };

// One row of the augmented observation model. Observation rows carry a data
// value and touch a single state; evolution rows carry a faked zero and touch
// the adjacent pair through the increment a[state_hi] - a[state_lo].
struct AugmentedRow {
  RowRole role = RowRole::observation;
  int state_hi = 0;
  int state_lo = -1;         // unused for observation rows
  double value = 0.0;        // y for observation rows, 0 for evolution rows
  int precision_group = 0;   // observation-precision group (0 for one series)
  bool active = true;        // masked observations stay in z but go inactive
};

// Augmented response (data followed by faked zeros) together with the
// collapsed latent structure inference runs on: the states carry a flat
// Gaussian prior epsilon*I and every active row contributes one likelihood
// term. The model also carries the priors and the system-noise family so the
// engine can evaluate hyperparameter densities.
struct AugmentedModel {
  Eigen::VectorXd z;
  std::vector<AugmentedRow> layout;
  int state_dim = 0;
  double prior_precision_epsilon = 1e-5;
  int precision_groups = 1;
  NoiseFamily sys_noise = GaussianNoise{};
  std::vector<GammaPrior> obs_precision_priors{GammaPrior{1.0, 2.375}};
  GammaPrior sys_precision_prior{1.0, 2.375};
  double dof_df = 0.3;

  bool student_t() const { return is_student_t(sys_noise); }
  int hyper_dim() const { return precision_groups + 1 + (student_t() ? 1 : 0); }
  int active_observation_rows() const;
  int active_evolution_rows() const;
};

// Builds the single-series augmented model: z has length 2*n_d - 1 with the
// data on the first n_d entries and zeros after, evolution row t linking
// states (t, t-1). Masked observations become inactive rows.
AugmentedModel build_augmented(const DlmSpec& spec, double epsilon = 1e-5);

// Natural-coordinate hyperparameter values for a possibly grouped model: one
// observation precision per group, one system precision, dof for Student-t.
struct HyperValues {
  Eigen::VectorXd obs_precision;
  double sys_precision = 1.0;
  double dof = std::numeric_limits<double>::quiet_NaN();
};

HyperValues to_hyper_values(const AugmentedModel& model, const HyperPoint& h);
HyperPoint to_hyper_point(const AugmentedModel& model, const HyperValues& h);

// Internal coordinates for a model: log precisions per group, log system
// precision, log(nu - 2) when the family is Student-t.
Eigen::VectorXd hyper_to_internal(const AugmentedModel& model, const HyperValues& h);
HyperValues hyper_from_internal(const AugmentedModel& model, const Eigen::VectorXd& z);

// Log prior of the internal coordinates under the model's priors (Gamma on
// every precision, dof prior when present, plus transform Jacobians).
double model_log_prior(const AugmentedModel& model, const HyperValues& h);

// RW1 structure matrix: tridiagonal with diagonal (1, 2, ..., 2, 1) and -1 off
// the diagonal; rank n-1, row sums zero. The state prior precision of the
// Gaussian model is this matrix divided by the system variance.
struct Rw1Precision {
  int dimension = 0;
  Eigen::VectorXd diag;
  Eigen::VectorXd off;
  Eigen::MatrixXd dense() const;
};

Rw1Precision build_rw1_precision(int n);

}  // namespace rdlm
