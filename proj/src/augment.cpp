#include "rdlm/augment.hpp"

#include <cmath>
#include <stdexcept>

namespace rdlm {

int AugmentedModel::active_observation_rows() const {
  int n = 0;
  for (const auto& row : layout)
    if (row.role == RowRole::observation && row.active) ++n;
  return n;
}

int AugmentedModel::active_evolution_rows() const {
  int n = 0;
  for (const auto& row : layout)
    if (row.role == RowRole::evolution && row.active) ++n;
  return n;
}

AugmentedModel build_augmented(const DlmSpec& spec, double epsilon) {
  validate(spec);
  if (!(epsilon > 0.0))
    throw std::invalid_argument("build_augmented: epsilon must be positive");
  const int n = static_cast<int>(spec.series.size());

  AugmentedModel model;
  model.state_dim = n;
  model.prior_precision_epsilon = epsilon;
  model.precision_groups = 1;
  model.sys_noise = spec.sys_noise;
  model.obs_precision_priors = {spec.priors.obs_precision_prior};
  model.sys_precision_prior = spec.priors.sys_precision_prior;
  model.dof_df = spec.priors.dof_df;

  model.z.resize(2 * n - 1);
  model.layout.reserve(2 * n - 1);
  for (int t = 0; t < n; ++t) {
    const bool active = spec.series.is_observed(t);
    model.z[t] = active ? spec.series.values[t] : 0.0;
    model.layout.push_back({RowRole::observation, t, -1, model.z[t], 0, active});
  }
  for (int t = 1; t < n; ++t) {
    model.z[n + t - 1] = 0.0;
    model.layout.push_back({RowRole::evolution, t, t - 1, 0.0, 0, true});
  }
  return model;
}

HyperValues to_hyper_values(const AugmentedModel& model, const HyperPoint& h) {
  if (model.student_t() != h.dof.has_value())
    throw std::invalid_argument("to_hyper_values: dof presence mismatch");
  HyperValues v;
  v.obs_precision = Eigen::VectorXd::Constant(model.precision_groups, h.obs_precision);
  v.sys_precision = h.sys_precision;
  if (h.dof) v.dof = *h.dof;
  return v;
}

HyperPoint to_hyper_point(const AugmentedModel& model, const HyperValues& h) {
  if (model.precision_groups != 1)
    throw std::invalid_argument("to_hyper_point: model has several precision groups");
  HyperPoint p;
  p.obs_precision = h.obs_precision[0];
  p.sys_precision = h.sys_precision;
  if (model.student_t()) p.dof = h.dof;
  return p;
}

Eigen::VectorXd hyper_to_internal(const AugmentedModel& model, const HyperValues& h) {
  const int g = model.precision_groups;
  if (h.obs_precision.size() != g)
    throw std::invalid_argument("hyper_to_internal: group count mismatch");
  Eigen::VectorXd z(model.hyper_dim());
  for (int i = 0; i < g; ++i) {
    if (!(h.obs_precision[i] > 0.0))
      throw std::domain_error("hyper_to_internal: precisions must be positive");
    z[i] = std::log(h.obs_precision[i]);
  }
  if (!(h.sys_precision > 0.0))
    throw std::domain_error("hyper_to_internal: precisions must be positive");
  z[g] = std::log(h.sys_precision);
  if (model.student_t()) {
    if (!(h.dof > 2.0))
      throw std::domain_error("hyper_to_internal: dof must exceed 2");
    z[g + 1] = std::log(h.dof - 2.0);
  }
  return z;
}

HyperValues hyper_from_internal(const AugmentedModel& model, const Eigen::VectorXd& z) {
  if (z.size() != model.hyper_dim())
    throw std::invalid_argument("hyper_from_internal: dimension mismatch");
  const int g = model.precision_groups;
  HyperValues h;
  h.obs_precision = z.head(g).array().exp();
  h.sys_precision = std::exp(z[g]);
  if (model.student_t()) h.dof = 2.0 + std::exp(z[g + 1]);
  return h;
}

double model_log_prior(const AugmentedModel& model, const HyperValues& h) {
  double lp = 0.0;
  for (int i = 0; i < model.precision_groups; ++i)
    lp += gamma_log_pdf(model.obs_precision_priors[static_cast<std::size_t>(i)],
                        h.obs_precision[i]) +
          std::log(h.obs_precision[i]);
  lp += gamma_log_pdf(model.sys_precision_prior, h.sys_precision) +
        std::log(h.sys_precision);
  if (model.student_t()) {
    const DofPrior dof_prior(model.dof_df);
    lp += dof_prior.log_pdf(h.dof);
    lp += (h.dof > 2.0) ? std::log(h.dof - 2.0)
                        : -std::numeric_limits<double>::infinity();
  }
  return lp;
}

Eigen::MatrixXd Rw1Precision::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dimension, dimension);
  for (int i = 0; i < dimension; ++i) m(i, i) = diag[i];
  for (int i = 0; i + 1 < dimension; ++i) {
    m(i, i + 1) = off[i];
    m(i + 1, i) = off[i];
  }
  return m;
}

Rw1Precision build_rw1_precision(int n) {
  if (n < 2) throw std::invalid_argument("build_rw1_precision: need n >= 2");
  Rw1Precision r;
  r.dimension = n;
  r.diag = Eigen::VectorXd::Constant(n, 2.0);
  r.diag[0] = r.diag[n - 1] = 1.0;
  r.off = Eigen::VectorXd::Constant(n - 1, -1.0);
  return r;
}

}  // namespace rdlm
