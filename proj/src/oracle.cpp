#include "rdlm/oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rdlm/terms.hpp"

namespace rdlm {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}
}  // namespace

SmootherResult kalman_smooth(const TimeSeries& y, double obs_variance,
                             double sys_variance, double diffuse_prior_variance) {
  if (!(obs_variance > 0.0) || !(sys_variance > 0.0) ||
      !(diffuse_prior_variance > 0.0))
    throw std::invalid_argument("kalman_smooth: variances must be positive");
  const Eigen::Index n = y.size();
  if (n < 1) throw std::invalid_argument("kalman_smooth: empty series");

  Eigen::VectorXd pred_mean(n), pred_var(n), filt_mean(n), filt_var(n);
  double loglik = 0.0;
  double m = 0.0, p = diffuse_prior_variance;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (t > 0) {
      p += sys_variance;
    }
    pred_mean[t] = m;
    pred_var[t] = p;
    // Pseudo-observation encoding the flat epsilon prior on states t >= 2.
    if (t > 0) {
      const double s = p + diffuse_prior_variance;
      loglik += -0.5 * (kLog2Pi + std::log(s)) - 0.5 * m * m / s;
      const double gain = p / s;
      m -= gain * m;
      p *= 1.0 - gain;
    }
    if (y.is_observed(t)) {
      const double s = p + obs_variance;
      const double resid = y.values[t] - m;
      loglik += -0.5 * (kLog2Pi + std::log(s)) - 0.5 * resid * resid / s;
      const double gain = p / s;
      m += gain * resid;
      p *= 1.0 - gain;
    }
    filt_mean[t] = m;
    filt_var[t] = p;
  }

  SmootherResult out;
  out.means.resize(n);
  out.variances.resize(n);
  out.log_marginal_likelihood = loglik;
  out.means[n - 1] = filt_mean[n - 1];
  out.variances[n - 1] = filt_var[n - 1];
  for (Eigen::Index t = n - 2; t >= 0; --t) {
    const double gain = filt_var[t] / pred_var[t + 1];
    out.means[t] = filt_mean[t] + gain * (out.means[t + 1] - pred_mean[t + 1]);
    out.variances[t] =
        filt_var[t] + gain * gain * (out.variances[t + 1] - pred_var[t + 1]);
  }
  return out;
}

DensePosterior dense_posterior(const AugmentedModel& model, const DenseGridSpec& grid) {
  const int n = model.state_dim;
  const int k = grid.state_resolution;
  if (n > 8)
    throw std::invalid_argument("dense_posterior: refuses state_dim > 8");
  if (k < 2 || k > 41)
    throw std::invalid_argument("dense_posterior: state resolution must be in [2, 41]");
  const int hdim = model.hyper_dim();
  if (grid.theta_bounds.rows() != hdim || grid.theta_counts.size() != hdim)
    throw std::invalid_argument("dense_posterior: hyperparameter grid shape mismatch");
  for (int d = 0; d < hdim; ++d)
    if (grid.theta_counts[d] < 1 || grid.theta_counts[d] > 41)
      throw std::invalid_argument("dense_posterior: theta counts must be in [1, 41]");

  const double dx = (grid.state_hi - grid.state_lo) / (k - 1);
  Eigen::VectorXd xs(k);
  for (int i = 0; i < k; ++i) xs[i] = grid.state_lo + i * dx;

  // Active observation rows grouped by state.
  std::vector<std::vector<const AugmentedRow*>> obs_by_state(n);
  for (const auto& row : model.layout)
    if (row.active && row.role == RowRole::observation)
      obs_by_state[static_cast<std::size_t>(row.state_hi)].push_back(&row);

  int total_theta = 1;
  for (int d = 0; d < hdim; ++d) total_theta *= grid.theta_counts[d];

  DensePosterior out;
  out.theta_points.resize(total_theta, hdim);
  out.theta_mass.resize(total_theta);
  out.state_grid = xs;
  out.state_marginal = Eigen::MatrixXd::Zero(k, n);
  Eigen::VectorXd log_mass(total_theta);
  std::vector<Eigen::MatrixXd> per_theta_marginal(
      static_cast<std::size_t>(total_theta));

  const double eps = model.prior_precision_epsilon;
  Eigen::VectorXi idx = Eigen::VectorXi::Zero(hdim);
  for (int u = 0; u < total_theta; ++u) {
    Eigen::VectorXd z(hdim);
    for (int d = 0; d < hdim; ++d) {
      const double lo = grid.theta_bounds(d, 0), hi = grid.theta_bounds(d, 1);
      z[d] = grid.theta_counts[d] == 1
                 ? lo
                 : lo + idx[d] * (hi - lo) / (grid.theta_counts[d] - 1);
    }
    out.theta_points.row(u) = z.transpose();
    const HyperValues h = hyper_from_internal(model, z);

    // Per-state log factors and the shared transition kernel on differences.
    Eigen::MatrixXd lphi(k, n);
    for (int t = 0; t < n; ++t)
      for (int i = 0; i < k; ++i) {
        double v = -0.5 * eps * xs[i] * xs[i] + 0.5 * (std::log(eps) - kLog2Pi);
        for (const auto* row : obs_by_state[static_cast<std::size_t>(t)])
          v += gaussian_obs_term(row->value, xs[i],
                                 h.obs_precision[row->precision_group])
                   .value;
        lphi(i, t) = v;
      }
    Eigen::VectorXd ltr(2 * k - 1);  // index j - i + (k-1)
    for (int d = -(k - 1); d <= k - 1; ++d) {
      const double delta = d * dx;
      ltr[d + k - 1] = model.student_t()
                           ? student_t_correction_term(delta, h.sys_precision, h.dof).value
                           : gaussian_correction_term(delta, h.sys_precision).value;
    }

    Eigen::MatrixXd lfwd(k, n), lbwd(k, n);
    lfwd.col(0) = lphi.col(0);
    Eigen::VectorXd scratch(k);
    for (int t = 1; t < n; ++t)
      for (int j = 0; j < k; ++j) {
        for (int i = 0; i < k; ++i)
          scratch[i] = lfwd(i, t - 1) + ltr[j - i + k - 1];
        lfwd(j, t) = log_sum_exp(scratch) + lphi(j, t);
      }
    lbwd.col(n - 1).setZero();
    for (int t = n - 2; t >= 0; --t)
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j)
          scratch[j] = ltr[j - i + k - 1] + lphi(j, t + 1) + lbwd(j, t + 1);
        lbwd(i, t) = log_sum_exp(scratch);
      }

    log_mass[u] = log_sum_exp(lfwd.col(n - 1)) + n * std::log(dx) +
                  model_log_prior(model, h);

    Eigen::MatrixXd marg(k, n);
    for (int t = 0; t < n; ++t) {
      Eigen::VectorXd lm = lfwd.col(t) + lbwd.col(t);
      const double norm = log_sum_exp(lm);
      marg.col(t) = (lm.array() - norm).exp();
    }
    per_theta_marginal[static_cast<std::size_t>(u)] = std::move(marg);

    for (int d = hdim - 1; d >= 0; --d) {
      if (++idx[d] < grid.theta_counts[d]) break;
      idx[d] = 0;
    }
  }

  const double lz = log_sum_exp(log_mass);
  out.theta_mass = (log_mass.array() - lz).exp();
  for (int u = 0; u < total_theta; ++u)
    out.state_marginal +=
        out.theta_mass[u] * per_theta_marginal[static_cast<std::size_t>(u)];

  out.state_marginal_mean.resize(n);
  out.state_marginal_sd.resize(n);
  for (int t = 0; t < n; ++t) {
    const double mean = out.state_marginal.col(t).dot(xs);
    const double second = out.state_marginal.col(t).dot(xs.cwiseProduct(xs));
    out.state_marginal_mean[t] = mean;
    out.state_marginal_sd[t] = std::sqrt(std::max(0.0, second - mean * mean));
  }
  return out;
}

}  // namespace rdlm
