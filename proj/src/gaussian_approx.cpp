#include "rdlm/gaussian_approx.hpp"

#include <cmath>
#include <sstream>

#include "rdlm/terms.hpp"

namespace rdlm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

TermEval row_term(const AugmentedModel& model, const HyperValues& h,
                  const AugmentedRow& row, const Eigen::VectorXd& x) {
  if (row.role == RowRole::observation)
    return gaussian_obs_term(row.value, x[row.state_hi],
                             h.obs_precision[row.precision_group]);
  const double delta = x[row.state_hi] - x[row.state_lo];
  if (model.student_t())
    return student_t_correction_term(delta, h.sys_precision, h.dof);
  return gaussian_correction_term(delta, h.sys_precision);
}

struct FieldEval {
  double value = 0.0;
  Eigen::VectorXd grad;
  BandedSpd precision;  // epsilon*I minus clamped Hessian contributions
};

FieldEval evaluate_field(const AugmentedModel& model, const HyperValues& h,
                         const Eigen::VectorXd& x, double clamp) {
  const int n = model.state_dim;
  const double eps = model.prior_precision_epsilon;
  FieldEval out;
  out.value = -0.5 * eps * x.squaredNorm() + 0.5 * n * (std::log(eps) - kLog2Pi);
  out.grad = -eps * x;
  out.precision.diag = Eigen::VectorXd::Constant(n, eps);
  out.precision.off = Eigen::VectorXd::Zero(n > 0 ? n - 1 : 0);
  for (const auto& row : model.layout) {
    if (!row.active) continue;
    const TermEval te = row_term(model, h, row, x);
    out.value += te.value;
    const double c = -std::min(te.d2, clamp);
    if (row.role == RowRole::observation) {
      out.grad[row.state_hi] += te.d1;
      out.precision.diag[row.state_hi] += c;
    } else {
      if (row.state_hi != row.state_lo + 1)
        throw std::runtime_error(
            "evaluate_field: evolution rows must touch adjacent states");
      out.grad[row.state_hi] += te.d1;
      out.grad[row.state_lo] -= te.d1;
      out.precision.diag[row.state_hi] += c;
      out.precision.diag[row.state_lo] += c;
      out.precision.off[row.state_lo] -= c;
    }
  }
  return out;
}

}  // namespace

double log_field_at(const AugmentedModel& model, const HyperValues& h,
                    const Eigen::VectorXd& x) {
  if (x.size() != model.state_dim)
    throw std::invalid_argument("log_field_at: state dimension mismatch");
  const double eps = model.prior_precision_epsilon;
  double value = -0.5 * eps * x.squaredNorm() +
                 0.5 * model.state_dim * (std::log(eps) - kLog2Pi);
  for (const auto& row : model.layout) {
    if (!row.active) continue;
    value += row_term(model, h, row, x).value;
  }
  return value;
}

double log_joint_at(const AugmentedModel& model, const HyperValues& h,
                    const Eigen::VectorXd& x) {
  return model_log_prior(model, h) + log_field_at(model, h, x);
}

double log_joint_at(const AugmentedModel& model, const HyperPoint& h,
                    const Eigen::VectorXd& x) {
  return log_joint_at(model, to_hyper_values(model, h), x);
}

Eigen::VectorXd newton_cold_start(const AugmentedModel& model) {
  const int n = model.state_dim;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXi count = Eigen::VectorXi::Zero(n);
  for (const auto& row : model.layout) {
    if (!row.active || row.role != RowRole::observation) continue;
    sum[row.state_hi] += row.value;
    count[row.state_hi] += 1;
  }
  Eigen::VectorXd x(n);
  int prev = -1;  // last state with data
  for (int t = 0; t < n; ++t) {
    if (count[t] == 0) continue;
    const double mean = sum[t] / count[t];
    if (prev < 0) {
      for (int s = 0; s <= t; ++s) x[s] = mean;
    } else {
      const double lo = x[prev];
      for (int s = prev + 1; s <= t; ++s)
        x[s] = lo + (mean - lo) * double(s - prev) / double(t - prev);
    }
    prev = t;
  }
  if (prev < 0) return Eigen::VectorXd::Zero(n);
  for (int s = prev + 1; s < n; ++s) x[s] = x[prev];
  return x;
}

GaussianApprox find_mode(const AugmentedModel& model, const HyperValues& h,
                         const NewtonOptions& opts,
                         const Eigen::VectorXd* warm_start) {
  Eigen::VectorXd x =
      (warm_start && warm_start->size() == model.state_dim) ? *warm_start
                                                            : newton_cold_start(model);
  int iterations = 0;
  int forced_steps = 0;
  bool converged = false;
  FieldEval eval = evaluate_field(model, h, x, opts.hessian_clamp);
  for (; iterations < opts.max_iterations; ++iterations) {
    if (eval.grad.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
      converged = true;
      break;
    }
    const TridiagChol chol(eval.precision);
    Eigen::VectorXd step = chol.solve(eval.grad);
    const double step_norm = step.lpNorm<Eigen::Infinity>();
    if (step_norm < opts.step_tol) {
      converged = true;
      break;
    }
    if (step_norm > opts.step_cap) step *= opts.step_cap / step_norm;
    double scale = 1.0;
    bool improved = false;
    Eigen::VectorXd trial;
    for (int half = 0; half <= opts.max_halvings; ++half) {
      trial = x + scale * step;
      // Strict improvement only: accepting equal values can cycle forever at
      // the numerical floor. The forced-step branch below covers that floor.
      if (log_field_at(model, h, trial) > eval.value) {
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) {
      // The objective can no longer resolve the improvement. A tiny full
      // Newton step still tightens the gradient near-quadratically, so force
      // it a few times before giving up.
      if (step.lpNorm<Eigen::Infinity>() < 1e-6 && forced_steps < 3) {
        ++forced_steps;
        x += step;
        eval = evaluate_field(model, h, x, opts.hessian_clamp);
        continue;
      }
      if ((scale * step).lpNorm<Eigen::Infinity>() < opts.step_tol ||
          eval.grad.lpNorm<Eigen::Infinity>() < 1e3 * opts.grad_tol) {
        converged = true;
        break;
      }
      std::ostringstream msg;
      msg << "find_mode: line search stalled at iteration " << iterations
          << " with gradient norm " << eval.grad.lpNorm<Eigen::Infinity>();
      throw ConvergenceError(msg.str(), x, iterations);
    }
    x = trial;
    eval = evaluate_field(model, h, x, opts.hessian_clamp);
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "find_mode: no convergence after " << opts.max_iterations
        << " iterations; gradient norm " << eval.grad.lpNorm<Eigen::Infinity>();
    throw ConvergenceError(msg.str(), x, iterations);
  }

  GaussianApprox approx;
  approx.mode = std::move(x);
  approx.precision = eval.precision;
  approx.newton_iterations = iterations;
  try {
    const TridiagChol chol(approx.precision);
    approx.log_det_precision = chol.log_det();
    approx.marginal_variances = chol.marginal_variances();
  } catch (const std::runtime_error&) {
    throw std::logic_error("find_mode: clamped Hessian not positive definite");
  }
  return approx;
}

GaussianApprox find_mode(const AugmentedModel& model, const HyperPoint& h,
                         const NewtonOptions& opts) {
  return find_mode(model, to_hyper_values(model, h), opts, nullptr);
}

}  // namespace rdlm
