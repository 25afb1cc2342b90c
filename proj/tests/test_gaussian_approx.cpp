#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "rdlm/gaussian_approx.hpp"
#include "rdlm/oracle.hpp"
#include "rdlm/terms.hpp"
#include "test_support.hpp"

using namespace rdlm;

namespace {

DlmSpec gaussian_spec(Eigen::VectorXd y, double theta1 = 2.0, double theta2 = 2.0) {
  DlmSpec spec;
  spec.series = TimeSeries(std::move(y));
  spec.obs_variance = theta1;
  spec.sys_noise = GaussianNoise{theta2};
  return spec;
}

DlmSpec student_spec(Eigen::VectorXd y) {
  DlmSpec spec;
  spec.series = TimeSeries(std::move(y));
  spec.sys_noise = StudentTNoise{0.5, 6.0};
  return spec;
}

HyperValues hyper(const AugmentedModel& model, double obs_prec, double sys_prec,
                  double dof = 0.0) {
  HyperValues h;
  h.obs_precision = Eigen::VectorXd::Constant(model.precision_groups, obs_prec);
  h.sys_precision = sys_prec;
  if (model.student_t()) h.dof = dof;
  return h;
}

// Coordinate-refined dense search for the field maximum, independent of the
// Newton path.
Eigen::VectorXd coordinate_refine(const AugmentedModel& model, const HyperValues& h,
                                  Eigen::VectorXd x, double half_width) {
  double width = half_width;
  for (int sweep = 0; sweep < 60; ++sweep) {
    for (int t = 0; t < model.state_dim; ++t) {
      double best = x[t];
      double best_value = log_field_at(model, h, x);
      for (int k = -10; k <= 10; ++k) {
        Eigen::VectorXd trial = x;
        trial[t] = x[t] + width * k / 10.0;
        const double value = log_field_at(model, h, trial);
        if (value > best_value) {
          best_value = value;
          best = trial[t];
        }
      }
      x[t] = best;
    }
    width *= 0.6;
  }
  return x;
}

}  // namespace

TEST_CASE("gaussian objective converges in one newton step") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 5; ++trial) {
    const AugmentedModel model =
        build_augmented(gaussian_spec(test_support::random_vector(rng, 30, 2.0)));
    const GaussianApprox approx = find_mode(model, hyper(model, 0.5, 0.5));
    CHECK(approx.newton_iterations == 1);
  }
}

TEST_CASE("mode equals the kalman smoother mean") {
  Eigen::VectorXd y(2);
  y << 5.0, 3.0;
  const AugmentedModel model = build_augmented(gaussian_spec(y, 2.0, 2.0));
  const GaussianApprox approx = find_mode(model, hyper(model, 0.5, 0.5));
  const SmootherResult oracle = kalman_smooth(TimeSeries(y), 2.0, 2.0,
                                              1.0 / model.prior_precision_epsilon);
  CHECK((approx.mode - oracle.means).lpNorm<Eigen::Infinity>() < 1e-6);
  for (int t = 0; t < 2; ++t)
    CHECK(approx.marginal_variances[t] ==
          doctest::Approx(oracle.variances[t]).epsilon(1e-9));
}

TEST_CASE("student t mode matches a dense coordinate search") {
  std::mt19937_64 rng(59);
  Eigen::VectorXd y = test_support::random_vector(rng, 10, 1.5);
  y[4] += 6.0;  // a jump the heavy tail should absorb
  const AugmentedModel model = build_augmented(student_spec(y));
  const HyperValues h = hyper(model, 1.0, 0.7, 5.0);
  const GaussianApprox approx = find_mode(model, h);
  const Eigen::VectorXd refined = coordinate_refine(model, h, y, 2.0);
  CHECK((approx.mode - refined).lpNorm<Eigen::Infinity>() < 1e-4);
  CHECK(log_field_at(model, h, approx.mode) >=
        log_field_at(model, h, refined) - 1e-9);
}

TEST_CASE("gradient vanishes at the returned mode") {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd y = test_support::random_vector(rng, 25, 2.0);
    const bool student = trial % 2 == 0;
    const AugmentedModel model =
        build_augmented(student ? student_spec(y) : gaussian_spec(y));
    const HyperValues h = hyper(model, 0.8, 1.2, 4.0);
    const GaussianApprox approx = find_mode(model, h);
    // analytic gradient of the field at the mode
    Eigen::VectorXd grad = -model.prior_precision_epsilon * approx.mode;
    for (const auto& row : model.layout) {
      if (!row.active) continue;
      if (row.role == RowRole::observation) {
        grad[row.state_hi] +=
            gaussian_obs_term(row.value, approx.mode[row.state_hi],
                              h.obs_precision[row.precision_group])
                .d1;
      } else {
        const double delta = approx.mode[row.state_hi] - approx.mode[row.state_lo];
        const double d1 =
            model.student_t()
                ? student_t_correction_term(delta, h.sys_precision, h.dof).d1
                : gaussian_correction_term(delta, h.sys_precision).d1;
        grad[row.state_hi] += d1;
        grad[row.state_lo] -= d1;
      }
    }
    CHECK(grad.lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("banded factorization matches dense linear algebra on the model") {
  std::mt19937_64 rng(67);
  const AugmentedModel model =
      build_augmented(gaussian_spec(test_support::random_vector(rng, 50, 2.0)));
  const GaussianApprox approx = find_mode(model, hyper(model, 0.5, 0.5));
  const Eigen::MatrixXd dense = approx.precision.dense();
  const Eigen::LLT<Eigen::MatrixXd> llt(dense);
  double logdet = 0.0;
  for (int i = 0; i < 50; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  CHECK(approx.log_det_precision == doctest::Approx(logdet).epsilon(1e-9));
  const Eigen::MatrixXd inv = dense.inverse();
  for (int i = 0; i < 50; ++i)
    CHECK(approx.marginal_variances[i] == doctest::Approx(inv(i, i)).epsilon(1e-9));
}

TEST_CASE("log joint decomposes into prior and terms") {
  std::mt19937_64 rng(71);
  Eigen::VectorXd y = test_support::random_vector(rng, 6);
  DlmSpec spec = student_spec(y);
  const AugmentedModel model = build_augmented(spec);
  const HyperValues h = hyper(model, 1.1, 0.9, 7.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd x = test_support::random_vector(rng, 6, 2.0);
    double expected = model_log_prior(model, h);
    expected += -0.5 * model.prior_precision_epsilon * x.squaredNorm() +
                0.5 * 6 *
                    (std::log(model.prior_precision_epsilon) -
                     std::log(2.0 * std::numbers::pi));
    for (const auto& row : model.layout) {
      if (!row.active) continue;
      if (row.role == RowRole::observation)
        expected += gaussian_obs_term(row.value, x[row.state_hi],
                                      h.obs_precision[row.precision_group])
                        .value;
      else
        expected += student_t_correction_term(x[row.state_hi] - x[row.state_lo],
                                              h.sys_precision, h.dof)
                        .value;
    }
    CHECK(log_joint_at(model, h, x) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("log joint is invariant under a consistent state relabeling") {
  std::mt19937_64 rng(73);
  const Eigen::VectorXd y = test_support::random_vector(rng, 5);
  const AugmentedModel model = build_augmented(gaussian_spec(y));
  const HyperValues h = hyper(model, 0.6, 1.4);

  // reverse the state indices in the layout and permute x accordingly
  AugmentedModel permuted = model;
  auto relabel = [](int s) { return 4 - s; };
  for (auto& row : permuted.layout) {
    row.state_hi = relabel(row.state_hi);
    if (row.role == RowRole::evolution) row.state_lo = relabel(row.state_lo);
  }
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd x = test_support::random_vector(rng, 5, 2.0);
    Eigen::VectorXd xp(5);
    for (int s = 0; s < 5; ++s) xp[relabel(s)] = x[s];
    CHECK(log_joint_at(model, h, x) ==
          doctest::Approx(log_joint_at(permuted, h, xp)).epsilon(1e-13));
  }
}

TEST_CASE("degenerate single-state joint reduces to the flat prior") {
  AugmentedModel model;
  model.state_dim = 1;
  model.prior_precision_epsilon = 1e-5;
  model.z = Eigen::VectorXd::Zero(1);
  model.layout = {{RowRole::observation, 0, -1, 0.0, 0, false}};  // masked
  HyperValues h;
  h.obs_precision = Eigen::VectorXd::Constant(1, 1.0);
  h.sys_precision = 1.0;
  Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 2.0);
  const double expected =
      model_log_prior(model, h) - 0.5 * 1e-5 * 4.0 +
      0.5 * (std::log(1e-5) - std::log(2.0 * std::numbers::pi));
  CHECK(log_joint_at(model, h, x) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("dimension mismatch raises a size error") {
  Eigen::VectorXd y(3);
  y << 1.0, 2.0, 3.0;
  const AugmentedModel model = build_augmented(gaussian_spec(y));
  CHECK_THROWS_AS(
      log_joint_at(model, hyper(model, 1.0, 1.0), Eigen::VectorXd::Zero(4)),
      std::invalid_argument);
}

TEST_CASE("newton failure carries the last iterate") {
  std::mt19937_64 rng(79);
  const AugmentedModel model =
      build_augmented(student_spec(test_support::random_vector(rng, 8, 3.0)));
  NewtonOptions opts;
  opts.max_iterations = 0;
  try {
    find_mode(model, hyper(model, 1.0, 1.0, 4.0), opts);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& err) {
    CHECK(err.last_iterate.size() == 8);
    CHECK(err.iterations == 0);
  }
}

TEST_CASE("cold start interpolates masked stretches") {
  Eigen::VectorXd y(5);
  y << 1.0, 0.0, 0.0, 4.0, 5.0;
  DlmSpec spec;
  spec.series = TimeSeries(y, {true, false, false, true, true});
  const AugmentedModel model = build_augmented(spec);
  const Eigen::VectorXd x0 = newton_cold_start(model);
  CHECK(x0[0] == doctest::Approx(1.0));
  CHECK(x0[1] == doctest::Approx(2.0));
  CHECK(x0[2] == doctest::Approx(3.0));
  CHECK(x0[3] == doctest::Approx(4.0));
  CHECK(x0[4] == doctest::Approx(5.0));
}
