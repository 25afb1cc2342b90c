#include <doctest.h>

#include <cmath>
#include <random>

#include "rdlm/gaussian_approx.hpp"
#include "rdlm/oracle.hpp"
#include "test_support.hpp"

using namespace rdlm;

TEST_CASE("single observation is recovered under a diffuse prior") {
  Eigen::VectorXd y(1);
  y << 5.0;
  const SmootherResult r = kalman_smooth(TimeSeries(y), 1.0, 1.0, 1e10);
  CHECK(r.means[0] == doctest::Approx(5.0).epsilon(1e-8));
  CHECK(r.variances[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("rigid state limit smooths to the global mean") {
  std::mt19937_64 rng(83);
  const Eigen::VectorXd y = test_support::random_vector(rng, 30, 1.0);
  const SmootherResult r = kalman_smooth(TimeSeries(y), 2.0, 1e-12, 1e5);
  const double mean = y.mean();
  for (int t = 0; t < 30; ++t)
    CHECK(r.means[t] == doctest::Approx(mean).epsilon(1e-4));
}

TEST_CASE("kalman smoother matches dense linear algebra") {
  std::mt19937_64 rng(89);
  const double eps = 1e-5;
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd y = test_support::random_vector(rng, 20, 2.0);
    std::vector<bool> observed(20, true);
    if (trial >= 3) observed[7] = observed[8] = false;  // masked stretch
    const double theta1 = 0.5 + trial * 0.3, theta2 = 2.0;
    const SmootherResult r =
        kalman_smooth(TimeSeries(y, observed), theta1, theta2, 1.0 / eps);
    const auto dense =
        test_support::dense_gaussian_posterior(y, observed, theta1, theta2, eps);
    CHECK((r.means - dense.mean).lpNorm<Eigen::Infinity>() < 1e-10);
    for (int t = 0; t < 20; ++t)
      CHECK(r.variances[t] == doctest::Approx(dense.cov(t, t)).epsilon(1e-10));
    CHECK(r.log_marginal_likelihood ==
          doctest::Approx(dense.log_marginal).epsilon(1e-9));
  }
}

namespace {

DlmSpec gaussian_spec(Eigen::VectorXd y, double theta1 = 2.0, double theta2 = 2.0) {
  DlmSpec spec;
  spec.series = TimeSeries(std::move(y));
  spec.obs_variance = theta1;
  spec.sys_noise = GaussianNoise{theta2};
  return spec;
}

DenseGridSpec fixed_theta_grid(const AugmentedModel& model, const HyperValues& h,
                               double lo, double hi, int k) {
  DenseGridSpec grid;
  const Eigen::VectorXd z = hyper_to_internal(model, h);
  grid.theta_bounds.resize(model.hyper_dim(), 2);
  grid.theta_counts = Eigen::VectorXi::Ones(model.hyper_dim());
  for (int d = 0; d < model.hyper_dim(); ++d) {
    grid.theta_bounds(d, 0) = z[d];
    grid.theta_bounds(d, 1) = z[d];
  }
  grid.state_lo = lo;
  grid.state_hi = hi;
  grid.state_resolution = k;
  return grid;
}

}  // namespace

TEST_CASE("dense posterior agrees with the kalman smoother") {
  Eigen::VectorXd y(3);
  y << 0.4, -0.8, 0.9;
  const AugmentedModel model = build_augmented(gaussian_spec(y, 1.5, 0.8));
  HyperValues h;
  h.obs_precision = Eigen::VectorXd::Constant(1, 1.0 / 1.5);
  h.sys_precision = 1.0 / 0.8;
  const DensePosterior dense =
      dense_posterior(model, fixed_theta_grid(model, h, -8.0, 8.0, 41));
  const SmootherResult oracle =
      kalman_smooth(TimeSeries(y), 1.5, 0.8, 1.0 / model.prior_precision_epsilon);
  for (int t = 0; t < 3; ++t) {
    CHECK(dense.state_marginal_mean[t] ==
          doctest::Approx(oracle.means[t]).epsilon(2e-3));
    CHECK(dense.state_marginal_sd[t] ==
          doctest::Approx(std::sqrt(oracle.variances[t])).epsilon(2e-2));
  }
}

TEST_CASE("dense posterior masses are normalized") {
  Eigen::VectorXd y(4);
  y << 0.1, 0.3, -0.4, 0.2;
  DlmSpec spec = gaussian_spec(y);
  spec.sys_noise = StudentTNoise{0.5, 6.0};
  const AugmentedModel model = build_augmented(spec);
  DenseGridSpec grid;
  grid.theta_bounds.resize(3, 2);
  grid.theta_bounds << -1.0, 1.0, -1.0, 1.0, 0.5, 2.5;
  grid.theta_counts = Eigen::VectorXi::Constant(3, 3);
  grid.state_lo = -6.0;
  grid.state_hi = 6.0;
  grid.state_resolution = 21;
  const DensePosterior dense = dense_posterior(model, grid);
  CHECK(dense.theta_mass.sum() == doctest::Approx(1.0).epsilon(1e-12));
  for (int t = 0; t < 4; ++t)
    CHECK(dense.state_marginal.col(t).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dense posterior mirrors mirrored data") {
  Eigen::VectorXd y(3);
  y << 1.0, 0.2, -0.7;
  Eigen::VectorXd flipped = y.reverse();
  const AugmentedModel model = build_augmented(gaussian_spec(y, 1.0, 1.0));
  const AugmentedModel mirrored = build_augmented(gaussian_spec(flipped, 1.0, 1.0));
  HyperValues h;
  h.obs_precision = Eigen::VectorXd::Constant(1, 1.0);
  h.sys_precision = 1.0;
  const auto grid = fixed_theta_grid(model, h, -7.0, 7.0, 35);
  const DensePosterior a = dense_posterior(model, grid);
  const DensePosterior b = dense_posterior(mirrored, grid);
  for (int t = 0; t < 3; ++t)
    CHECK(a.state_marginal_mean[t] ==
          doctest::Approx(b.state_marginal_mean[2 - t]).epsilon(1e-10));
}

TEST_CASE("chain factorization equals naive tensor enumeration") {
  Eigen::VectorXd y(3);
  y << 0.5, -0.2, 0.8;
  DlmSpec spec = gaussian_spec(y, 1.2, 0.9);
  spec.sys_noise = StudentTNoise{1.0, 5.0};
  const AugmentedModel model = build_augmented(spec);
  HyperValues h;
  h.obs_precision = Eigen::VectorXd::Constant(1, 0.9);
  h.sys_precision = 1.1;
  h.dof = 5.5;
  const int k = 9;
  const auto grid = fixed_theta_grid(model, h, -3.0, 3.0, k);
  const DensePosterior dense = dense_posterior(model, grid);

  // naive enumeration over the same tensor grid via log_joint_at
  Eigen::VectorXd xs(k);
  for (int i = 0; i < k; ++i) xs[i] = -3.0 + 6.0 * i / (k - 1);
  Eigen::MatrixXd marginal = Eigen::MatrixXd::Zero(k, 3);
  double total = 0.0;
  Eigen::VectorXd x(3);
  for (int i0 = 0; i0 < k; ++i0)
    for (int i1 = 0; i1 < k; ++i1)
      for (int i2 = 0; i2 < k; ++i2) {
        x << xs[i0], xs[i1], xs[i2];
        const double w = std::exp(log_joint_at(model, h, x));
        total += w;
        marginal(i0, 0) += w;
        marginal(i1, 1) += w;
        marginal(i2, 2) += w;
      }
  marginal /= total;
  for (int t = 0; t < 3; ++t)
    for (int i = 0; i < k; ++i)
      CHECK(dense.state_marginal(i, t) ==
            doctest::Approx(marginal(i, t)).epsilon(1e-10));
}

TEST_CASE("dense posterior refuses oversized problems") {
  std::mt19937_64 rng(97);
  const AugmentedModel model =
      build_augmented(gaussian_spec(test_support::random_vector(rng, 9)));
  HyperValues h;
  h.obs_precision = Eigen::VectorXd::Constant(1, 1.0);
  h.sys_precision = 1.0;
  CHECK_THROWS_AS(dense_posterior(model, fixed_theta_grid(model, h, -2, 2, 11)),
                  std::invalid_argument);
  const AugmentedModel small =
      build_augmented(gaussian_spec(test_support::random_vector(rng, 4)));
  CHECK_THROWS_AS(dense_posterior(small, fixed_theta_grid(small, h, -2, 2, 60)),
                  std::invalid_argument);
}
