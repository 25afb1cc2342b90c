#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "rdlm/terms.hpp"
#include "test_support.hpp"

using namespace rdlm;

TEST_CASE("gaussian observation term at the standard normal mode") {
  const TermEval te = gaussian_obs_term(0.0, 0.0, 1.0);
  CHECK(te.value == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi))
                        .epsilon(1e-14));
  CHECK(te.value == doctest::Approx(-0.918939).epsilon(1e-6));
  CHECK(te.d1 == 0.0);
  CHECK(te.d2 == -1.0);
}

TEST_CASE("gaussian observation derivative is linear in the residual") {
  const TermEval te = gaussian_obs_term(1.0, 0.0, 2.0);
  CHECK(te.d1 == doctest::Approx(2.0));
  CHECK(te.d2 == doctest::Approx(-2.0));
}

TEST_CASE("analytic derivatives match finite differences") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  std::uniform_real_distribution<double> pos(0.2, 4.0);
  std::uniform_real_distribution<double> dof(2.5, 40.0);
  for (int i = 0; i < 300; ++i) {
    const double y = unif(rng), prec = pos(rng), tau = pos(rng), nu = dof(rng);
    {
      const double m = unif(rng);
      const TermEval te = gaussian_obs_term(y, m, prec);
      auto f = [&](double x) { return gaussian_obs_term(y, x, prec).value; };
      CHECK(te.d1 == doctest::Approx(test_support::fd_d1(f, m)).epsilon(1e-6));
      CHECK(te.d2 == doctest::Approx(test_support::fd_d2(f, m)).epsilon(1e-6));
    }
    {
      const double d = unif(rng);
      const TermEval te = gaussian_correction_term(d, prec);
      auto f = [&](double x) { return gaussian_correction_term(x, prec).value; };
      CHECK(te.d1 == doctest::Approx(test_support::fd_d1(f, d)).epsilon(1e-6));
      CHECK(te.d2 == doctest::Approx(test_support::fd_d2(f, d)).epsilon(1e-6));
    }
    {
      const double d = unif(rng);
      const TermEval te = student_t_correction_term(d, tau, nu);
      auto f = [&](double x) { return student_t_correction_term(x, tau, nu).value; };
      CHECK(te.d1 ==
            doctest::Approx(test_support::fd_d1(f, d)).epsilon(1e-6).scale(1.0));
      CHECK(te.d2 ==
            doctest::Approx(test_support::fd_d2(f, d)).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("student t value matches the closed form") {
  // tau=1, nu=4: sigma^2 = 0.5, density at 0 is Gamma(2.5)/(Gamma(2) sqrt(4 pi) sigma)
  const TermEval te = student_t_correction_term(0.0, 1.0, 4.0);
  const double sigma = std::sqrt(0.5);
  const double expected = std::lgamma(2.5) - std::lgamma(2.0) -
                          0.5 * std::log(4.0 * std::numbers::pi) - std::log(sigma);
  CHECK(te.value == doctest::Approx(expected).epsilon(1e-14));
  CHECK(te.value == doctest::Approx(-0.63426).epsilon(1e-4));
  CHECK(std::exp(te.value) == doctest::Approx(0.53033).epsilon(1e-4));
}

TEST_CASE("student t degenerates to the gaussian in the dof limit") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-4.0, 4.0);
  std::uniform_real_distribution<double> pos(0.2, 4.0);
  for (int i = 0; i < 50; ++i) {
    const double d = unif(rng), tau = pos(rng);
    const TermEval t = student_t_correction_term(d, tau, 1e6);
    const TermEval g = gaussian_correction_term(d, tau);
    CHECK(t.value == doctest::Approx(g.value).epsilon(1e-4));
    CHECK(t.d1 == doctest::Approx(g.d1).epsilon(1e-3).scale(1.0));
    CHECK(t.d2 == doctest::Approx(g.d2).epsilon(1e-3).scale(1.0));
  }
}

TEST_CASE("student t variance equals the inverse marginal precision") {
  const double tau = 2.5, nu = 4.5;
  const double sigma = std::sqrt((nu - 2.0) / (nu * tau));
  std::mt19937_64 rng(17);
  std::student_t_distribution<double> dist(nu);
  double sq = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double w = sigma * dist(rng);
    sq += w * w;
  }
  CHECK(sq / n == doctest::Approx(1.0 / tau).epsilon(0.01));
}

TEST_CASE("student t term is symmetric with stationary center") {
  const TermEval center = student_t_correction_term(0.0, 1.3, 5.0);
  CHECK(center.d1 == 0.0);
  for (const double d : {0.3, 1.0, 2.7, 11.0}) {
    const TermEval plus = student_t_correction_term(d, 1.3, 5.0);
    const TermEval minus = student_t_correction_term(-d, 1.3, 5.0);
    CHECK(plus.value == minus.value);
    CHECK(plus.d1 == -minus.d1);
    CHECK(plus.d2 == minus.d2);
  }
}

TEST_CASE("student t second derivative flips sign in the tails") {
  const double tau = 1.0, nu = 4.0;
  const double sigma2nu = (nu - 2.0) / tau;
  CHECK(student_t_correction_term(0.5 * std::sqrt(sigma2nu), tau, nu).d2 < 0.0);
  CHECK(student_t_correction_term(2.0 * std::sqrt(sigma2nu), tau, nu).d2 > 0.0);
}

TEST_CASE("gaussian correction is exactly quadratic") {
  const TermEval center = gaussian_correction_term(0.0, 0.5);
  CHECK(center.d1 == 0.0);
  // constant second differences
  const double h = 0.37;
  double prev_diff2 = 0.0;
  for (int k = -3; k <= 3; ++k) {
    const double f0 = gaussian_correction_term(k * h, 0.5).value;
    const double fp = gaussian_correction_term((k + 1) * h, 0.5).value;
    const double fm = gaussian_correction_term((k - 1) * h, 0.5).value;
    const double diff2 = fp - 2.0 * f0 + fm;
    if (k > -3) CHECK(diff2 == doctest::Approx(prev_diff2).epsilon(1e-10));
    prev_diff2 = diff2;
  }
  CHECK(gaussian_correction_term(1.1, 0.5).d2 ==
        gaussian_correction_term(7.9, 0.5).d2);
}

TEST_CASE("terms reject invalid hyperparameters") {
  CHECK_THROWS_AS(gaussian_obs_term(0.0, 0.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(gaussian_obs_term(0.0, 0.0, -1.0), std::domain_error);
  CHECK_THROWS_AS(gaussian_correction_term(0.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(student_t_correction_term(0.0, 0.0, 5.0), std::domain_error);
  CHECK_THROWS_AS(student_t_correction_term(0.0, 1.0, 2.0), std::domain_error);
  CHECK_THROWS_AS(student_t_correction_term(0.0, 1.0, 1.5), std::domain_error);
}
