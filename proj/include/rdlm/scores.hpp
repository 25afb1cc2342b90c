#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rdlm/engine.hpp"

namespace rdlm {

// Fit-quality scores of one model on one dataset. cpo holds the leave-one-out
// predictive density of every active observation row, in layout order;
// neg_lpml is the negated sum of their logs, skipping flagged rows.
struct FitScores {
  double dic = 0.0;
  double p_d = 0.0;
  double neg_lpml = 0.0;
  Eigen::VectorXd cpo;
  std::vector<int> flagged_cpo;  // rows whose cpo underflowed to zero
};

struct PairComparison {
  double rdic = 0.0;
  double lpsbf = 0.0;
  double rpsbf = 0.0;
  std::string evidence_label;
};

// Deviance information criterion with the posterior-mean plug-in:
// D = -2 sum_t log N(y_t; x_t, 1/obs_precision) over active observation
// rows, E[D] by grid-weighted closed-form expectation, plug-in at the
// mixture state means and grid-weighted precision means.
std::pair<double, double> compute_dic(const FitResult& fit, const AugmentedModel& model);

// CPO through the inverse-expectation identity: 1/pi(y_i|y_-i) is the
// posterior expectation of 1/pi(y_i|x_i, theta), integrated per grid point
// with 21-node Gauss-Hermite quadrature against the conditional Gaussian and
// then grid-averaged. Also fills dic/p_d via compute_dic.
FitScores compute_cpo(const FitResult& fit, const AugmentedModel& model);

// Evidence label from 2*lPsBF: (-inf,1] worth mention, (1,5] positive,
// (5,9] strong, (9,inf) very strong.
std::string evidence_label(double two_lpsbf);

PairComparison compare(const FitScores& gaussian, const FitScores& student_t);
PairComparison compare_raw(double dic_gaussian, double dic_student_t,
                           double neg_lpml_gaussian, double neg_lpml_student_t);

}  // namespace rdlm
