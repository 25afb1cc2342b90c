#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rdlm/engine.hpp"
#include "rdlm/scores.hpp"

namespace rdlm {

// Deterministic substream RNG: a splitmix-mixed key seeds the generator, so a
// (seed, index) pair fixes the stream regardless of scheduling. Normals come
// from a cache-free Box-Muller, two uniforms each.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  double uniform();  // (0, 1]
  double normal();

 private:
  std::uint64_t state_;
};

// One Monte Carlo contamination scenario: series length, expected fraction p
// of innovative outliers, magnitude f of the contaminated component, and the
// true noise variances.
struct ScenarioConfig {
  int n_d = 100;
  double p = 0.0;
  double f = 2.0;
  int replicates = 100;
  std::uint64_t seed = 0;
  double theta1 = 2.0;  // observation variance
  double theta2 = 2.0;  // system variance
};

void validate(const ScenarioConfig& cfg);

struct SimulatedSeries {
  Eigen::VectorXd y;
  Eigen::VectorXd a;
};

// Random walk with scale-contaminated Gaussian innovations:
// w_t = f * N(0, theta2) with probability p, else N(0, theta2).
// Deterministic given (cfg.seed, replicate_index).
SimulatedSeries simulate_series(const ScenarioConfig& cfg, int replicate_index);

// Centered MSE ratio of the Gaussian fit over the Student-t fit; NaN when the
// denominator vanishes.
double efficiency(const Eigen::VectorXd& truth, const Eigen::VectorXd& mean_gaussian,
                  const Eigen::VectorXd& mean_student_t);

struct ReplicateRecord {
  int replicate = 0;
  bool ok = false;
  std::string error;
  double efficiency_j = 0.0;
  double rdic = 0.0;
  double lpsbf = 0.0;
  double rpsbf = 0.0;
  double dic_gaussian = 0.0;
  double dic_student_t = 0.0;
  double neg_lpml_gaussian = 0.0;
  double neg_lpml_student_t = 0.0;
  Eigen::VectorXd truth;
  Eigen::VectorXd mean_gaussian;
  Eigen::VectorXd mean_student_t;
};

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

Quartiles quartiles(std::vector<double> values);  // NaNs are dropped

struct ScenarioSummary {
  ScenarioConfig config;
  int completed = 0;
  int excluded = 0;
  Quartiles efficiency_q;
  Quartiles rdic_q;
  Quartiles lpsbf_q;
  Quartiles rpsbf_q;
};

struct ComparisonReport {
  std::vector<ScenarioSummary> summaries;
  std::vector<std::vector<ReplicateRecord>> records;  // per scenario
};

struct StudyOptions {
  StudyOptions() {
    // contaminated replicates routinely need more than the default Newton
    // budget at heavy-tail grid points
    fit.newton.max_iterations = 300;
  }

  FitOptions fit;
  PriorSpec priors;        // shared by both competing models
  int threads = 1;
  bool keep_paths = false;  // retain truth/mean vectors in the records
  std::function<void(const std::string&)> progress;
};

// Fits the Gaussian and the Student-t model to every replicate of every
// scenario and aggregates the comparison statistics. Replicates run in
// parallel; failures are recorded and excluded from the medians.
ComparisonReport run_study(const std::vector<ScenarioConfig>& scenarios,
                           const StudyOptions& options = {});

}  // namespace rdlm
