#include "rdlm/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rdlm/parallel.hpp"

namespace rdlm {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t key = seed;
  (void)splitmix64(key);
  key ^= 0x9E3779B97F4A7C15ULL * (stream + 1);
  (void)splitmix64(key);
  state_ = key;
}

double RngStream::uniform() {
  const std::uint64_t bits = splitmix64(state_) >> 11;  // 53 bits
  return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

double RngStream::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void validate(const ScenarioConfig& cfg) {
  if (cfg.n_d < 2) throw std::invalid_argument("ScenarioConfig: n_d must be >= 2");
  if (!(cfg.p >= 0.0 && cfg.p <= 1.0))
    throw std::invalid_argument("ScenarioConfig: p must lie in [0, 1]");
  if (!(cfg.f >= 1.0)) throw std::invalid_argument("ScenarioConfig: f must be >= 1");
  if (cfg.replicates < 1)
    throw std::invalid_argument("ScenarioConfig: replicates must be >= 1");
  if (!(cfg.theta1 > 0.0) || !(cfg.theta2 > 0.0))
    throw std::invalid_argument("ScenarioConfig: variances must be positive");
}

SimulatedSeries simulate_series(const ScenarioConfig& cfg, int replicate_index) {
  validate(cfg);
  RngStream rng(cfg.seed, static_cast<std::uint64_t>(replicate_index));
  const double sd_sys = std::sqrt(cfg.theta2);
  const double sd_obs = std::sqrt(cfg.theta1);
  SimulatedSeries out;
  out.a.resize(cfg.n_d);
  out.y.resize(cfg.n_d);
  out.a[0] = sd_sys * rng.normal();
  for (int t = 1; t < cfg.n_d; ++t) {
    const bool contaminated = rng.uniform() < cfg.p;
    double w = sd_sys * rng.normal();
    if (contaminated) w *= cfg.f;
    out.a[t] = out.a[t - 1] + w;
  }
  for (int t = 0; t < cfg.n_d; ++t) out.y[t] = out.a[t] + sd_obs * rng.normal();
  return out;
}

double efficiency(const Eigen::VectorXd& truth, const Eigen::VectorXd& mean_gaussian,
                  const Eigen::VectorXd& mean_student_t) {
  if (truth.size() != mean_gaussian.size() || truth.size() != mean_student_t.size())
    throw std::invalid_argument("efficiency: length mismatch");
  const double num = (mean_gaussian - truth).squaredNorm();
  const double den = (mean_student_t - truth).squaredNorm();
  if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return num / den - 1.0;
}

Quartiles quartiles(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(),
                              [](double v) { return std::isnan(v); }),
               values.end());
  Quartiles q;
  if (values.empty()) {
    q.q1 = q.median = q.q3 = std::numeric_limits<double>::quiet_NaN();
    return q;
  }
  std::sort(values.begin(), values.end());
  auto at = [&](double prob) {  // type-7 interpolation
    const double pos = prob * (static_cast<double>(values.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
  };
  q.q1 = at(0.25);
  q.median = at(0.5);
  q.q3 = at(0.75);
  return q;
}

namespace {

ReplicateRecord run_replicate(const ScenarioConfig& cfg, int replicate,
                              const StudyOptions& options) {
  ReplicateRecord rec;
  rec.replicate = replicate;
  const SimulatedSeries sim = simulate_series(cfg, replicate);
  rec.truth = sim.a;
  try {
    DlmSpec gaussian_spec;
    gaussian_spec.series = TimeSeries(sim.y);
    gaussian_spec.obs_variance = cfg.theta1;
    gaussian_spec.sys_noise = GaussianNoise{cfg.theta2};
    gaussian_spec.priors = options.priors;

    DlmSpec student_spec = gaussian_spec;
    student_spec.sys_noise = StudentTNoise{1.0 / cfg.theta2, 10.0};

    const FitResult fit_gaussian = fit(gaussian_spec, options.fit);
    const FitResult fit_student = fit(student_spec, options.fit);

    const AugmentedModel model_gaussian =
        build_augmented(gaussian_spec, options.fit.epsilon);
    const AugmentedModel model_student =
        build_augmented(student_spec, options.fit.epsilon);
    const FitScores scores_gaussian = compute_cpo(fit_gaussian, model_gaussian);
    const FitScores scores_student = compute_cpo(fit_student, model_student);

    rec.mean_gaussian.resize(cfg.n_d);
    rec.mean_student_t.resize(cfg.n_d);
    for (int t = 0; t < cfg.n_d; ++t) {
      rec.mean_gaussian[t] = fit_gaussian.state_marginals[t].mean;
      rec.mean_student_t[t] = fit_student.state_marginals[t].mean;
    }
    rec.efficiency_j = efficiency(rec.truth, rec.mean_gaussian, rec.mean_student_t);
    const PairComparison cmp = compare(scores_gaussian, scores_student);
    rec.rdic = cmp.rdic;
    rec.lpsbf = cmp.lpsbf;
    rec.rpsbf = cmp.rpsbf;
    rec.dic_gaussian = scores_gaussian.dic;
    rec.dic_student_t = scores_student.dic;
    rec.neg_lpml_gaussian = scores_gaussian.neg_lpml;
    rec.neg_lpml_student_t = scores_student.neg_lpml;
    rec.ok = true;
  } catch (const std::exception& err) {
    rec.ok = false;
    rec.error = err.what();
  }
  return rec;
}

}  // namespace

ComparisonReport run_study(const std::vector<ScenarioConfig>& scenarios,
                           const StudyOptions& options) {
  for (const auto& cfg : scenarios) validate(cfg);
  ComparisonReport report;
  report.records.resize(scenarios.size());
  report.summaries.reserve(scenarios.size());

  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const ScenarioConfig& cfg = scenarios[s];
    auto& records = report.records[s];
    records.resize(static_cast<std::size_t>(cfg.replicates));
    parallel_for(cfg.replicates, options.threads, [&](int r) {
      records[static_cast<std::size_t>(r)] = run_replicate(cfg, r, options);
      if (!options.keep_paths) {
        records[static_cast<std::size_t>(r)].truth.resize(0);
        records[static_cast<std::size_t>(r)].mean_gaussian.resize(0);
        records[static_cast<std::size_t>(r)].mean_student_t.resize(0);
      }
    });

    ScenarioSummary summary;
    summary.config = cfg;
    std::vector<double> eff, rdic, lpsbf, rpsbf;
    for (const auto& rec : records) {
      if (!rec.ok) {
        ++summary.excluded;
        continue;
      }
      ++summary.completed;
      eff.push_back(rec.efficiency_j);
      rdic.push_back(rec.rdic);
      lpsbf.push_back(rec.lpsbf);
      rpsbf.push_back(rec.rpsbf);
    }
    summary.efficiency_q = quartiles(std::move(eff));
    summary.rdic_q = quartiles(std::move(rdic));
    summary.lpsbf_q = quartiles(std::move(lpsbf));
    summary.rpsbf_q = quartiles(std::move(rpsbf));
    report.summaries.push_back(std::move(summary));
    if (options.progress) {
      options.progress("scenario n_d=" + std::to_string(cfg.n_d) +
                       " p=" + std::to_string(cfg.p) + " f=" + std::to_string(cfg.f) +
                       " done (" + std::to_string(report.summaries.back().completed) +
                       "/" + std::to_string(cfg.replicates) + " replicates)");
    }
  }
  return report;
}

}  // namespace rdlm
