#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "rdlm/engine.hpp"
#include "rdlm/io.hpp"
#include "rdlm/parallel.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitFit = 3;

struct FitFlags {
  std::string input;
  std::string out_dir = "rdlm-fit";
  std::string noise = "gaussian";
  double step = 0.75;
  double log_drop = 2.5;
  double epsilon = 1e-5;
  double grad_tol = 1e-8;
  double mode_grad_tol = 1e-5;
  double fd_step = 1e-4;
  int marginal_points = 75;
  int threads = 0;
  std::optional<double> obs_prior_shape, obs_prior_rate;
  std::optional<double> sys_prior_shape, sys_prior_rate;
  double dof_df = 0.3;
  std::optional<double> fix_obs_prec, fix_sys_prec, fix_dof;
};

rdlm::FitOptions to_fit_options(const FitFlags& flags) {
  rdlm::FitOptions options;
  options.grid_step = flags.step;
  options.grid_log_drop = flags.log_drop;
  options.epsilon = flags.epsilon;
  options.newton.grad_tol = flags.grad_tol;
  options.mode_grad_tol = flags.mode_grad_tol;
  options.fd_step = flags.fd_step;
  options.marginal_points = flags.marginal_points;
  options.threads = flags.threads > 0 ? flags.threads
                                      : rdlm::thread_count_from_env(1);
  options.fixed_obs_precision = flags.fix_obs_prec;
  options.fixed_sys_precision = flags.fix_sys_prec;
  options.fixed_dof = flags.fix_dof;
  return options;
}

int run_fit(const FitFlags& flags) {
  std::vector<rdlm::GroupedRow> rows;
  rdlm::GroupedDataset data;
  try {
    rows = rdlm::read_long_csv(flags.input);
    data = rdlm::assemble_grouped(rows);
  } catch (const std::exception& err) {
    std::cerr << "input error: " << err.what() << "\n";
    return kExitInput;
  }
  const bool student_t = flags.noise == "student-t";

  rdlm::GroupPriors priors;
  if (!data.any_multi_series()) {
    priors.obs = {1.0, 2.375};
    priors.sys = {1.0, 2.375};
  }
  if (flags.obs_prior_shape) priors.obs.shape = *flags.obs_prior_shape;
  if (flags.obs_prior_rate) priors.obs.rate = *flags.obs_prior_rate;
  if (flags.sys_prior_shape) priors.sys.shape = *flags.sys_prior_shape;
  if (flags.sys_prior_rate) priors.sys.rate = *flags.sys_prior_rate;
  priors.dof_df = flags.dof_df;

  const rdlm::FitOptions options = to_fit_options(flags);
  std::vector<rdlm::FitResult> fits;
  std::vector<rdlm::GroupFitArtifact> artifacts;
  try {
    for (const auto& group : data.groups) {
      const rdlm::AugmentedModel model =
          rdlm::build_grouped_model(group, student_t, priors, flags.epsilon);
      fits.push_back(rdlm::fit_model(model, options));
      rdlm::GroupFitArtifact artifact;
      artifact.group_id = group.group_id;
      artifact.noise = student_t ? "student_t" : "gaussian";
      artifact.scores = rdlm::compute_cpo(fits.back(), model);
      artifacts.push_back(std::move(artifact));
    }
  } catch (const rdlm::ConvergenceError& err) {
    std::cerr << "fit error: " << err.what() << "\n";
    return kExitFit;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitInput;
  }

  std::filesystem::create_directories(flags.out_dir);
  std::vector<const rdlm::FitResult*> fit_ptrs;
  for (std::size_t g = 0; g < fits.size(); ++g) {
    fit_ptrs.push_back(&fits[g]);
    artifacts[g].fit = &fits[g];
  }
  const std::string checksum = rdlm::dataset_checksum(data);
  rdlm::write_states_csv(flags.out_dir + "/states.csv", data, fit_ptrs);
  rdlm::write_hypers_csv(flags.out_dir + "/hypers.csv", data, fit_ptrs);
  rdlm::write_scores_json(flags.out_dir + "/scores.json", checksum, artifacts);

  for (std::size_t g = 0; g < fits.size(); ++g) {
    const auto& diag = fits[g].diagnostics;
    std::cout << "group " << data.groups[g].group_id << ": dic="
              << rdlm::format_double(artifacts[g].scores.dic)
              << " neg_lpml=" << rdlm::format_double(artifacts[g].scores.neg_lpml)
              << " grid=" << diag.grid_size << " wall="
              << rdlm::format_double(diag.wall_seconds) << "s";
    if (!diag.masked_indices.empty()) {
      std::cout << " masked=[";
      for (std::size_t i = 0; i < diag.masked_indices.size(); ++i)
        std::cout << (i ? "," : "") << diag.masked_indices[i];
      std::cout << "]";
    }
    std::cout << "\n";
    for (const auto& warning : diag.warnings)
      std::cerr << "warning (" << data.groups[g].group_id << "): " << warning << "\n";
  }
  std::cout << "artifacts written to " << flags.out_dir << "\n";
  return kExitOk;
}

int run_simulate(const std::string& config_path, const std::string& out_override,
                 int threads, bool keep_paths) {
  rdlm::SimulateConfig config;
  try {
    config = rdlm::parse_sim_config(config_path);
  } catch (const std::exception& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kExitInput;
  }
  if (!out_override.empty()) config.out_dir = out_override;

  rdlm::StudyOptions options;
  options.threads = threads > 0 ? threads : rdlm::thread_count_from_env(4);
  options.keep_paths = keep_paths;
  options.progress = [](const std::string& msg) { std::cerr << msg << "\n"; };

  const auto scenarios = rdlm::expand_scenarios(config);
  const rdlm::ComparisonReport report = rdlm::run_study(scenarios, options);

  std::filesystem::create_directories(config.out_dir);
  rdlm::write_replicates_csv(config.out_dir + "/replicates.csv", report);
  rdlm::write_summary_csv(config.out_dir + "/summary.csv", report);
  rdlm::write_report_json(config.out_dir + "/report.json", config.seed, report);

  std::cout << "n_d\tp\tf\tmed_eff\tmed_rdic\tmed_rpsbf\tcompleted\n";
  for (const auto& s : report.summaries)
    std::cout << s.config.n_d << '\t' << s.config.p << '\t' << s.config.f << '\t'
              << rdlm::format_double(s.efficiency_q.median) << '\t'
              << rdlm::format_double(s.rdic_q.median) << '\t'
              << rdlm::format_double(s.rpsbf_q.median) << '\t' << s.completed
              << "/" << s.config.replicates << "\n";
  std::cout << "artifacts written to " << config.out_dir << "\n";
  return kExitOk;
}

int run_compare(const std::string& gaussian_path, const std::string& student_path,
                const std::string& out_path) {
  rdlm::ScoreFile gaussian, student;
  try {
    gaussian = rdlm::read_scores_json(gaussian_path);
    student = rdlm::read_scores_json(student_path);
  } catch (const std::exception& err) {
    std::cerr << "input error: " << err.what() << "\n";
    return kExitInput;
  }
  if (gaussian.checksum != student.checksum) {
    std::cerr << "checksum mismatch: refusing to compare fits of different "
                 "datasets\n";
    return kExitInput;
  }

  bool any = false;
  std::cout << "group\trdic\tlpsbf\t2psbf\trpsbf\tevidence\n";
  std::string json = "{\n  \"groups\": [";
  bool first = true;
  for (const auto& g : gaussian.groups) {
    const auto it = std::find_if(
        student.groups.begin(), student.groups.end(),
        [&](const rdlm::ScoreFileGroup& s) { return s.group_id == g.group_id; });
    if (it == student.groups.end()) continue;
    any = true;
    const rdlm::PairComparison cmp =
        rdlm::compare_raw(g.dic, it->dic, g.neg_lpml, it->neg_lpml);
    std::cout << g.group_id << '\t' << rdlm::format_double(cmp.rdic) << '\t'
              << rdlm::format_double(cmp.lpsbf) << '\t'
              << rdlm::format_double(2.0 * cmp.lpsbf) << '\t'
              << rdlm::format_double(cmp.rpsbf) << '\t' << cmp.evidence_label
              << "\n";
    if (!first) json += ",";
    first = false;
    json += "\n    {\"group_id\": \"" + g.group_id +
            "\", \"rdic\": " + rdlm::format_double(cmp.rdic) +
            ", \"lpsbf\": " + rdlm::format_double(cmp.lpsbf) +
            ", \"two_psbf\": " + rdlm::format_double(2.0 * cmp.lpsbf) +
            ", \"rpsbf\": " + rdlm::format_double(cmp.rpsbf) +
            ", \"evidence\": \"" + cmp.evidence_label + "\"}";
  }
  json += "\n  ]\n}\n";
  if (!any) {
    std::cerr << "no common group ids between the two score files\n";
    return kExitInput;
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "cannot write " << out_path << "\n";
      return kExitInput;
    }
    out << json;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian smoothing of first-order dynamic linear models with "
               "Gaussian or Student-t system noise"};
  app.require_subcommand(1);

  FitFlags fit_flags;
  auto* fit_cmd = app.add_subcommand(
      "fit", "Fit one model per group of a long-format CSV");
  fit_cmd->add_option("--input", fit_flags.input,
                      "CSV with header series_id,group_id,time,value")
      ->required();
  fit_cmd->add_option("--out", fit_flags.out_dir, "Output directory");
  fit_cmd->add_option("--noise", fit_flags.noise, "System-noise family")
      ->check(CLI::IsMember({"gaussian", "student-t"}));
  fit_cmd->add_option("--step", fit_flags.step, "Grid step (standardized)");
  fit_cmd->add_option("--log-drop", fit_flags.log_drop,
                      "Log-density drop ending grid exploration");
  fit_cmd->add_option("--epsilon", fit_flags.epsilon,
                      "Flat state-prior precision");
  fit_cmd->add_option("--grad-tol", fit_flags.grad_tol,
                      "Newton gradient tolerance");
  fit_cmd->add_option("--mode-grad-tol", fit_flags.mode_grad_tol,
                      "Hyperparameter mode-search gradient tolerance");
  fit_cmd->add_option("--fd-step", fit_flags.fd_step,
                      "Finite-difference step in internal coordinates");
  fit_cmd->add_option("--points", fit_flags.marginal_points,
                      "State-marginal support points");
  fit_cmd->add_option("--threads", fit_flags.threads,
                      "Worker threads (default RDLM_THREADS or 1)");
  fit_cmd->add_option("--obs-prior-shape", fit_flags.obs_prior_shape,
                      "Observation-precision Gamma shape");
  fit_cmd->add_option("--obs-prior-rate", fit_flags.obs_prior_rate,
                      "Observation-precision Gamma rate");
  fit_cmd->add_option("--sys-prior-shape", fit_flags.sys_prior_shape,
                      "System-precision Gamma shape");
  fit_cmd->add_option("--sys-prior-rate", fit_flags.sys_prior_rate,
                      "System-precision Gamma rate");
  fit_cmd->add_option("--df", fit_flags.dof_df,
                      "Prior mass on dof between 2 and 10");
  fit_cmd->add_option("--fix-obs-prec", fit_flags.fix_obs_prec,
                      "Pin every observation precision");
  fit_cmd->add_option("--fix-sys-prec", fit_flags.fix_sys_prec,
                      "Pin the system precision");
  fit_cmd->add_option("--fix-dof", fit_flags.fix_dof, "Pin the dof");

  std::string sim_config, sim_out;
  int sim_threads = 0;
  bool sim_keep_paths = false;
  auto* sim_cmd = app.add_subcommand(
      "simulate", "Run a contamination study from a config file");
  sim_cmd->add_option("--config", sim_config, "key = value config file")
      ->required();
  sim_cmd->add_option("--out", sim_out, "Override the config out_dir");
  sim_cmd->add_option("--threads", sim_threads,
                      "Worker threads (default RDLM_THREADS or 4)");
  sim_cmd->add_flag("--keep-paths", sim_keep_paths,
                    "Keep per-replicate state paths in memory");

  std::string cmp_gaussian, cmp_student, cmp_out;
  auto* cmp_cmd = app.add_subcommand(
      "compare", "Compare a Gaussian and a Student-t scores.json");
  cmp_cmd->add_option("gaussian", cmp_gaussian, "scores.json of the Gaussian fit")
      ->required();
  cmp_cmd->add_option("student_t", cmp_student, "scores.json of the Student-t fit")
      ->required();
  cmp_cmd->add_option("--out", cmp_out, "Write the comparison as JSON");

  CLI11_PARSE(app, argc, argv);

  if (fit_cmd->parsed()) return run_fit(fit_flags);
  if (sim_cmd->parsed()) return run_simulate(sim_config, sim_out, sim_threads,
                                             sim_keep_paths);
  if (cmp_cmd->parsed()) return run_compare(cmp_gaussian, cmp_student, cmp_out);
  return kExitInput;
}
