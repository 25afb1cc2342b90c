#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdlm/grouped.hpp"
#include "rdlm/scores.hpp"
#include "rdlm/simlab.hpp"

namespace rdlm {

class CsvError : public std::runtime_error {
 public:
  CsvError(int line_number, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_number) + ": " + msg),
        line(line_number) {}
  int line = 0;
};

// Long-format CSV with header series_id,group_id,time,value. An empty or
// NA/nan value cell marks a missing observation.
std::vector<GroupedRow> read_long_csv(const std::string& path);

// FNV-1a hash of the canonical dataset rendering; recorded in fit artifacts
// so compare can refuse fits of different data.
std::string dataset_checksum(const GroupedDataset& data);

struct SimulateConfig {
  std::uint64_t seed = 20240101;
  int replicates = 100;
  std::vector<int> n_d{100};
  std::vector<double> p{0.0, 0.1, 0.25};
  std::vector<double> f{2.0, 8.0};
  double theta1 = 2.0;
  double theta2 = 2.0;
  std::string out_dir = ".";
};

// key = value lines with # comments; lists are comma separated. Unknown keys
// are rejected.
SimulateConfig parse_sim_config(const std::string& path);

// Cross product over (n_d, p, f); each scenario gets a derived seed.
std::vector<ScenarioConfig> expand_scenarios(const SimulateConfig& config);

std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t index);

// Per-group fit artifacts consumed by `compare` and external tooling.
struct GroupFitArtifact {
  std::string group_id;
  std::string noise;  // "gaussian" | "student_t"
  FitScores scores;
  const FitResult* fit = nullptr;  // optional, adds marginal summaries
};

void write_states_csv(const std::string& path, const GroupedDataset& data,
                      const std::vector<const FitResult*>& fits);
void write_hypers_csv(const std::string& path, const GroupedDataset& data,
                      const std::vector<const FitResult*>& fits);
void write_scores_json(const std::string& path, const std::string& checksum,
                       const std::vector<GroupFitArtifact>& groups);

struct ScoreFileGroup {
  std::string group_id;
  std::string noise;
  double dic = 0.0;
  double neg_lpml = 0.0;
};

struct ScoreFile {
  std::string checksum;
  std::vector<ScoreFileGroup> groups;
};

ScoreFile read_scores_json(const std::string& path);

void write_replicates_csv(const std::string& path, const ComparisonReport& report);
void write_summary_csv(const std::string& path, const ComparisonReport& report);
void write_report_json(const std::string& path, std::uint64_t master_seed,
                       const ComparisonReport& report);

std::string format_double(double value);  // repeatable shortest round-trip text

}  // namespace rdlm
