#include "rdlm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rdlm {

std::string format_double(double value) {
  if (std::isnan(value)) return "NA";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream stream(s);
  while (std::getline(stream, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

}  // namespace

std::vector<GroupedRow> read_long_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError(0, "cannot open " + path);
  std::string line;
  int line_number = 0;
  if (!std::getline(in, line)) throw CsvError(0, "empty file");
  ++line_number;
  {
    auto header = split(line, ',');
    for (auto& h : header) h = trim(h);
    if (header.size() != 4 || header[0] != "series_id" || header[1] != "group_id" ||
        header[2] != "time" || header[3] != "value")
      throw CsvError(line_number,
                     "expected header series_id,group_id,time,value");
  }
  std::vector<GroupedRow> rows;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != 4) throw CsvError(line_number, "expected 4 fields");
    GroupedRow row;
    row.series_id = trim(fields[0]);
    row.group_id = trim(fields[1]);
    if (row.series_id.empty() || row.group_id.empty())
      throw CsvError(line_number, "empty series_id or group_id");
    const std::string time_str = trim(fields[2]);
    try {
      std::size_t used = 0;
      row.time = std::stol(time_str, &used);
      if (used != time_str.size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw CsvError(line_number, "bad time value '" + time_str + "'");
    }
    const std::string value_str = trim(fields[3]);
    if (value_str.empty() || value_str == "NA" || value_str == "na" ||
        value_str == "nan" || value_str == "NaN") {
      row.missing = true;
    } else {
      try {
        std::size_t used = 0;
        row.value = std::stod(value_str, &used);
        if (used != value_str.size()) throw std::invalid_argument("trailing text");
      } catch (const std::exception&) {
        throw CsvError(line_number, "bad value '" + value_str + "'");
      }
      if (!std::isfinite(row.value))
        throw CsvError(line_number, "non-finite value");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw CsvError(line_number, "no data rows");
  return rows;
}

std::string dataset_checksum(const GroupedDataset& data) {
  std::uint64_t hash = 1469598103934665603ULL;  // FNV-1a 64
  auto mix = [&hash](const std::string& text) {
    for (unsigned char c : text) {
      hash ^= c;
      hash *= 1099511628211ULL;
    }
  };
  for (const auto& group : data.groups) {
    mix(group.group_id);
    mix("|");
    for (const auto& gs : group.series) {
      mix(gs.series_id);
      mix("@" + std::to_string(gs.start_time) + ":");
      for (Eigen::Index t = 0; t < gs.series.size(); ++t) {
        mix(gs.series.is_observed(t) ? format_double(gs.series.values[t]) : "NA");
        mix(",");
      }
      mix(";");
    }
  }
  std::ostringstream out;
  out << std::hex << hash;
  return out.str();
}

SimulateConfig parse_sim_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  SimulateConfig config;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_number) +
                               ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "seed") {
        config.seed = std::stoull(value);
      } else if (key == "replicates") {
        config.replicates = std::stoi(value);
      } else if (key == "theta1") {
        config.theta1 = std::stod(value);
      } else if (key == "theta2") {
        config.theta2 = std::stod(value);
      } else if (key == "out_dir") {
        config.out_dir = value;
      } else if (key == "n_d") {
        config.n_d.clear();
        for (const auto& item : split(value, ','))
          config.n_d.push_back(std::stoi(trim(item)));
      } else if (key == "p") {
        config.p.clear();
        for (const auto& item : split(value, ','))
          config.p.push_back(std::stod(trim(item)));
      } else if (key == "f") {
        config.f.clear();
        for (const auto& item : split(value, ','))
          config.f.push_back(std::stod(trim(item)));
      } else {
        throw std::runtime_error("unknown key '" + key + "'");
      }
    } catch (const std::runtime_error&) {
      throw;
    } catch (const std::exception&) {
      throw std::runtime_error("config line " + std::to_string(line_number) +
                               ": bad value for " + key);
    }
  }
  if (config.n_d.empty() || config.p.empty() || config.f.empty())
    throw std::runtime_error("config: n_d, p and f must be non-empty");
  if (config.replicates < 1) throw std::runtime_error("config: replicates >= 1");
  return config;
}

std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t index) {
  auto mix = [](std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  std::uint64_t state = seed;
  (void)mix(state);
  state ^= 0x9E3779B97F4A7C15ULL * (index + 1);
  return mix(state);
}

std::vector<ScenarioConfig> expand_scenarios(const SimulateConfig& config) {
  std::vector<ScenarioConfig> scenarios;
  std::uint64_t index = 0;
  for (const int n : config.n_d)
    for (const double p : config.p)
      for (const double f : config.f) {
        ScenarioConfig cfg;
        cfg.n_d = n;
        cfg.p = p;
        cfg.f = f;
        cfg.replicates = config.replicates;
        cfg.theta1 = config.theta1;
        cfg.theta2 = config.theta2;
        cfg.seed = derive_stream_seed(config.seed, index++);
        scenarios.push_back(cfg);
      }
  return scenarios;
}

void write_states_csv(const std::string& path, const GroupedDataset& data,
                      const std::vector<const FitResult*>& fits) {
  auto out = open_output(path);
  out << "group_id,time,mean,sd,q025,median,q975\n";
  for (std::size_t g = 0; g < data.groups.size(); ++g) {
    const auto& group = data.groups[g];
    const auto& marginals = fits[g]->state_marginals;
    for (std::size_t t = 0; t < marginals.size(); ++t) {
      const auto& m = marginals[t];
      out << group.group_id << ',' << group.start_time + static_cast<long>(t) << ','
          << format_double(m.mean) << ',' << format_double(m.sd) << ','
          << format_double(m.q025) << ',' << format_double(m.median) << ','
          << format_double(m.q975) << '\n';
    }
  }
}

void write_hypers_csv(const std::string& path, const GroupedDataset& data,
                      const std::vector<const FitResult*>& fits) {
  auto out = open_output(path);
  out << "group_id,name,mean,sd,q025,median,q975,degenerate\n";
  for (std::size_t g = 0; g < data.groups.size(); ++g) {
    const auto& fit = *fits[g];
    for (std::size_t s = 0; s < fit.hyper_marginals.size(); ++s) {
      const auto& m = fit.hyper_marginals[s];
      out << data.groups[g].group_id << ',' << fit.hyper_names[s] << ','
          << format_double(m.mean) << ',' << format_double(m.sd) << ','
          << format_double(m.q025) << ',' << format_double(m.median) << ','
          << format_double(m.q975) << ',' << (m.degenerate ? 1 : 0) << '\n';
    }
  }
}

void write_scores_json(const std::string& path, const std::string& checksum,
                       const std::vector<GroupFitArtifact>& groups) {
  nlohmann::json doc;
  doc["checksum"] = checksum;
  doc["groups"] = nlohmann::json::array();
  for (const auto& artifact : groups) {
    nlohmann::json g;
    g["group_id"] = artifact.group_id;
    g["noise"] = artifact.noise;
    g["dic"] = artifact.scores.dic;
    g["p_d"] = artifact.scores.p_d;
    g["neg_lpml"] = artifact.scores.neg_lpml;
    g["cpo"] = std::vector<double>(
        artifact.scores.cpo.data(),
        artifact.scores.cpo.data() + artifact.scores.cpo.size());
    g["flagged_cpo"] = artifact.scores.flagged_cpo;
    if (artifact.fit) {
      const auto& diag = artifact.fit->diagnostics;
      g["diagnostics"] = {{"grid_size", diag.grid_size},
                          {"mode_search_iterations", diag.mode_search_iterations},
                          {"newton_iterations", diag.newton_iterations},
                          {"wall_seconds", diag.wall_seconds},
                          {"masked_indices", diag.masked_indices},
                          {"warnings", diag.warnings}};
      g["hypers"] = nlohmann::json::array();
      for (std::size_t s = 0; s < artifact.fit->hyper_marginals.size(); ++s) {
        const auto& m = artifact.fit->hyper_marginals[s];
        g["hypers"].push_back({{"name", artifact.fit->hyper_names[s]},
                               {"mean", m.mean},
                               {"sd", m.sd},
                               {"q025", m.q025},
                               {"median", m.median},
                               {"q975", m.q975},
                               {"degenerate", m.degenerate}});
      }
    }
    doc["groups"].push_back(std::move(g));
  }
  auto out = open_output(path);
  out << doc.dump(2) << '\n';
}

ScoreFile read_scores_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& err) {
    throw std::runtime_error(path + ": " + err.what());
  }
  ScoreFile file;
  try {
    file.checksum = doc.at("checksum").get<std::string>();
    for (const auto& g : doc.at("groups")) {
      ScoreFileGroup group;
      group.group_id = g.at("group_id").get<std::string>();
      group.noise = g.value("noise", "");
      group.dic = g.at("dic").get<double>();
      group.neg_lpml = g.at("neg_lpml").get<double>();
      file.groups.push_back(std::move(group));
    }
  } catch (const nlohmann::json::exception& err) {
    throw std::runtime_error(path + ": " + err.what());
  }
  return file;
}

void write_replicates_csv(const std::string& path, const ComparisonReport& report) {
  auto out = open_output(path);
  out << "n_d,p,f,replicate,status,efficiency,rdic,lpsbf,rpsbf,"
         "dic_gaussian,dic_student_t,neg_lpml_gaussian,neg_lpml_student_t\n";
  for (std::size_t s = 0; s < report.records.size(); ++s) {
    const auto& cfg = report.summaries[s].config;
    for (const auto& rec : report.records[s]) {
      out << cfg.n_d << ',' << format_double(cfg.p) << ',' << format_double(cfg.f)
          << ',' << rec.replicate << ',' << (rec.ok ? "ok" : "failed") << ',';
      if (rec.ok) {
        out << format_double(rec.efficiency_j) << ',' << format_double(rec.rdic)
            << ',' << format_double(rec.lpsbf) << ',' << format_double(rec.rpsbf)
            << ',' << format_double(rec.dic_gaussian) << ','
            << format_double(rec.dic_student_t) << ','
            << format_double(rec.neg_lpml_gaussian) << ','
            << format_double(rec.neg_lpml_student_t);
      } else {
        out << "NA,NA,NA,NA,NA,NA,NA,NA";
      }
      out << '\n';
    }
  }
}

void write_summary_csv(const std::string& path, const ComparisonReport& report) {
  auto out = open_output(path);
  out << "n_d,p,f,replicates,completed,excluded,"
         "median_efficiency,q1_efficiency,q3_efficiency,"
         "median_rdic,q1_rdic,q3_rdic,median_lpsbf,"
         "median_rpsbf,q1_rpsbf,q3_rpsbf\n";
  for (const auto& s : report.summaries) {
    out << s.config.n_d << ',' << format_double(s.config.p) << ','
        << format_double(s.config.f) << ',' << s.config.replicates << ','
        << s.completed << ',' << s.excluded << ','
        << format_double(s.efficiency_q.median) << ','
        << format_double(s.efficiency_q.q1) << ','
        << format_double(s.efficiency_q.q3) << ','
        << format_double(s.rdic_q.median) << ',' << format_double(s.rdic_q.q1)
        << ',' << format_double(s.rdic_q.q3) << ','
        << format_double(s.lpsbf_q.median) << ','
        << format_double(s.rpsbf_q.median) << ',' << format_double(s.rpsbf_q.q1)
        << ',' << format_double(s.rpsbf_q.q3) << '\n';
  }
}

void write_report_json(const std::string& path, std::uint64_t master_seed,
                       const ComparisonReport& report) {
  nlohmann::json doc;
  doc["seed"] = master_seed;
  doc["scenarios"] = nlohmann::json::array();
  auto quartile_json = [](const Quartiles& q) {
    return nlohmann::json{{"q1", q.q1}, {"median", q.median}, {"q3", q.q3}};
  };
  for (const auto& s : report.summaries) {
    doc["scenarios"].push_back({{"n_d", s.config.n_d},
                                {"p", s.config.p},
                                {"f", s.config.f},
                                {"replicates", s.config.replicates},
                                {"seed", s.config.seed},
                                {"theta1", s.config.theta1},
                                {"theta2", s.config.theta2},
                                {"completed", s.completed},
                                {"excluded", s.excluded},
                                {"efficiency", quartile_json(s.efficiency_q)},
                                {"rdic", quartile_json(s.rdic_q)},
                                {"lpsbf", quartile_json(s.lpsbf_q)},
                                {"rpsbf", quartile_json(s.rpsbf_q)}});
  }
  auto out = open_output(path);
  out << doc.dump(2) << '\n';
}

}  // namespace rdlm
