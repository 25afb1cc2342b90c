#include "rdlm/grouped.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace rdlm {

bool GroupedDataset::any_multi_series() const {
  for (const auto& group : groups)
    if (group.series.size() > 1) return true;
  return false;
}

GroupedDataset assemble_grouped(const std::vector<GroupedRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("assemble_grouped: no rows");

  GroupedDataset data;
  std::map<std::string, std::size_t> group_index;
  std::map<std::pair<std::string, std::string>, std::vector<const GroupedRow*>> by_series;
  std::vector<std::pair<std::string, std::string>> series_order;
  for (const auto& row : rows) {
    const auto key = std::make_pair(row.group_id, row.series_id);
    auto [it, inserted] = by_series.try_emplace(key);
    if (inserted) series_order.push_back(key);
    it->second.push_back(&row);
    if (!group_index.contains(row.group_id)) {
      group_index[row.group_id] = data.groups.size();
      data.groups.push_back({row.group_id, 0, 0, {}});
    }
  }

  for (const auto& key : series_order) {
    auto series_rows = by_series[key];
    std::sort(series_rows.begin(), series_rows.end(),
              [](const GroupedRow* a, const GroupedRow* b) { return a->time < b->time; });
    for (std::size_t i = 1; i < series_rows.size(); ++i) {
      if (series_rows[i]->time == series_rows[i - 1]->time)
        throw std::invalid_argument("assemble_grouped: duplicate time " +
                                    std::to_string(series_rows[i]->time) +
                                    " in series " + key.second);
      if (series_rows[i]->time != series_rows[i - 1]->time + 1)
        throw std::invalid_argument("assemble_grouped: series " + key.second +
                                    " has a gap before time " +
                                    std::to_string(series_rows[i]->time));
    }
    GroupedSeries gs;
    gs.series_id = key.second;
    gs.start_time = series_rows.front()->time;
    Eigen::VectorXd values(series_rows.size());
    std::vector<bool> observed(series_rows.size());
    for (std::size_t i = 0; i < series_rows.size(); ++i) {
      values[static_cast<Eigen::Index>(i)] = series_rows[i]->missing ? 0.0 : series_rows[i]->value;
      observed[i] = !series_rows[i]->missing;
      if (observed[i] && !std::isfinite(series_rows[i]->value))
        throw std::invalid_argument("assemble_grouped: non-finite value in series " +
                                    key.second);
    }
    gs.series = TimeSeries(std::move(values), std::move(observed));
    data.groups[group_index[key.first]].series.push_back(std::move(gs));
  }

  for (auto& group : data.groups) {
    long lo = group.series.front().start_time;
    long hi = lo;
    for (const auto& gs : group.series) {
      lo = std::min(lo, gs.start_time);
      hi = std::max(hi, gs.start_time + static_cast<long>(gs.series.size()) - 1);
    }
    group.start_time = lo;
    group.state_dim = static_cast<int>(hi - lo + 1);
    if (group.state_dim < 2)
      throw std::invalid_argument("assemble_grouped: group " + group.group_id +
                                  " spans fewer than 2 time points");
  }
  return data;
}

AugmentedModel build_grouped_model(const GroupedDataset::Group& group,
                                   bool student_t, const GroupPriors& priors,
                                   double epsilon) {
  if (!(epsilon > 0.0))
    throw std::invalid_argument("build_grouped_model: epsilon must be positive");
  const int n = group.state_dim;
  AugmentedModel model;
  model.state_dim = n;
  model.prior_precision_epsilon = epsilon;
  model.precision_groups = static_cast<int>(group.series.size());
  model.sys_noise = student_t ? NoiseFamily{StudentTNoise{1.0, 10.0}}
                              : NoiseFamily{GaussianNoise{1.0}};
  model.obs_precision_priors.assign(group.series.size(), priors.obs);
  model.sys_precision_prior = priors.sys;
  model.dof_df = priors.dof_df;

  std::vector<double> z;
  for (std::size_t s = 0; s < group.series.size(); ++s) {
    const auto& gs = group.series[s];
    const int offset = static_cast<int>(gs.start_time - group.start_time);
    for (Eigen::Index t = 0; t < gs.series.size(); ++t) {
      const bool active = gs.series.is_observed(t);
      const double value = active ? gs.series.values[t] : 0.0;
      model.layout.push_back({RowRole::observation, offset + static_cast<int>(t), -1,
                              value, static_cast<int>(s), active});
      z.push_back(value);
    }
  }
  for (int t = 1; t < n; ++t) {
    model.layout.push_back({RowRole::evolution, t, t - 1, 0.0, 0, true});
    z.push_back(0.0);
  }
  model.z = Eigen::Map<Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  return model;
}

}  // namespace rdlm
