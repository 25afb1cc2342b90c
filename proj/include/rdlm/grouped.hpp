#pragma once

#include <string>
#include <vector>

#include "rdlm/augment.hpp"

namespace rdlm {

struct GroupedRow {
  std::string series_id;
  std::string group_id;
  long time = 0;
  double value = 0.0;
  bool missing = false;
};

struct GroupedSeries {
  std::string series_id;
  long start_time = 0;
  TimeSeries series;
};

// Long-format dataset: every group shares one latent trend, observed by one
// or more series with their own observation variances.
struct GroupedDataset {
  struct Group {
    std::string group_id;
    long start_time = 0;  // time of state index 0
    int state_dim = 0;
    std::vector<GroupedSeries> series;
  };
  std::vector<Group> groups;

  bool any_multi_series() const;
};

// Groups rows by (group_id, series_id) in first-appearance order and checks
// that every series covers a contiguous time range. The group's state path
// spans the union of its series ranges.
GroupedDataset assemble_grouped(const std::vector<GroupedRow>& rows);

struct GroupPriors {
  GammaPrior obs{5.0, 500.0};
  GammaPrior sys{1.0, 0.1};
  double dof_df = 0.3;
};

// Shared-trend augmented model for one group: every series observes the
// common state path through its own precision group; one evolution row per
// state transition.
AugmentedModel build_grouped_model(const GroupedDataset::Group& group,
                                   bool student_t, const GroupPriors& priors,
                                   double epsilon = 1e-5);

}  // namespace rdlm
