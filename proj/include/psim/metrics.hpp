#pragma once

// Normalized Euclidean error: per-sample distance divided by the mean
// pairwise distance of the target set, in percent. 100% means the outputs
// carry no more information than drawing a random target.

#include <cstdint>
#include <string>
#include <vector>

#include "psim/tensor.hpp"

namespace psim {

// mean_i ||outputs[i] - targets[i]|| / N * 100, where N is the mean of
// ||t_j - t_k|| over all unordered pairs j < k. Requires >= 2 targets and a
// nondegenerate target set (N > 0).
double normalized_error(const std::vector<Tensor>& outputs, const std::vector<Tensor>& targets);

struct MetricRow {
  std::string label;
  double img_err_pct = 0.0;
  double feat_err_pct = 0.0;
  int64_t iteration = 0;
};

struct MetricTable {
  std::vector<MetricRow> rows;
};

// CSV with header `label,img_err_pct,feat_err_pct,iteration`; atomic write.
void write_metrics_csv(const std::string& path, const MetricTable& table);

}  // namespace psim
