#include "psim/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace psim {

namespace {

double euclidean(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

double normalized_error(const std::vector<Tensor>& outputs, const std::vector<Tensor>& targets) {
  if (outputs.size() != targets.size())
    throw std::invalid_argument("normalized_error: " + std::to_string(outputs.size()) +
                                " outputs vs " + std::to_string(targets.size()) + " targets");
  if (targets.size() < 2)
    throw std::invalid_argument(
        "normalized_error: need at least 2 targets to define the normalization");
  for (size_t i = 0; i < targets.size(); ++i) {
    if (!outputs[i].same_shape(targets[i]) || !targets[i].same_shape(targets[0]))
      throw std::invalid_argument("normalized_error: shape mismatch at sample " +
                                  std::to_string(i));
  }

  double pair_sum = 0.0;
  int64_t pairs = 0;
  for (size_t j = 0; j < targets.size(); ++j)
    for (size_t k = j + 1; k < targets.size(); ++k) {
      pair_sum += euclidean(targets[j], targets[k]);
      ++pairs;
    }
  const double n = pair_sum / static_cast<double>(pairs);
  if (!(n > 0.0))
    throw std::invalid_argument("normalized_error: degenerate target set (all targets equal)");

  double err = 0.0;
  for (size_t i = 0; i < outputs.size(); ++i) err += euclidean(outputs[i], targets[i]);
  err /= static_cast<double>(outputs.size());
  return err / n * 100.0;
}

void write_metrics_csv(const std::string& path, const MetricTable& table) {
  std::string out = "label,img_err_pct,feat_err_pct,iteration\n";
  char buf[64];
  for (const MetricRow& r : table.rows) {
    out += r.label;
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,", r.img_err_pct, r.feat_err_pct);
    out += buf;
    out += std::to_string(r.iteration) + "\n";
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error(path + ": cannot open for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error(path + ": short write");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error(path + ": rename failed: " + ec.message());
}

}  // namespace psim
