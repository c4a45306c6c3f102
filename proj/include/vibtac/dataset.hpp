#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "vibtac/errors.hpp"
#include "vibtac/numerics.hpp"
#include "vibtac/signal.hpp"

namespace vibtac {

// Feature rows with one class label per row.
struct LabeledFeatures {
  Matrix x;
  std::vector<int> labels;
  std::vector<int> levels;  // optional, empty or one per row

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return x.cols(); }
};

inline LabeledFeatures to_labeled(const std::vector<FeatureVector>& rows) {
  LabeledFeatures out;
  if (rows.empty()) return out;
  const std::size_t d = rows.front().values.size();
  out.x = Matrix(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].values.size() != d) throw DimensionMismatch("feature rows differ in length");
    std::copy(rows[i].values.begin(), rows[i].values.end(), out.x.row(i).begin());
    out.labels.push_back(rows[i].label);
    out.levels.push_back(rows[i].level);
  }
  return out;
}

inline std::vector<int> class_ids(const std::vector<int>& labels) {
  std::vector<int> ids = labels;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

inline LabeledFeatures subset(const LabeledFeatures& data, const std::vector<std::size_t>& rows) {
  LabeledFeatures out;
  out.x = Matrix(rows.size(), data.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = data.x.row(rows[i]);
    std::copy(src.begin(), src.end(), out.x.row(i).begin());
    out.labels.push_back(data.labels[rows[i]]);
    if (!data.levels.empty()) out.levels.push_back(data.levels[rows[i]]);
  }
  return out;
}

}  // namespace vibtac
