#pragma once

#include <string>
#include <vector>

#include "evaluate/metrics.hpp"

namespace fer {

struct BaselineRow {
  std::string name;
  std::string accuracy;  // as published, e.g. "0.470"
  double value() const;
};

// Published peak accuracies, in publication order.
class BaselineTable {
 public:
  static BaselineTable published();
  explicit BaselineTable(std::vector<BaselineRow> rows) : rows_(std::move(rows)) {}
  const std::vector<BaselineRow>& rows() const { return rows_; }

 private:
  std::vector<BaselineRow> rows_;
};

// "<name> <accuracy>" rows sorted by descending accuracy (stable, so equal
// values keep table order and an evaluated model follows equal baselines).
// The evaluated model is printed to 4 decimal places and prefixed "* ".
// With metrics, a confusion matrix and per-class accuracies follow.
std::string render_comparison_report(const EvalMetrics* metrics, const std::string& name,
                                     const BaselineTable& baselines);

std::string format_accuracy(double value);

}  // namespace fer
