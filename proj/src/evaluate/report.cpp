#include "evaluate/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace fer {

double BaselineRow::value() const { return std::stod(accuracy); }

BaselineTable BaselineTable::published() {
  return BaselineTable({
      {"Our Model", "0.5509"},
      {"VGGNet Variant", "0.58"},
      {"MobileNet Variant", "0.58"},
      {"SVR", "0.277"},
      {"CNN", "0.470"},
      {"2Att-CNN", "0.487"},
      {"2Att-Mt", "0.539"},
      {"2Att-2Mt", "0.635"},
  });
}

std::string format_accuracy(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  return buf;
}

std::string render_comparison_report(const EvalMetrics* metrics, const std::string& name,
                                     const BaselineTable& baselines) {
  struct Row {
    std::string text;
    double value;
  };
  std::vector<Row> rows;
  for (const auto& b : baselines.rows()) rows.push_back({b.name + " " + b.accuracy, b.value()});
  if (metrics) rows.push_back({"* " + name + " " + format_accuracy(metrics->top1), metrics->top1});
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.value > b.value; });

  std::ostringstream out;
  for (const auto& r : rows) out << r.text << "\n";
  if (!metrics) return out.str();

  const EvalMetrics& m = *metrics;
  out << "\nevaluated " << m.evaluated << " images, " << m.failures.size()
      << " failed\n";
  out << "top-1 " << format_accuracy(m.top1) << "\n";
  out << "top-3 " << format_accuracy(m.top3) << "\n";

  out << "\nconfusion matrix (rows true, columns predicted)\n";
  std::size_t width = 9;  // "surprise" + 1
  char cell[32];
  std::snprintf(cell, sizeof cell, "%-*s", static_cast<int>(width), "");
  out << cell;
  for (std::size_t p = 0; p < kNumEmotions; ++p) {
    std::snprintf(cell, sizeof cell, "%*s",
                  static_cast<int>(width), std::string(kEmotionNames[p]).c_str());
    out << cell;
  }
  out << "\n";
  for (std::size_t t = 0; t < kNumEmotions; ++t) {
    std::snprintf(cell, sizeof cell, "%-*s", static_cast<int>(width),
                  std::string(kEmotionNames[t]).c_str());
    out << cell;
    for (std::size_t p = 0; p < kNumEmotions; ++p) {
      std::snprintf(cell, sizeof cell, "%*zu", static_cast<int>(width), m.confusion[t][p]);
      out << cell;
    }
    out << "\n";
  }

  out << "\nper-class accuracy\n";
  for (std::size_t c = 0; c < kNumEmotions; ++c) {
    out << kEmotionNames[c] << " ";
    if (m.per_class[c])
      out << format_accuracy(*m.per_class[c]) << " (" << m.class_counts[c] << ")\n";
    else
      out << "n/a (0)\n";
  }
  if (!m.failures.empty()) {
    out << "\nfailed images\n";
    for (const auto& f : m.failures) out << f.sample << ": " << f.message << "\n";
  }
  return out.str();
}

}  // namespace fer
