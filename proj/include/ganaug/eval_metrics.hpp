#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ganaug/csv.hpp"
#include "ganaug/error.hpp"
#include "ganaug/tensor.hpp"

namespace ganaug {

// K x K counts, rows = true class, columns = predicted class.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<long long> counts;

  explicit ConfusionMatrix(int k = 0)
      : num_classes(k), counts(static_cast<std::size_t>(k) * k, 0) {}

  long long& at(int truth, int pred) {
    return counts[static_cast<std::size_t>(truth) * num_classes + pred];
  }
  long long at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * num_classes + pred];
  }
  long long row_sum(int truth) const {
    long long total = 0;
    for (int p = 0; p < num_classes; ++p) total += at(truth, p);
    return total;
  }
  long long total() const {
    long long t = 0;
    for (long long v : counts) t += v;
    return t;
  }
  long long trace() const {
    long long t = 0;
    for (int i = 0; i < num_classes; ++i) t += at(i, i);
    return t;
  }
};

inline ConfusionMatrix confusion_matrix(const std::vector<int>& truth,
                                        const std::vector<int>& pred, int num_classes) {
  require(truth.size() == pred.size(), ErrorKind::ShapeMismatch,
          "confusion_matrix label count mismatch");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i] >= 0 && truth[i] < num_classes, ErrorKind::LabelOutOfRange,
            "true label " + std::to_string(truth[i]) + " outside [0," +
                std::to_string(num_classes) + ")");
    require(pred[i] >= 0 && pred[i] < num_classes, ErrorKind::LabelOutOfRange,
            "predicted label " + std::to_string(pred[i]) + " outside [0," +
                std::to_string(num_classes) + ")");
    ++cm.at(truth[i], pred[i]);
  }
  return cm;
}

struct AccuracyReport {
  std::vector<double> per_class;  // NaN marks a class with no samples
  double overall = 0.0;
};

inline AccuracyReport per_class_accuracy(const ConfusionMatrix& cm) {
  require(cm.num_classes >= 1, ErrorKind::ShapeMismatch, "empty confusion matrix");
  AccuracyReport report;
  for (int t = 0; t < cm.num_classes; ++t) {
    long long row = cm.row_sum(t);
    report.per_class.push_back(row == 0 ? std::numeric_limits<double>::quiet_NaN()
                                        : static_cast<double>(cm.at(t, t)) /
                                              static_cast<double>(row));
  }
  long long total = cm.total();
  report.overall =
      total == 0 ? 0.0 : static_cast<double>(cm.trace()) / static_cast<double>(total);
  return report;
}

// ---------------------------------------------------------------------------
// one-vs-rest ROC

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;  // starts at (0,0), ends at (1,1)
  double auc = 0.0;
};

// Threshold sweep over unique score values in descending order; tied scores
// advance TP/FP together, AUC by the trapezoid rule.
inline RocCurve roc_curve(const Tensor& scores, const std::vector<int>& truth,
                          int positive_class) {
  require(scores.rank() == 2, ErrorKind::ShapeMismatch,
          "roc_curve expects [N,K] scores, got " + detail::shape_str(scores.shape()));
  const int n = scores.dim(0), k = scores.dim(1);
  require(static_cast<int>(truth.size()) == n, ErrorKind::ShapeMismatch,
          "roc_curve label count mismatch");
  require(positive_class >= 0 && positive_class < k, ErrorKind::LabelOutOfRange,
          "positive class out of range");

  std::vector<std::pair<float, bool>> ranked;  // (score, is_positive)
  long long pos = 0, neg = 0;
  for (int i = 0; i < n; ++i) {
    bool is_pos = truth[static_cast<std::size_t>(i)] == positive_class;
    ranked.emplace_back(scores.raw()[static_cast<std::size_t>(i) * k + positive_class], is_pos);
    (is_pos ? pos : neg)++;
  }
  require(pos > 0 && neg > 0, ErrorKind::DegenerateClass,
          "roc_curve needs at least one positive and one negative sample");
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  long long tp = 0, fp = 0;
  double auc = 0.0;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  std::size_t i = 0;
  while (i < ranked.size()) {
    float threshold = ranked[i].first;
    while (i < ranked.size() && ranked[i].first == threshold) {
      (ranked[i].second ? tp : fp)++;
      ++i;
    }
    double fpr = static_cast<double>(fp) / static_cast<double>(neg);
    double tpr = static_cast<double>(tp) / static_cast<double>(pos);
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    curve.points.push_back({static_cast<double>(threshold), fpr, tpr});
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  curve.auc = auc;
  return curve;
}

inline double macro_auc(const std::vector<RocCurve>& curves) {
  require(!curves.empty(), ErrorKind::DegenerateClass, "macro_auc over zero curves");
  double total = 0.0;
  for (const auto& c : curves) total += c.auc;
  return total / static_cast<double>(curves.size());
}

// ---------------------------------------------------------------------------
// report files

inline void write_confusion_csv(const ConfusionMatrix& cm,
                                const std::vector<std::string>& class_names,
                                const std::string& path) {
  CsvTable table;
  table.header = {"true_class"};
  for (const auto& name : class_names) table.header.push_back(name);
  for (int t = 0; t < cm.num_classes; ++t) {
    std::vector<std::string> row{class_names[static_cast<std::size_t>(t)]};
    for (int p = 0; p < cm.num_classes; ++p) row.push_back(csv_int(cm.at(t, p)));
    table.rows.push_back(std::move(row));
  }
  table.write(path);
}

inline void write_roc_csv(const RocCurve& curve, const std::string& path) {
  CsvTable table;
  table.header = {"threshold", "fpr", "tpr"};
  for (const auto& p : curve.points)
    table.rows.push_back({csv_float(p.threshold), csv_float(p.fpr), csv_float(p.tpr)});
  table.write(path);
}

inline void write_summary_csv(const std::vector<std::string>& class_names,
                              const AccuracyReport& acc, const std::vector<RocCurve>& curves,
                              const std::string& path) {
  CsvTable table;
  table.header = {"class", "accuracy", "auc"};
  for (std::size_t c = 0; c < class_names.size(); ++c)
    table.rows.push_back(
        {class_names[c], csv_float(acc.per_class[c]), csv_float(curves[c].auc)});
  table.rows.push_back({"overall", csv_float(acc.overall), csv_float(macro_auc(curves))});
  table.write(path);
}

}  // namespace ganaug
