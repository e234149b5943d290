#pragma once

#include <cstddef>
#include <vector>

namespace edgepipe {

// Class 1 is the positive (anomaly) class.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

enum class Averaging { binary, weighted };

struct Scores {
  ConfusionMatrix cm;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // A score whose denominator was zero is reported as 0 and flagged here.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred);

// acc = (TP+TN)/(TP+TN+FP+FN), prec = TP/(TP+FP), rec = TP/(TP+FN),
// f1 = 2 prec rec / (prec + rec).
Scores scores_from_confusion(const ConfusionMatrix& cm);

// Binary follows the formulas above. Weighted averages per-class
// precision/recall/f1 (each class taken as positive in turn) by support.
// Throws std::invalid_argument on a length mismatch or a non-0/1 label.
Scores evaluate(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                Averaging averaging = Averaging::binary);

}  // namespace edgepipe
