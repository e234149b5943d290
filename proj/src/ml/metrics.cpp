#include "edgepipe/ml/metrics.hpp"

#include <stdexcept>

namespace edgepipe {

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("evaluate: length mismatch");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if ((t != 0 && t != 1) || (p != 0 && p != 1)) throw std::invalid_argument("evaluate: labels must be 0 or 1");
    if (t == 1 && p == 1) ++cm.tp;
    else if (t == 0 && p == 0) ++cm.tn;
    else if (t == 0) ++cm.fp;
    else ++cm.fn;
  }
  return cm;
}

Scores scores_from_confusion(const ConfusionMatrix& cm) {
  Scores s;
  s.cm = cm;
  const auto tp = static_cast<double>(cm.tp);
  const auto tn = static_cast<double>(cm.tn);
  const auto fp = static_cast<double>(cm.fp);
  const auto fn = static_cast<double>(cm.fn);
  const double n = tp + tn + fp + fn;
  s.accuracy = n > 0 ? (tp + tn) / n : 0.0;
  if (tp + fp > 0) s.precision = tp / (tp + fp);
  else s.precision_undefined = true;
  if (tp + fn > 0) s.recall = tp / (tp + fn);
  else s.recall_undefined = true;
  if (s.precision + s.recall > 0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  else s.f1_undefined = true;
  return s;
}

Scores evaluate(const std::vector<int>& y_true, const std::vector<int>& y_pred, Averaging averaging) {
  const ConfusionMatrix cm = confusion(y_true, y_pred);
  Scores s = scores_from_confusion(cm);
  if (averaging == Averaging::binary) return s;

  // Class 0 as positive swaps the roles of the cells.
  const ConfusionMatrix flipped{cm.tn, cm.tp, cm.fn, cm.fp};
  const Scores s0 = scores_from_confusion(flipped);
  const double n = static_cast<double>(cm.total());
  const double w1 = n > 0 ? static_cast<double>(cm.tp + cm.fn) / n : 0.0;
  const double w0 = n > 0 ? static_cast<double>(cm.tn + cm.fp) / n : 0.0;
  s.precision = w0 * s0.precision + w1 * s.precision;
  s.recall = w0 * s0.recall + w1 * s.recall;
  s.f1 = w0 * s0.f1 + w1 * s.f1;
  s.precision_undefined = s.precision_undefined || s0.precision_undefined;
  s.recall_undefined = s.recall_undefined || s0.recall_undefined;
  s.f1_undefined = s.f1_undefined || s0.f1_undefined;
  return s;
}

}  // namespace edgepipe
