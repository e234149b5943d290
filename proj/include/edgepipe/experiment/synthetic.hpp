#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "edgepipe/preprocess/labeled.hpp"

namespace edgepipe {

// Imbalanced smart-home access log in the 13-column labeled schema.
//
// Exactly round(positive_rate * rows) events are anomalous. Most anomalies
// follow fixed category rules that never occur in normal traffic; the rest
// come from an "ambiguous" corner (one battery writing the same setpoint to
// a thermostat, identical rows) where only ambiguous_positive_share of the
// events are anomalous, so a model trained on the raw class balance calls
// the whole corner normal.
struct SyntheticLabeledOptions {
  std::size_t rows = 10000;
  double positive_rate = 0.02;
  double ambiguous_rate = 1.0 / 60.0;  // share of all rows in the corner
  double ambiguous_positive_share = 0.3;
  double null_rate = 0.01;  // value / accessedNodeType left empty
  std::uint64_t seed = 1;
};

// Rows are in timestamp order; ids are "row<N>". Throws
// std::invalid_argument when the positive budget cannot cover the
// ambiguous positives or rows < 10.
std::vector<LabeledEvent> synthetic_labeled(const SyntheticLabeledOptions& options);

}  // namespace edgepipe
