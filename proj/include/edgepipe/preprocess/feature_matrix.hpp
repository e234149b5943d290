#pragma once

#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edgepipe/common/matrix.hpp"

namespace edgepipe {

// Numeric model input with named, ordered columns. row_ids carries the
// identity of each row (sample_id, or the source row number).
struct FeatureMatrix {
  std::vector<std::string> column_names;
  Matrix values;
  std::vector<std::string> row_ids;
  std::string id_column = "id";
  std::string provenance;

  std::size_t rows() const { return values.rows(); }
  std::size_t cols() const { return values.cols(); }
  // Throws std::out_of_range for an unknown name.
  std::size_t column_index(std::string_view name) const;

  FeatureMatrix select_rows(std::span<const std::size_t> indices) const;
  FeatureMatrix select_columns(const std::vector<std::string>& names) const;

  // Header "<id_column>,<columns...>", numbers in round-trip form.
  void write_csv(std::ostream& out) const;
};

// Per-column standardization. Columns with zero spread keep scale 1.
struct ZScoreScaler {
  std::vector<double> mean;
  std::vector<double> scale;

  static ZScoreScaler fit(const Matrix& x);
  void apply(Matrix& x) const;
};

}  // namespace edgepipe
