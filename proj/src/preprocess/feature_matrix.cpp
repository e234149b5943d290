#include "edgepipe/preprocess/feature_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "edgepipe/common/csv.hpp"

namespace edgepipe {

std::size_t FeatureMatrix::column_index(std::string_view name) const {
  auto it = std::find(column_names.begin(), column_names.end(), name);
  if (it == column_names.end()) throw std::out_of_range("no feature column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - column_names.begin());
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
  FeatureMatrix out;
  out.column_names = column_names;
  out.id_column = id_column;
  out.provenance = provenance;
  out.values = values.select_rows(indices);
  out.row_ids.reserve(indices.size());
  for (auto i : indices) out.row_ids.push_back(row_ids.at(i));
  return out;
}

FeatureMatrix FeatureMatrix::select_columns(const std::vector<std::string>& names) const {
  std::vector<std::size_t> idx;
  for (const auto& n : names) idx.push_back(column_index(n));
  FeatureMatrix out;
  out.column_names = names;
  out.id_column = id_column;
  out.provenance = provenance;
  out.row_ids = row_ids;
  out.values = Matrix(rows(), names.size());
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c = 0; c < idx.size(); ++c) out.values(r, c) = values(r, idx[c]);
  }
  return out;
}

void FeatureMatrix::write_csv(std::ostream& out) const {
  std::vector<std::string> fields{id_column};
  fields.insert(fields.end(), column_names.begin(), column_names.end());
  write_csv_row(out, fields);
  for (std::size_t r = 0; r < rows(); ++r) {
    fields.assign(1, r < row_ids.size() ? row_ids[r] : std::to_string(r));
    for (std::size_t c = 0; c < cols(); ++c) fields.push_back(format_double(values(r, c)));
    write_csv_row(out, fields);
  }
}

ZScoreScaler ZScoreScaler::fit(const Matrix& x) {
  ZScoreScaler s;
  s.mean.assign(x.cols(), 0.0);
  s.scale.assign(x.cols(), 1.0);
  if (x.rows() == 0) return s;
  const double n = static_cast<double>(x.rows());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) sum += x(r, c);
    const double m = sum / n;
    double ss = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) ss += (x(r, c) - m) * (x(r, c) - m);
    const double sd = std::sqrt(ss / n);
    s.mean[c] = m;
    s.scale[c] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

void ZScoreScaler::apply(Matrix& x) const {
  if (x.cols() != mean.size()) throw std::invalid_argument("z-score: column count mismatch");
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) x(r, c) = (x(r, c) - mean[c]) / scale[c];
  }
}

}  // namespace edgepipe
