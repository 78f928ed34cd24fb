#pragma once

#include <optional>
#include <string>
#include <vector>

#include "veml/drift.hpp"
#include "veml/similarity.hpp"

namespace veml::cli {

enum class ReportStyle { triangular_distance, drift_matrix, label_cost };

struct ReportTable {
  std::string title;
  ReportStyle style = ReportStyle::triangular_distance;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
  // Title line plus space-padded columns.
  std::string to_text() const;
};

std::string fixed2(double value);

// Lower triangle with a blank diagonal; `full` also fills the upper half.
ReportTable distance_table(const SimilarityMatrix& m, bool full = false);

// Rows are training versions, columns testing versions. A missing report
// (for instance a version against itself) leaves the cell blank.
struct DriftRow {
  std::string train;
  double covering_radius = 0.0;
  std::vector<std::optional<DriftReport>> cells;
};
ReportTable drift_table(const std::vector<std::string>& test_names, const std::vector<DriftRow>& rows,
                        std::size_t k);

struct LabelCostRow {
  std::string method;  // no_retraining, full_training, transfer_learning, active_learning
  std::optional<std::size_t> labels;
  std::optional<double> ratio;
  std::optional<double> accuracy;
  std::optional<double> training_minutes;
};
ReportTable label_cost_table(const std::vector<LabelCostRow>& rows);

}  // namespace veml::cli
