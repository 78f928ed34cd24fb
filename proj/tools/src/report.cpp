#include "veml_cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace veml::cli {

namespace {

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::string method_label(const std::string& m) {
  if (m == "no_retraining") return "No retraining";
  if (m == "full_training") return "Full training";
  if (m == "transfer_learning") return "Transfer learning";
  if (m == "active_learning") return "Active learning";
  return m;
}

}  // namespace

std::string fixed2(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  std::string s = buf;
  return s == "-0.00" ? "0.00" : s;
}

std::string ReportTable::to_csv() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_cell(cells[i]);
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

std::string ReportTable::to_text() const {
  std::vector<std::size_t> width(header.size(), 0);
  auto measure = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size() && i < width.size(); ++i) width[i] = std::max(width[i], cells[i].size());
  };
  measure(header);
  for (const auto& r : rows) measure(r);
  std::string out = title.empty() ? "" : title + "\n";
  auto line = [&](const std::vector<std::string>& cells) {
    std::string l;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) l += "  ";
      l += cells[i];
      if (i + 1 < cells.size()) l.append(width[i] - cells[i].size(), ' ');
    }
    out += l + "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

ReportTable distance_table(const SimilarityMatrix& m, bool full) {
  ReportTable t;
  t.title = std::string("Dataset distances (") + std::string(to_string(m.metric)) + ")";
  t.style = ReportStyle::triangular_distance;
  t.header.push_back("dataset");
  for (const auto& id : m.dataset_ids) t.header.push_back(id);
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::vector<std::string> row{m.dataset_ids[i]};
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (i == j || (j > i && !full)) row.emplace_back();
      else row.push_back(fixed2(m.at(i, j)));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

ReportTable drift_table(const std::vector<std::string>& test_names, const std::vector<DriftRow>& rows,
                        std::size_t k) {
  ReportTable t;
  t.title = "Data distribution comparison (rows train, columns test)";
  t.style = ReportStyle::drift_matrix;
  t.header = {"data_version", "covering_radius_k" + std::to_string(k)};
  t.header.insert(t.header.end(), test_names.begin(), test_names.end());
  for (const auto& r : rows) {
    std::vector<std::string> row{r.train, fixed2(r.covering_radius)};
    for (const auto& cell : r.cells) {
      if (!cell) {
        row.emplace_back();
        continue;
      }
      // (+) not covered, (-) covered
      row.push_back(fixed2(cell->mean_nearest_distance) + (cell->mismatch ? " (+)" : " (-)"));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

ReportTable label_cost_table(const std::vector<LabelCostRow>& rows) {
  ReportTable t;
  t.title = "Model retraining cost";
  t.style = ReportStyle::label_cost;
  t.header = {"method", "labeled_data_needed", "testing_accuracy", "training_time_minutes"};
  for (const auto& r : rows) {
    std::string labels = "-";
    if (r.labels) {
      labels = std::to_string(*r.labels);
      if (r.ratio) labels += " (" + std::to_string(static_cast<int>(std::lround(*r.ratio * 100))) + "% data points)";
    }
    t.rows.push_back({method_label(r.method), labels, r.accuracy ? fixed2(*r.accuracy) : "-",
                      r.training_minutes ? fixed2(*r.training_minutes) : "-"});
  }
  return t;
}

}  // namespace veml::cli
