#include "veml/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "veml/error.hpp"

namespace veml {

namespace {

std::vector<double> row_scales(const EmbeddingMatrix& m, bool normalize) {
  std::vector<double> s(m.rows, 1.0);
  if (!normalize) return s;
  for (std::size_t i = 0; i < m.rows; ++i) {
    double n2 = 0.0;
    for (float v : m.row(i)) n2 += static_cast<double>(v) * v;
    s[i] = n2 > 0 ? 1.0 / std::sqrt(n2) : 1.0;
  }
  return s;
}

double scaled_distance(std::span<const float> a, double sa, std::span<const float> b, double sb) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = sa * a[i] - sb * b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double mean_pairwise(const EmbeddingMatrix& a, const EmbeddingMatrix& b, const DistanceOptions& options) {
  if (a.cols != b.cols) {
    fail(ErrorCode::dimension_mismatch, "distance: dimensions differ (" + std::to_string(a.cols) + " vs " +
                                            std::to_string(b.cols) + ")");
  }
  if (a.rows == 0 || b.rows == 0) fail(ErrorCode::invalid_argument, "distance: empty matrix");
  // Sum in one canonical operand order so d(a, b) == d(b, a) bit for bit.
  if (std::tie(b.rows, b.values) < std::tie(a.rows, a.values)) return mean_pairwise(b, a, options);
  const auto sa = row_scales(a, options.l2_normalize);
  const auto sb = row_scales(b, options.l2_normalize);
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    double row_total = 0.0;
    for (std::size_t j = 0; j < b.rows; ++j) row_total += scaled_distance(a.row(i), sa[i], b.row(j), sb[j]);
    total += row_total;
  }
  return total / (static_cast<double>(a.rows) * static_cast<double>(b.rows));
}

void require_same_embedder(const std::string& a, const std::string& b) {
  if (a != b) fail(ErrorCode::embedder_mismatch, "embedder tags differ: '" + a + "' vs '" + b + "'");
}

double pair_distance(const CoreSet& a, const CoreSet& b, SimilarityMetric metric, const GwParams& gw,
                     const DistanceOptions& options) {
  switch (metric) {
    case SimilarityMetric::coreset_euclidean: return coreset_distance(a, b, options);
    case SimilarityMetric::coreset_gw: return gw_distance(a, b, gw);
    case SimilarityMetric::fulldata_euclidean: break;
  }
  fail(ErrorCode::invalid_argument, "full-data distance needs full embedding matrices, not coresets");
}

}  // namespace

std::string_view to_string(SimilarityMetric metric) noexcept {
  switch (metric) {
    case SimilarityMetric::coreset_euclidean: return "coreset_euclidean";
    case SimilarityMetric::fulldata_euclidean: return "fulldata_euclidean";
    case SimilarityMetric::coreset_gw: return "coreset_gw";
  }
  return "coreset_euclidean";
}

SimilarityMetric parse_similarity_metric(std::string_view name) {
  if (name == "coreset" || name == "coreset_euclidean") return SimilarityMetric::coreset_euclidean;
  if (name == "full" || name == "fulldata_euclidean") return SimilarityMetric::fulldata_euclidean;
  if (name == "gw" || name == "coreset_gw") return SimilarityMetric::coreset_gw;
  fail(ErrorCode::invalid_argument, "unknown metric '" + std::string(name) + "' (coreset|full|gw)");
}

std::vector<double> pairwise_distances(const EmbeddingMatrix& a, const EmbeddingMatrix& b,
                                       const DistanceOptions& options) {
  if (a.cols != b.cols) fail(ErrorCode::dimension_mismatch, "pairwise_distances: dimensions differ");
  const auto sa = row_scales(a, options.l2_normalize);
  const auto sb = row_scales(b, options.l2_normalize);
  std::vector<double> out(a.rows * b.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) out[i * b.rows + j] = scaled_distance(a.row(i), sa[i], b.row(j), sb[j]);
  return out;
}

double coreset_distance(const CoreSet& a, const CoreSet& b, const DistanceOptions& options) {
  require_same_embedder(a.embedder_tag, b.embedder_tag);
  return mean_pairwise(a.center_vectors, b.center_vectors, options);
}

double fulldata_distance(const EmbeddingMatrix& a, const EmbeddingMatrix& b, const DistanceOptions& options) {
  const auto pairs = static_cast<long double>(a.rows) * static_cast<long double>(b.rows);
  if (pairs > static_cast<long double>(kFullDataPairCap)) {
    fail(ErrorCode::too_large, "full-data distance over " + std::to_string(a.rows) + "x" + std::to_string(b.rows) +
                                   " pairs exceeds the 1e7 pair cap");
  }
  return mean_pairwise(a, b, options);
}

double fulldata_distance(const Embeddings& a, const Embeddings& b, const DistanceOptions& options) {
  require_same_embedder(a.manifest.embedder_tag, b.manifest.embedder_tag);
  return fulldata_distance(a.matrix, b.matrix, options);
}

SimilarityMatrix similarity_matrix(std::span<const NamedCoreSet> datasets, SimilarityMetric metric,
                                   const GwParams& gw, const DistanceOptions& options) {
  SimilarityMatrix m;
  m.metric = metric;
  const std::size_t n = datasets.size();
  for (const auto& d : datasets) m.dataset_ids.push_back(d.dataset_id);
  m.values.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = pair_distance(datasets[i].core, datasets[j].core, metric, gw, options);
      m.values[i * n + j] = m.values[j * n + i] = d;
    }
  return m;
}

SimilarityMatrix similarity_matrix(std::span<const NamedEmbeddings> datasets, const DistanceOptions& options) {
  SimilarityMatrix m;
  m.metric = SimilarityMetric::fulldata_euclidean;
  const std::size_t n = datasets.size();
  for (const auto& d : datasets) m.dataset_ids.push_back(d.dataset_id);
  m.values.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = fulldata_distance(datasets[i].embeddings, datasets[j].embeddings, options);
      m.values[i * n + j] = m.values[j * n + i] = d;
    }
  return m;
}

std::vector<RankedEntry> rank_distances(std::vector<std::pair<std::string, double>> distances, double threshold) {
  if (distances.empty()) fail(ErrorCode::invalid_argument, "rank_similar: empty registry");
  std::vector<RankedEntry> out;
  out.reserve(distances.size());
  for (auto& [id, d] : distances) {
    if (!std::isfinite(d) || d < 0) fail(ErrorCode::non_finite, "rank_similar: invalid distance for " + id);
    out.push_back({std::move(id), d, d <= threshold});
  }
  std::sort(out.begin(), out.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.dataset_id < b.dataset_id;
  });
  return out;
}

std::vector<RankedEntry> rank_similar(const CoreSet& target, std::span<const NamedCoreSet> registry,
                                      SimilarityMetric metric, double threshold, const GwParams& gw,
                                      const DistanceOptions& options) {
  if (registry.empty()) fail(ErrorCode::invalid_argument, "rank_similar: empty registry");
  std::vector<std::pair<std::string, double>> distances;
  for (const auto& entry : registry) {
    distances.emplace_back(entry.dataset_id, pair_distance(target, entry.core, metric, gw, options));
  }
  return rank_distances(std::move(distances), threshold);
}

}  // namespace veml
