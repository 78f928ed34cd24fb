#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "veml/coreset.hpp"
#include "veml/embedding_io.hpp"
#include "veml/gromov_wasserstein.hpp"

namespace veml {

enum class SimilarityMetric { coreset_euclidean, fulldata_euclidean, coreset_gw };

std::string_view to_string(SimilarityMetric metric) noexcept;
// Accepts the CLI spellings "coreset", "full", "gw" and the enum names.
SimilarityMetric parse_similarity_metric(std::string_view name);

struct DistanceOptions {
  bool l2_normalize = false;  // normalize each row before measuring
};

// Above this many pairs fulldata_distance refuses to run.
inline constexpr std::uint64_t kFullDataPairCap = 10'000'000;

// kA x kB Euclidean distances between center vectors, row-major.
std::vector<double> pairwise_distances(const EmbeddingMatrix& a, const EmbeddingMatrix& b,
                                       const DistanceOptions& options = {});

// Mean over all center pairs. Requires equal embedder tag and dimension.
double coreset_distance(const CoreSet& a, const CoreSet& b, const DistanceOptions& options = {});

// Mean over all row pairs of two full matrices.
double fulldata_distance(const EmbeddingMatrix& a, const EmbeddingMatrix& b,
                         const DistanceOptions& options = {});
double fulldata_distance(const Embeddings& a, const Embeddings& b, const DistanceOptions& options = {});

struct NamedCoreSet {
  std::string dataset_id;
  CoreSet core;
};

struct NamedEmbeddings {
  std::string dataset_id;
  Embeddings embeddings;
};

// Symmetric, zero-diagonal matrix of dataset distances.
struct SimilarityMatrix {
  std::vector<std::string> dataset_ids;
  std::vector<double> values;  // n x n row-major
  SimilarityMetric metric = SimilarityMetric::coreset_euclidean;

  std::size_t size() const noexcept { return dataset_ids.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
};

SimilarityMatrix similarity_matrix(std::span<const NamedCoreSet> datasets, SimilarityMetric metric,
                                   const GwParams& gw = {}, const DistanceOptions& options = {});
SimilarityMatrix similarity_matrix(std::span<const NamedEmbeddings> datasets,
                                   const DistanceOptions& options = {});

struct RankedEntry {
  std::string dataset_id;
  double distance = 0.0;
  bool highly_similar = false;  // distance <= threshold
};

// Ascending by distance, then by dataset id.
std::vector<RankedEntry> rank_distances(std::vector<std::pair<std::string, double>> distances, double threshold);

// Distances from the target coreset to every registry entry, ranked.
// Euclidean requires matching embedder tags; GW accepts any.
std::vector<RankedEntry> rank_similar(const CoreSet& target, std::span<const NamedCoreSet> registry,
                                      SimilarityMetric metric, double threshold, const GwParams& gw = {},
                                      const DistanceOptions& options = {});

}  // namespace veml
