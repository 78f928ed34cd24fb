#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "veml/binary_io.hpp"
#include "veml/embedding_io.hpp"
#include "veml/ids.hpp"

namespace veml {

inline constexpr std::size_t kImageCoresetK = 10;
inline constexpr std::size_t kSpatiotemporalCoresetK = 100;
inline constexpr std::size_t kBruteForceMaxPoints = 15;
inline constexpr std::size_t kBruteForceMaxCenters = 4;

// k center rows of one embedding matrix and the radius of the balls around
// them that covers every row.
struct CoreSet {
  std::optional<VersionId> data_version_id;
  std::string embedder_tag;
  std::size_t k = 0;
  std::vector<std::size_t> center_indices;
  std::vector<SampleId> center_samples;  // parallel to center_indices; empty if rows are unbound
  EmbeddingMatrix center_vectors;
  double covering_radius = 0.0;
  std::uint64_t seed = 0;
  // Distance of center j (j >= 1) to the nearest of centers 0..j-1 at the
  // moment it was picked. Non-increasing for the greedy construction.
  std::vector<double> selection_radii;

  std::size_t dim() const noexcept { return center_vectors.cols; }
};

// Euclidean distance with double accumulation over float inputs.
double squared_distance(std::span<const float> a, std::span<const float> b) noexcept;
double euclidean_distance(std::span<const float> a, std::span<const float> b) noexcept;

// Row chosen as the first center for a seed: uniform over [0, n).
std::size_t initial_center(std::size_t n, std::uint64_t seed);

// Farthest-first traversal. Center 1 comes from the seed; every later
// center maximizes the distance to its nearest chosen center, ties going to
// the lowest row index. O(n*k*d) time, O(n) extra space.
CoreSet kcenter_greedy(const EmbeddingMatrix& matrix, std::size_t k, std::uint64_t seed);
CoreSet kcenter_greedy(const Embeddings& embeddings, std::size_t k, std::uint64_t seed);
// Same traversal with an explicit starting row.
CoreSet kcenter_greedy_from(const EmbeddingMatrix& matrix, std::size_t k, std::size_t first);

// max over rows of the distance to the closest listed center.
double covering_radius(const EmbeddingMatrix& matrix, std::span<const std::size_t> centers);

// Exact k-center optimum by enumerating all center subsets; only for n <= 15
// and k <= 4. Among optimal subsets the lexicographically smallest wins.
CoreSet kcenter_bruteforce(const EmbeddingMatrix& matrix, std::size_t k);

// k chosen as the dataset's class count, a common heuristic.
std::size_t k_from_class_count(std::size_t num_classes, std::size_t n);

// .vcore sidecar, little-endian:
//   "VCOR" | format_version u32 | k u64 | d u32 | dtype u8 (1) | tag_len u16 | tag
//   | has_version u8 | version u64 | seed u64 | covering_radius f64
//   | k x center_index u64 | has_samples u8 | [k x sample_id u64] | k*d float32
Blob encode_coreset(const CoreSet& core);
CoreSet decode_coreset(std::span<const std::uint8_t> bytes);
void write_coreset(const CoreSet& core, const std::string& path);
CoreSet read_coreset(const std::string& path);

}  // namespace veml
