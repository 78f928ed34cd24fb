#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "veml/binary_io.hpp"
#include "veml/ids.hpp"

namespace veml {

struct DataVersion;

// Row-major n x d float32 matrix.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t n, std::size_t d) : rows(n), cols(d), values(n * d, 0.0f) {}
  static EmbeddingMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::span<const float> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  std::span<float> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  float at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;
};

// Binds matrix rows to the sample ids of one data version.
struct EmbeddingManifest {
  std::optional<VersionId> data_version_id;
  std::string embedder_tag;
  std::vector<std::pair<SampleId, std::uint64_t>> rows;  // (sample_id, row_index)

  friend bool operator==(const EmbeddingManifest&, const EmbeddingManifest&) = default;
};

struct Embeddings {
  EmbeddingMatrix matrix;
  EmbeddingManifest manifest;

  // Sample id of each row, indexed by row.
  std::vector<SampleId> samples_by_row() const;
};

// .vemb interchange format, all integers little-endian:
//   "VEMB" | format_version u32 | n u64 | d u32 | dtype u8 (1 = float32)
//   | tag_len u16 | embedder_tag | manifest_len u64 | manifest | n*d float32
// The manifest is UTF-8 lines "sample_id\trow_index\n". An optional first
// line "#data_version_id\t<id>\n" names the bound data version.
inline constexpr std::uint32_t kVembFormatVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 1;
inline constexpr std::size_t kVembFixedHeaderBytes = 4 + 4 + 8 + 4 + 1 + 2 + 8;

// Throws on any violated invariant (empty, non-finite, broken bijection).
void validate(const EmbeddingMatrix& matrix, const EmbeddingManifest& manifest);

Blob encode_embeddings(const EmbeddingMatrix& matrix, const EmbeddingManifest& manifest);
Embeddings decode_embeddings(std::span<const std::uint8_t> bytes);

void write_embeddings(const EmbeddingMatrix& matrix, const EmbeddingManifest& manifest,
                      const std::string& path);
Embeddings read_embeddings(const std::string& path);

// The manifest must list exactly the version's samples.
void check_covers_version(const EmbeddingManifest& manifest, const DataVersion& version);

struct GaussianCluster {
  std::vector<double> mean;
  double sigma = 1.0;
};

// Deterministic stand-in embedder: sample i of the version (ascending id) is
// drawn from cluster i mod C as mean + sigma * N(0, I).
Embeddings synth_embed(const DataVersion& version, std::size_t dim, std::uint64_t seed,
                       std::span<const GaussianCluster> clusters);

// Same generator without a version: rows are bound to sample ids 0..n-1.
EmbeddingMatrix synth_matrix(std::size_t n, std::size_t dim, std::uint64_t seed,
                             std::span<const GaussianCluster> clusters);

}  // namespace veml
