#include "veml/embedding_io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "portable_random.hpp"
#include "veml/error.hpp"
#include "veml/version_store.hpp"

namespace veml {

namespace {

constexpr char kMagic[4] = {'V', 'E', 'M', 'B'};
constexpr std::string_view kVersionDirective = "#data_version_id\t";

std::uint64_t parse_u64(std::string_view s, const char* what) {
  if (s.empty()) fail(ErrorCode::format_error, std::string("vemb manifest: empty ") + what);
  std::uint64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') fail(ErrorCode::format_error, std::string("vemb manifest: bad ") + what);
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return v;
}

std::string manifest_text(const EmbeddingManifest& m) {
  std::ostringstream os;
  if (m.data_version_id) os << kVersionDirective << m.data_version_id->value << '\n';
  auto rows = m.rows;
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  for (const auto& [sample, row] : rows) os << sample.value << '\t' << row << '\n';
  return os.str();
}

void parse_manifest(std::string_view text, EmbeddingManifest& m) {
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) fail(ErrorCode::format_error, "vemb manifest: missing trailing newline");
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (first && line.starts_with(kVersionDirective)) {
      m.data_version_id = VersionId{parse_u64(line.substr(kVersionDirective.size()), "data version id")};
      first = false;
      continue;
    }
    first = false;
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) fail(ErrorCode::format_error, "vemb manifest: line without tab");
    m.rows.emplace_back(SampleId{parse_u64(line.substr(0, tab), "sample id")},
                        parse_u64(line.substr(tab + 1), "row index"));
  }
}

}  // namespace

EmbeddingMatrix EmbeddingMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  EmbeddingMatrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols) fail(ErrorCode::dimension_mismatch, "from_rows: ragged rows");
    for (std::size_t j = 0; j < m.cols; ++j) m.values[i * m.cols + j] = static_cast<float>(rows[i][j]);
  }
  return m;
}

std::vector<SampleId> Embeddings::samples_by_row() const {
  std::vector<SampleId> out(matrix.rows);
  for (const auto& [sample, row] : manifest.rows) out.at(row) = sample;
  return out;
}

void validate(const EmbeddingMatrix& matrix, const EmbeddingManifest& manifest) {
  if (matrix.rows < 1 || matrix.cols < 1) fail(ErrorCode::invalid_argument, "embedding matrix must be at least 1x1");
  if (matrix.values.size() != matrix.rows * matrix.cols) {
    fail(ErrorCode::dimension_mismatch, "embedding matrix storage disagrees with its shape");
  }
  if (matrix.cols > 0xFFFFFFFFu) fail(ErrorCode::too_large, "embedding dimension exceeds u32");
  for (std::size_t i = 0; i < matrix.values.size(); ++i) {
    if (!std::isfinite(matrix.values[i])) {
      fail(ErrorCode::non_finite, "non-finite embedding value at row " + std::to_string(i / matrix.cols));
    }
  }
  if (manifest.embedder_tag.empty()) fail(ErrorCode::invalid_argument, "embedder_tag must be non-empty");
  if (manifest.embedder_tag.size() > 0xFFFF) fail(ErrorCode::invalid_argument, "embedder_tag too long");
  if (manifest.rows.size() != matrix.rows) {
    fail(ErrorCode::row_count_mismatch, "manifest lists " + std::to_string(manifest.rows.size()) +
                                            " rows but matrix has " + std::to_string(matrix.rows));
  }
  std::vector<bool> row_seen(matrix.rows, false);
  std::unordered_set<std::uint64_t> samples;
  for (const auto& [sample, row] : manifest.rows) {
    if (row >= matrix.rows || row_seen[row]) {
      fail(ErrorCode::row_count_mismatch, "manifest row index " + std::to_string(row) + " out of range or repeated");
    }
    row_seen[row] = true;
    if (!samples.insert(sample.value).second) {
      fail(ErrorCode::duplicate_id, "manifest lists sample " + std::to_string(sample.value) + " twice");
    }
  }
}

Blob encode_embeddings(const EmbeddingMatrix& matrix, const EmbeddingManifest& manifest) {
  validate(matrix, manifest);
  const auto text = manifest_text(manifest);
  ByteWriter w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kVembFormatVersion);
  w.u64(matrix.rows);
  w.u32(static_cast<std::uint32_t>(matrix.cols));
  w.u8(kDtypeFloat32);
  w.u16(static_cast<std::uint16_t>(manifest.embedder_tag.size()));
  w.text(manifest.embedder_tag);
  w.u64(text.size());
  w.text(text);
  for (float v : matrix.values) w.f32(v);
  return w.take();
}

Embeddings decode_embeddings(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "vemb");
  for (char c : kMagic) {
    if (r.u8() != static_cast<std::uint8_t>(c)) fail(ErrorCode::format_error, "vemb: bad magic");
  }
  if (const auto v = r.u32(); v != kVembFormatVersion) {
    fail(ErrorCode::format_error, "vemb: unsupported format version " + std::to_string(v));
  }
  const std::uint64_t n = r.u64();
  const std::uint32_t d = r.u32();
  if (const auto dtype = r.u8(); dtype != kDtypeFloat32) {
    fail(ErrorCode::format_error, "vemb: unsupported dtype code " + std::to_string(dtype));
  }
  Embeddings out;
  out.manifest.embedder_tag = r.text(r.u16());
  const std::uint64_t manifest_len = r.u64();
  if (manifest_len > r.remaining()) fail(ErrorCode::format_error, "vemb: truncated manifest");
  parse_manifest(r.text(manifest_len), out.manifest);

  if (n == 0 || d == 0) fail(ErrorCode::format_error, "vemb: empty matrix");
  if (out.manifest.rows.size() != n) {
    fail(ErrorCode::row_count_mismatch, "vemb: header declares " + std::to_string(n) + " rows, manifest lists " +
                                            std::to_string(out.manifest.rows.size()));
  }
  if (n > r.remaining() / 4 / d) fail(ErrorCode::format_error, "vemb: truncated payload");
  out.matrix = EmbeddingMatrix(n, d);
  for (auto& v : out.matrix.values) v = r.f32();
  if (!r.at_end()) fail(ErrorCode::format_error, "vemb: trailing bytes after payload");
  validate(out.matrix, out.manifest);
  return out;
}

void write_embeddings(const EmbeddingMatrix& matrix, const EmbeddingManifest& manifest,
                      const std::string& path) {
  write_file_atomic(path, encode_embeddings(matrix, manifest));
}

Embeddings read_embeddings(const std::string& path) { return decode_embeddings(read_file(path)); }

void check_covers_version(const EmbeddingManifest& manifest, const DataVersion& version) {
  if (manifest.rows.size() != version.size()) {
    fail(ErrorCode::row_count_mismatch, "embeddings cover " + std::to_string(manifest.rows.size()) +
                                            " samples, version " + std::to_string(version.id.value) + " has " +
                                            std::to_string(version.size()));
  }
  for (const auto& [sample, row] : manifest.rows) {
    if (!version.contains(sample)) {
      fail(ErrorCode::not_found, "embedding sample " + std::to_string(sample.value) + " is not in version " +
                                     std::to_string(version.id.value));
    }
  }
}

EmbeddingMatrix synth_matrix(std::size_t n, std::size_t dim, std::uint64_t seed,
                             std::span<const GaussianCluster> clusters) {
  if (clusters.empty()) fail(ErrorCode::invalid_argument, "synth_embed: empty cluster spec");
  if (dim == 0 || n == 0) fail(ErrorCode::invalid_argument, "synth_embed: n and d must be positive");
  for (const auto& c : clusters) {
    if (c.sigma < 0 || !std::isfinite(c.sigma)) fail(ErrorCode::invalid_argument, "synth_embed: sigma must be >= 0");
    if (c.mean.size() != dim) fail(ErrorCode::dimension_mismatch, "synth_embed: cluster mean has wrong dimension");
  }
  detail::NormalSampler normal(seed);
  EmbeddingMatrix m(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = clusters[i % clusters.size()];
    auto row = m.row(i);
    for (std::size_t j = 0; j < dim; ++j) row[j] = static_cast<float>(c.mean[j] + c.sigma * normal());
  }
  return m;
}

Embeddings synth_embed(const DataVersion& version, std::size_t dim, std::uint64_t seed,
                       std::span<const GaussianCluster> clusters) {
  Embeddings out;
  out.matrix = synth_matrix(version.size(), dim, seed, clusters);
  out.manifest.data_version_id = version.id;
  out.manifest.embedder_tag = "synth-gaussian:d=" + std::to_string(dim);
  for (std::size_t i = 0; i < version.size(); ++i) out.manifest.rows.emplace_back(version.sample_ids[i], i);
  return out;
}

}  // namespace veml
