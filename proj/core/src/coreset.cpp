#include "veml/coreset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "portable_random.hpp"
#include "veml/error.hpp"

namespace veml {

namespace {

constexpr char kMagic[4] = {'V', 'C', 'O', 'R'};
constexpr std::uint32_t kFormatVersion = 1;

void check_finite(const EmbeddingMatrix& m) {
  if (m.rows == 0 || m.cols == 0) fail(ErrorCode::invalid_argument, "k-center: empty matrix");
  for (float v : m.values) {
    if (!std::isfinite(v)) fail(ErrorCode::non_finite, "k-center: non-finite input");
  }
}

void gather_centers(const EmbeddingMatrix& m, CoreSet& core) {
  core.k = core.center_indices.size();
  core.center_vectors = EmbeddingMatrix(core.k, m.cols);
  for (std::size_t j = 0; j < core.k; ++j) {
    auto src = m.row(core.center_indices[j]);
    std::copy(src.begin(), src.end(), core.center_vectors.row(j).begin());
  }
}

}  // namespace

double squared_distance(std::span<const float> a, std::span<const float> b) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += diff * diff;
  }
  return acc;
}

double euclidean_distance(std::span<const float> a, std::span<const float> b) noexcept {
  return std::sqrt(squared_distance(a, b));
}

std::size_t initial_center(std::size_t n, std::uint64_t seed) {
  if (n == 0) fail(ErrorCode::invalid_argument, "k-center: empty matrix");
  std::mt19937_64 rng(seed);
  return static_cast<std::size_t>(detail::uniform_below(rng, n));
}

CoreSet kcenter_greedy_from(const EmbeddingMatrix& matrix, std::size_t k, std::size_t first) {
  check_finite(matrix);
  const std::size_t n = matrix.rows;
  if (k == 0) fail(ErrorCode::invalid_argument, "k-center: k must be at least 1");
  if (k > n) fail(ErrorCode::invalid_argument, "k-center: k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
  if (first >= n) fail(ErrorCode::invalid_argument, "k-center: first center out of range");

  CoreSet core;
  core.center_indices.reserve(k);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);

  std::size_t next = first;
  for (std::size_t j = 0;; ++j) {
    core.center_indices.push_back(next);
    chosen[next] = true;
    const auto center = matrix.row(next);
    for (std::size_t i = 0; i < n; ++i) {
      const double d2 = squared_distance(matrix.row(i), center);
      if (d2 < nearest[i]) nearest[i] = d2;
    }
    if (j + 1 == k) break;
    // argmax over unchosen rows; strict '>' keeps the lowest index on ties.
    std::size_t best = n;
    double best_d2 = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!chosen[i] && nearest[i] > best_d2) {
        best_d2 = nearest[i];
        best = i;
      }
    }
    core.selection_radii.push_back(std::sqrt(best_d2));
    next = best;
  }
  core.covering_radius = std::sqrt(*std::max_element(nearest.begin(), nearest.end()));
  gather_centers(matrix, core);
  return core;
}

CoreSet kcenter_greedy(const EmbeddingMatrix& matrix, std::size_t k, std::uint64_t seed) {
  if (matrix.rows == 0) fail(ErrorCode::invalid_argument, "k-center: empty matrix");
  auto core = kcenter_greedy_from(matrix, k, initial_center(matrix.rows, seed));
  core.seed = seed;
  return core;
}

CoreSet kcenter_greedy(const Embeddings& embeddings, std::size_t k, std::uint64_t seed) {
  auto core = kcenter_greedy(embeddings.matrix, k, seed);
  core.data_version_id = embeddings.manifest.data_version_id;
  core.embedder_tag = embeddings.manifest.embedder_tag;
  const auto by_row = embeddings.samples_by_row();
  for (auto idx : core.center_indices) core.center_samples.push_back(by_row[idx]);
  return core;
}

double covering_radius(const EmbeddingMatrix& matrix, std::span<const std::size_t> centers) {
  if (centers.empty()) fail(ErrorCode::invalid_argument, "covering_radius: no centers");
  for (auto c : centers) {
    if (c >= matrix.rows) fail(ErrorCode::invalid_argument, "covering_radius: center index out of range");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < matrix.rows; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (auto c : centers) best = std::min(best, squared_distance(matrix.row(i), matrix.row(c)));
    worst = std::max(worst, best);
  }
  return std::sqrt(worst);
}

CoreSet kcenter_bruteforce(const EmbeddingMatrix& matrix, std::size_t k) {
  check_finite(matrix);
  const std::size_t n = matrix.rows;
  if (n > kBruteForceMaxPoints || k > kBruteForceMaxCenters) {
    fail(ErrorCode::too_large, "k-center brute force limited to n<=15, k<=4");
  }
  if (k == 0 || k > n) fail(ErrorCode::invalid_argument, "k-center brute force: need 1 <= k <= n");

  std::vector<double> d2(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) d2[i * n + j] = squared_distance(matrix.row(i), matrix.row(j));
  }

  std::vector<std::size_t> combo(k);
  std::iota(combo.begin(), combo.end(), 0);
  std::vector<std::size_t> best_combo;
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    double worst = 0.0;
    for (std::size_t i = 0; i < n && worst < best; ++i) {
      double near = std::numeric_limits<double>::infinity();
      for (auto c : combo) near = std::min(near, d2[i * n + c]);
      worst = std::max(worst, near);
    }
    if (worst < best) {
      best = worst;
      best_combo = combo;
    }
    // next combination in lexicographic order
    std::size_t pos = k;
    while (pos > 0 && combo[pos - 1] == n - k + pos - 1) --pos;
    if (pos == 0) break;
    ++combo[pos - 1];
    for (std::size_t j = pos; j < k; ++j) combo[j] = combo[j - 1] + 1;
  }

  CoreSet core;
  core.center_indices = best_combo;
  core.covering_radius = std::sqrt(best);
  gather_centers(matrix, core);
  return core;
}

std::size_t k_from_class_count(std::size_t num_classes, std::size_t n) {
  if (num_classes == 0) fail(ErrorCode::invalid_argument, "class count must be positive");
  return std::min(num_classes, n);
}

Blob encode_coreset(const CoreSet& core) {
  if (core.center_indices.size() != core.k || core.center_vectors.rows != core.k) {
    fail(ErrorCode::invalid_argument, "coreset: inconsistent center count");
  }
  ByteWriter w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kFormatVersion);
  w.u64(core.k);
  w.u32(static_cast<std::uint32_t>(core.dim()));
  w.u8(kDtypeFloat32);
  w.u16(static_cast<std::uint16_t>(core.embedder_tag.size()));
  w.text(core.embedder_tag);
  w.u8(core.data_version_id ? 1 : 0);
  w.u64(core.data_version_id ? core.data_version_id->value : 0);
  w.u64(core.seed);
  w.f64(core.covering_radius);
  for (auto idx : core.center_indices) w.u64(idx);
  const bool has_samples = core.center_samples.size() == core.k;
  w.u8(has_samples ? 1 : 0);
  if (has_samples) {
    for (auto s : core.center_samples) w.u64(s.value);
  }
  for (float v : core.center_vectors.values) w.f32(v);
  return w.take();
}

CoreSet decode_coreset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "vcore");
  for (char c : kMagic) {
    if (r.u8() != static_cast<std::uint8_t>(c)) fail(ErrorCode::format_error, "vcore: bad magic");
  }
  if (r.u32() != kFormatVersion) fail(ErrorCode::format_error, "vcore: unsupported format version");
  CoreSet core;
  core.k = r.u64();
  const std::uint32_t d = r.u32();
  if (r.u8() != kDtypeFloat32) fail(ErrorCode::format_error, "vcore: unsupported dtype");
  core.embedder_tag = r.text(r.u16());
  const bool has_version = r.u8() != 0;
  const auto version = r.u64();
  if (has_version) core.data_version_id = VersionId{version};
  core.seed = r.u64();
  core.covering_radius = r.f64();
  if (core.k == 0 || core.k > r.remaining() / 8) fail(ErrorCode::format_error, "vcore: bad center count");
  for (std::size_t j = 0; j < core.k; ++j) core.center_indices.push_back(r.u64());
  if (r.u8() != 0) {
    for (std::size_t j = 0; j < core.k; ++j) core.center_samples.push_back(SampleId{r.u64()});
  }
  if (d == 0 || core.k > r.remaining() / 4 / d) fail(ErrorCode::format_error, "vcore: truncated centers");
  core.center_vectors = EmbeddingMatrix(core.k, d);
  for (auto& v : core.center_vectors.values) v = r.f32();
  if (!r.at_end()) fail(ErrorCode::format_error, "vcore: trailing bytes");
  return core;
}

void write_coreset(const CoreSet& core, const std::string& path) { write_file_atomic(path, encode_coreset(core)); }
CoreSet read_coreset(const std::string& path) { return decode_coreset(read_file(path)); }

}  // namespace veml
