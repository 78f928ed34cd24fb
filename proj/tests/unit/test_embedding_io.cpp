#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "temp_dir.hpp"
#include "veml/binary_io.hpp"
#include "veml/embedding_io.hpp"
#include "veml/error.hpp"
#include "veml/version_store.hpp"

using namespace veml;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected veml::Error");
  return ErrorCode::invalid_argument;
}

EmbeddingManifest identity_manifest(std::size_t n, const std::string& tag = "test-embedder") {
  EmbeddingManifest m;
  m.embedder_tag = tag;
  for (std::size_t i = 0; i < n; ++i) m.rows.emplace_back(SampleId{i}, i);
  return m;
}

}  // namespace

TEST_CASE("a 2x3 matrix survives write and read bit for bit") {
  testutil::TempDir dir;
  auto m = EmbeddingMatrix::from_rows({{1.0, -2.5, 3.25}, {1e-30, 7.0, -0.0}});
  m.values[0] = std::nextafter(1.0f, 2.0f);
  const auto manifest = identity_manifest(2);
  write_embeddings(m, manifest, dir / "a.vemb");
  const auto back = read_embeddings(dir / "a.vemb");
  CHECK(back.matrix == m);
  CHECK(back.manifest == manifest);
  CHECK(std::signbit(back.matrix.at(1, 2)));
}

TEST_CASE("vemb header layout is exact") {
  auto m = EmbeddingMatrix::from_rows({{1.0}});
  EmbeddingManifest man = identity_manifest(1, "ab");
  const auto bytes = encode_embeddings(m, man);
  REQUIRE(bytes.size() >= 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "VEMB");
  ByteReader r(bytes, "test");
  r.bytes(4);
  CHECK(r.u32() == 1);
  CHECK(r.u64() == 1);
  CHECK(r.u32() == 1);
  CHECK(r.u8() == 1);
  CHECK(r.u16() == 2);
  CHECK(r.text(2) == "ab");
  CHECK(r.u64() == 4);
  CHECK(r.text(4) == "0\t0\n");
  CHECK(r.f32() == 1.0f);
  CHECK(r.at_end());
}

TEST_CASE("a 673x1024 file has the size the format implies") {
  testutil::TempDir dir;
  const std::size_t n = 673, d = 1024;
  EmbeddingMatrix m(n, d);
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = static_cast<float>(i % 97) * 0.5f;
  auto man = identity_manifest(n, "cnn:resnet50:abcd");
  man.data_version_id = VersionId{12};
  write_embeddings(m, man, dir / "big.vemb");

  std::size_t manifest_bytes = std::string("#data_version_id\t12\n").size();
  for (std::size_t i = 0; i < n; ++i) manifest_bytes += 2 * std::to_string(i).size() + 2;
  const std::size_t fixed = 4 + 4 + 8 + 4 + 1 + 2 + 8;
  CHECK(fixed == kVembFixedHeaderBytes);
  const std::size_t expected = fixed + man.embedder_tag.size() + manifest_bytes + n * d * 4;
  CHECK(std::filesystem::file_size(dir / "big.vemb") == expected);

  const auto back = read_embeddings(dir / "big.vemb");
  CHECK(back.matrix == m);
  CHECK(back.manifest.data_version_id == VersionId{12});
}

TEST_CASE("malformed files are rejected") {
  auto m = EmbeddingMatrix::from_rows({{1, 2}, {3, 4}, {5, 6}, {7, 8}, {9, 10}});
  auto man = identity_manifest(5);
  auto bytes = encode_embeddings(m, man);

  SUBCASE("header n disagrees with the manifest") {
    // Patch n (offset 8) from 5 to 4 would truncate; set manifest 4 rows, n 5.
    auto four = identity_manifest(4);
    EmbeddingMatrix m4(4, 2);
    auto b = encode_embeddings(m4, four);
    b[8] = 5;  // n := 5 while the manifest lists 4 rows
    CHECK(code_of([&] { decode_embeddings(b); }) == ErrorCode::row_count_mismatch);
  }
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK(code_of([&] { decode_embeddings(bytes); }) == ErrorCode::format_error);
  }
  SUBCASE("future version") {
    bytes[4] = 2;
    CHECK(code_of([&] { decode_embeddings(bytes); }) == ErrorCode::format_error);
  }
  SUBCASE("truncated payload") {
    bytes.resize(bytes.size() - 3);
    CHECK(code_of([&] { decode_embeddings(bytes); }) == ErrorCode::format_error);
  }
  SUBCASE("trailing garbage") {
    bytes.push_back(0);
    CHECK(code_of([&] { decode_embeddings(bytes); }) == ErrorCode::format_error);
  }
  SUBCASE("non-finite values") {
    m.values[3] = std::numeric_limits<float>::quiet_NaN();
    CHECK(code_of([&] { validate(m, man); }) == ErrorCode::non_finite);
    m.values[3] = std::numeric_limits<float>::infinity();
    CHECK(code_of([&] { encode_embeddings(m, man); }) == ErrorCode::non_finite);
  }
  SUBCASE("broken bijection") {
    man.rows[1].second = 0;
    CHECK(code_of([&] { validate(m, man); }) == ErrorCode::row_count_mismatch);
    man = identity_manifest(5);
    man.rows[1].first = SampleId{0};
    CHECK(code_of([&] { validate(m, man); }) == ErrorCode::duplicate_id);
  }
  SUBCASE("empty tag") {
    man.embedder_tag.clear();
    CHECK(code_of([&] { validate(m, man); }) == ErrorCode::invalid_argument);
  }
}

TEST_CASE("synthetic embedder") {
  auto store = VersionStore::in_memory();
  std::vector<Blob> p(200, Blob{1});
  const auto v = store->create_version(store->add_samples(p), {}, VersionKind::training);
  const auto& version = *store->version(v);

  SUBCASE("zero spread at the origin gives zeros") {
    const std::vector<GaussianCluster> c{{std::vector<double>(4, 0.0), 0.0}};
    const auto e = synth_embed(version, 4, 9, c);
    for (float x : e.matrix.values) CHECK(x == 0.0f);
    check_covers_version(e.manifest, version);
  }
  SUBCASE("same seed, same matrix") {
    const std::vector<GaussianCluster> c{{std::vector<double>(3, 1.0), 2.0}};
    CHECK(synth_embed(version, 3, 5, c).matrix == synth_embed(version, 3, 5, c).matrix);
    CHECK_FALSE(synth_embed(version, 3, 5, c).matrix == synth_embed(version, 3, 6, c).matrix);
  }
  SUBCASE("cluster halves centre on their means") {
    std::vector<double> far(2, 0.0);
    far[0] = 10.0;
    const std::vector<GaussianCluster> c{{{0.0, 0.0}, 1.0}, {far, 1.0}};
    const auto e = synth_embed(version, 2, 42, c);
    double sum[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < e.matrix.rows; ++i)
      for (std::size_t j = 0; j < 2; ++j) sum[i % 2][j] += e.matrix.at(i, j);
    CHECK(std::abs(sum[0][0] / 100) < 0.5);
    CHECK(std::abs(sum[0][1] / 100) < 0.5);
    CHECK(std::abs(sum[1][0] / 100 - 10.0) < 0.5);
    CHECK(std::abs(sum[1][1] / 100) < 0.5);
  }
  SUBCASE("bad specs") {
    CHECK(code_of([&] { synth_embed(version, 2, 1, {}); }) == ErrorCode::invalid_argument);
    const std::vector<GaussianCluster> neg{{{0.0, 0.0}, -1.0}};
    CHECK(code_of([&] { synth_embed(version, 2, 1, neg); }) == ErrorCode::invalid_argument);
  }
}

TEST_CASE("coverage check against a version") {
  auto store = VersionStore::in_memory();
  store->add_samples(std::vector<Blob>(4, Blob{1}));
  const std::vector<SampleId> three{SampleId{0}, SampleId{1}, SampleId{2}};
  const auto v = store->create_version(three, {}, VersionKind::training);
  auto man = identity_manifest(3);
  check_covers_version(man, *store->version(v));
  man.rows[2].first = SampleId{3};
  CHECK(code_of([&] { check_covers_version(man, *store->version(v)); }) == ErrorCode::not_found);
  CHECK(code_of([&] { check_covers_version(identity_manifest(2), *store->version(v)); }) ==
        ErrorCode::row_count_mismatch);
}
