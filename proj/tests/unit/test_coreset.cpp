#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "temp_dir.hpp"
#include "veml/coreset.hpp"
#include "veml/error.hpp"

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

EmbeddingMatrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EmbeddingMatrix m(n, d);
  for (auto& v : m.values) v = static_cast<float>(u(rng));
  return m;
}

std::size_t seed_with_first(std::size_t n, std::size_t row) {
  for (std::uint64_t s = 0; s < 10000; ++s)
    if (initial_center(n, s) == row) return s;
  FAIL("no seed selects the row");
  return 0;
}

}  // namespace

TEST_CASE("single point") {
  const auto m = EmbeddingMatrix::from_rows({{3.0, 4.0}});
  const auto c = kcenter_greedy(m, 1, 7);
  CHECK(c.center_indices == std::vector<std::size_t>{0});
  CHECK(c.covering_radius == 0.0);
}

TEST_CASE("two points on a line") {
  const auto m = EmbeddingMatrix::from_rows({{0.0}, {10.0}});
  const auto s0 = seed_with_first(2, 0);
  auto c = kcenter_greedy(m, 1, s0);
  CHECK(c.center_indices[0] == 0);
  CHECK(c.covering_radius == 10.0);
  c = kcenter_greedy(m, 2, s0);
  CHECK(c.covering_radius == 0.0);
  CHECK(c.seed == s0);
}

TEST_CASE("greedy stays within twice the optimum on 12 random points") {
  for (std::uint64_t inst = 0; inst < 10; ++inst) {
    const auto m = random_matrix(12, 2, inst);
    const auto opt = oracle::kcenter_optimum(m, 3);
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
      const auto g = kcenter_greedy(m, 3, seed);
      CHECK(g.covering_radius <= 2.0 * opt.radius + 1e-12);
      CHECK(opt.radius <= g.covering_radius + 1e-12);
    }
  }
}

TEST_CASE("covering radius") {
  const auto m = EmbeddingMatrix::from_rows({{-2.0, 0.0}, {2.0, 0.0}, {0.0, 0.0}});
  const std::vector<std::size_t> all{0, 1, 2};
  CHECK(covering_radius(m, all) == 0.0);
  const std::vector<std::size_t> mid{2};
  CHECK(covering_radius(m, mid) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(code_of([&] { covering_radius(m, {}); }) == ErrorCode::invalid_argument);

  // six clusters of zero spread, one point per centre repeated
  std::vector<std::vector<double>> rows;
  for (int c = 0; c < 6; ++c)
    for (int r = 0; r < 5; ++r) rows.push_back({10.0 * c, 3.0 * (c % 2)});
  const auto six = EmbeddingMatrix::from_rows(rows);
  CHECK(kcenter_greedy(six, 6, 3).covering_radius == 0.0);
}

TEST_CASE("brute force optimum on three collinear points") {
  const auto m = EmbeddingMatrix::from_rows({{0.0}, {1.0}, {2.0}});
  // Centres must be data points: {0,1} leaves 2 at distance 1, {0,2} leaves 1
  // at distance 1, {1,2} leaves 0 at distance 1.
  const auto c = kcenter_bruteforce(m, 2);
  CHECK(c.covering_radius == 1.0);
  CHECK(c.center_indices == std::vector<std::size_t>{0, 1});
  CHECK(oracle::kcenter_optimum(m, 2).radius == 1.0);
  CHECK(kcenter_bruteforce(m, 3).covering_radius == 0.0);
}

TEST_CASE("brute force agrees with the oracle and is bounded") {
  for (std::uint64_t inst = 0; inst < 20; ++inst) {
    const auto m = random_matrix(9, 3, 100 + inst);
    for (std::size_t k : {1u, 2u, 4u}) {
      const auto b = kcenter_bruteforce(m, k);
      const auto o = oracle::kcenter_optimum(m, k);
      CHECK(b.covering_radius == doctest::Approx(o.radius).epsilon(1e-12));
      CHECK(b.center_indices == o.centers);
    }
  }
  const auto big = random_matrix(16, 2, 1);
  CHECK(code_of([&] { kcenter_bruteforce(big, 2); }) == ErrorCode::too_large);
  const auto small = random_matrix(6, 2, 1);
  CHECK(code_of([&] { kcenter_bruteforce(small, 5); }) == ErrorCode::too_large);
}

TEST_CASE("bad arguments") {
  const auto m = random_matrix(5, 2, 3);
  CHECK(code_of([&] { kcenter_greedy(m, 0, 1); }) == ErrorCode::invalid_argument);
  CHECK(code_of([&] { kcenter_greedy(m, 6, 1); }) == ErrorCode::invalid_argument);
  auto bad = m;
  bad.values[2] = std::numeric_limits<float>::quiet_NaN();
  CHECK(code_of([&] { kcenter_greedy(bad, 2, 1); }) == ErrorCode::non_finite);
}

TEST_CASE("farthest-first property holds at every step") {
  const auto m = random_matrix(300, 5, 77);
  const auto c = kcenter_greedy(m, 25, 4);
  REQUIRE(c.selection_radii.size() == 24);
  for (std::size_t j = 1; j < c.center_indices.size(); ++j) {
    const std::vector<std::size_t> chosen(c.center_indices.begin(), c.center_indices.begin() + j);
    // the j-th pick attains the current covering radius of the first j centres
    CHECK(c.selection_radii[j - 1] == doctest::Approx(oracle::covering_radius(m, chosen)).epsilon(1e-12));
    if (j >= 2) CHECK(c.selection_radii[j - 1] <= c.selection_radii[j - 2]);
  }
}

TEST_CASE("ties go to the lowest index") {
  // Points 1 and 2 are both at distance 1 from point 0.
  const auto m = EmbeddingMatrix::from_rows({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}});
  const auto c = kcenter_greedy_from(m, 2, 0);
  CHECK(c.center_indices == std::vector<std::size_t>{0, 1});
}

TEST_CASE("radius never grows with k and k = n gives zero") {
  const auto m = random_matrix(40, 3, 5);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= 40; ++k) {
    const auto c = kcenter_greedy(m, k, 11);
    CHECK(c.covering_radius <= prev);
    CHECK(c.covering_radius == doctest::Approx(oracle::covering_radius(m, c.center_indices)).epsilon(1e-12));
    prev = c.covering_radius;
  }
  CHECK(prev == 0.0);
}

TEST_CASE("row permutation gives the same centre vectors") {
  const auto m = random_matrix(50, 4, 9);
  std::vector<std::size_t> perm(50);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
  EmbeddingMatrix p(50, 4);
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < 4; ++j) p.row(i)[j] = m.at(perm[i], j);
  // row i of p is row perm[i] of m, so start p at the row holding m's row 7
  const auto where = static_cast<std::size_t>(std::find(perm.begin(), perm.end(), 7) - perm.begin());
  const auto a = kcenter_greedy_from(m, 8, 7);
  const auto b = kcenter_greedy_from(p, 8, where);
  for (std::size_t j = 0; j < 8; ++j) CHECK(perm[b.center_indices[j]] == a.center_indices[j]);
  CHECK(a.center_vectors == b.center_vectors);
}

TEST_CASE("sidecar round trip") {
  testutil::TempDir dir;
  Embeddings e;
  e.matrix = random_matrix(20, 3, 1);
  e.manifest.embedder_tag = "t";
  e.manifest.data_version_id = VersionId{4};
  for (std::size_t i = 0; i < 20; ++i) e.manifest.rows.emplace_back(SampleId{100 + i}, i);
  const auto c = kcenter_greedy(e, 5, 2);
  CHECK(c.center_samples.size() == 5);
  CHECK(c.center_samples[0].value == 100 + c.center_indices[0]);
  write_coreset(c, dir / "c.vcore");
  const auto back = read_coreset(dir / "c.vcore");
  CHECK(back.center_indices == c.center_indices);
  CHECK(back.center_samples == c.center_samples);
  CHECK(back.center_vectors == c.center_vectors);
  CHECK(back.covering_radius == c.covering_radius);
  CHECK(back.seed == 2);
  CHECK(back.data_version_id == VersionId{4});
  CHECK(back.embedder_tag == "t");
}

TEST_CASE("class-count heuristic") {
  CHECK(k_from_class_count(10, 500) == 10);
  CHECK(k_from_class_count(80, 30) == 30);
  CHECK(kImageCoresetK == 10);
  CHECK(kSpatiotemporalCoresetK == 100);
}
