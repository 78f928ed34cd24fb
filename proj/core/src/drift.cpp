#include "veml/drift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "veml/error.hpp"

namespace veml {

DriftReport mismatch_test(const CoreSet& train, const CoreSet& test) {
  if (train.embedder_tag != test.embedder_tag) {
    fail(ErrorCode::embedder_mismatch, "drift: embedder tags differ: '" + train.embedder_tag + "' vs '" +
                                           test.embedder_tag + "'");
  }
  if (train.dim() != test.dim()) fail(ErrorCode::dimension_mismatch, "drift: coreset dimensions differ");
  if (train.k == 0 || test.k == 0) fail(ErrorCode::invalid_argument, "drift: empty coreset");
  if (!std::isfinite(train.covering_radius) || train.covering_radius < 0) {
    fail(ErrorCode::invalid_argument, "drift: training coreset lacks a covering radius");
  }

  DriftReport r;
  r.train_version_id = train.data_version_id;
  r.test_version_id = test.data_version_id;
  r.covering_radius = train.covering_radius;

  double total = 0.0;
  for (std::size_t t = 0; t < test.k; ++t) {
    CenterMatch m{t, 0, std::numeric_limits<double>::infinity()};
    for (std::size_t c = 0; c < train.k; ++c) {
      const double d = euclidean_distance(test.center_vectors.row(t), train.center_vectors.row(c));
      if (d < m.distance) {
        m.distance = d;
        m.train_center = c;
      }
    }
    total += m.distance;
    r.max_nearest_distance = std::max(r.max_nearest_distance, m.distance);
    r.per_center.push_back(m);
  }
  r.mean_nearest_distance = total / static_cast<double>(test.k);
  r.mismatch = is_mismatch(r.mean_nearest_distance, r.covering_radius);
  return r;
}

Document DriftReport::to_document() const {
  Document centers = Document::array();
  for (const auto& m : per_center) {
    centers.push_back({{"test_center", m.test_center}, {"train_center", m.train_center}, {"distance", m.distance}});
  }
  return {{"train_version_id", train_version_id ? Document(train_version_id->value) : Document(nullptr)},
          {"test_version_id", test_version_id ? Document(test_version_id->value) : Document(nullptr)},
          {"covering_radius", covering_radius},
          {"mean_nearest_distance", mean_nearest_distance},
          {"max_nearest_distance", max_nearest_distance},
          {"mismatch", mismatch},
          {"per_center", centers}};
}

}  // namespace veml
