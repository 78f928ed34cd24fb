#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "veml/coreset.hpp"
#include "veml/document.hpp"
#include "veml/ids.hpp"

namespace veml {

struct CenterMatch {
  std::size_t test_center = 0;   // index into the test coreset
  std::size_t train_center = 0;  // nearest training center
  double distance = 0.0;
};

// Covering-ball test of a testing coreset against a training coreset. Uses
// only center geometry, never labels.
struct DriftReport {
  std::optional<VersionId> train_version_id;
  std::optional<VersionId> test_version_id;
  double covering_radius = 0.0;        // training coreset radius
  double mean_nearest_distance = 0.0;  // decision statistic
  double max_nearest_distance = 0.0;   // diagnostic only
  bool mismatch = false;
  std::vector<CenterMatch> per_center;

  Document to_document() const;
};

// Covered when the mean test-center distance is at most the training
// radius; strictly greater means mismatch.
constexpr bool is_mismatch(double mean_nearest_distance, double covering_radius) noexcept {
  return mean_nearest_distance > covering_radius;
}

DriftReport mismatch_test(const CoreSet& train, const CoreSet& test);

}  // namespace veml
