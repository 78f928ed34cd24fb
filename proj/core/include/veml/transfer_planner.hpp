#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "veml/coreset.hpp"
#include "veml/document.hpp"
#include "veml/gromov_wasserstein.hpp"
#include "veml/ids.hpp"
#include "veml/similarity.hpp"

namespace veml {

class Repository;
class LineageGraph;

inline constexpr std::array<std::string_view, 4> kConfigSections{"data_preparation", "model", "training",
                                                                 "inference"};

// A dotted path and its replacement value.
struct ConfigOverride {
  std::string path;
  Document value;
};

// "a.b.c=value". The value is parsed as JSON when it is valid JSON and kept
// as a plain string otherwise.
ConfigOverride parse_override(std::string_view text);

// Applies overrides in order, last writer wins. Intermediate objects are
// created as needed. Stepping through a non-object throws invalid_argument
// naming the conflicting prefix.
Document apply_overrides(Document doc, std::span<const ConfigOverride> overrides);

struct LifecycleConfig {
  // Object with exactly the four reserved sections, each an object.
  Document sections = empty_sections();
  // Node each section was copied from.
  std::map<std::string, NodeId> section_sources;
  std::optional<std::string> pretrained_model_ref;
  // Paths set by overrides, first application order, no repeats.
  std::vector<std::string> overridden_paths;

  static Document empty_sections();
  Document to_document() const;
  static LifecycleConfig from_document(const Document& doc);
};

// Overrides must start with a reserved section name.
LifecycleConfig apply_overrides(LifecycleConfig config, std::span<const ConfigOverride> overrides);

// Nodes of one complete lifecycle rooted at a data version:
//   training -trained_on-> data, model -derived_from-> training,
//   inference -deployed_from-> model.
struct SourceLifecycle {
  NodeId data;
  VersionId version;
  NodeId training;
  NodeId model;
  NodeId inference;
};

// Newest complete lifecycle (highest node ids) trained on the data node.
// On failure returns nullopt and, if why is set, describes the missing piece.
std::optional<SourceLifecycle> resolve_lifecycle(const Repository& repo, NodeId data_node,
                                                 std::string* why = nullptr);

// Config assembled from the source's data version, model, training and
// inference nodes.
LifecycleConfig lifecycle_config(const Repository& repo, const SourceLifecycle& source);

enum class Recommendation { transfer, train_from_scratch };

std::string_view to_string(Recommendation r) noexcept;

struct PlannedSource {
  std::string dataset_id;
  double distance = 0.0;
  SourceLifecycle lifecycle;
  LifecycleConfig config;
};

struct TransferPlan {
  VersionId target;
  SimilarityMetric metric = SimilarityMetric::coreset_euclidean;
  double threshold = 0.0;
  std::size_t k_star = 0;
  std::vector<RankedEntry> ranked;
  std::vector<PlannedSource> chosen;
  Recommendation recommendation = Recommendation::train_from_scratch;
  std::vector<std::string> warnings;

  // Canonical form: sorted keys, no timestamps.
  Document to_document() const;
  static TransferPlan from_document(const Document& doc);
};

struct RegistryEntry {
  std::string dataset_id;
  NodeId data_node;
  CoreSet core;
};

struct TransferRequest {
  VersionId target;
  SimilarityMetric metric = SimilarityMetric::coreset_euclidean;
  double threshold = 0.0;
  std::size_t k_star = 1;
  std::vector<ConfigOverride> overrides;
  GwParams gw;
  DistanceOptions distance;
};

// Select up to k_star flagged entries, in ranked order, whose lifecycle is
// complete. Entries with missing pieces are skipped with a warning.
TransferPlan plan_from_ranking(const Repository& repo, const TransferRequest& request,
                               std::vector<RankedEntry> ranked,
                               const std::map<std::string, NodeId>& data_nodes);

TransferPlan plan_transfer(const Repository& repo, const CoreSet& target_core,
                           std::span<const RegistryEntry> registry, const TransferRequest& request);

// Creates, per chosen source, new model, training and inference nodes
// derived from the source nodes, the training node trained_on the target.
// One graph commit for the whole plan. Returns new node ids in creation
// order (model, training, inference per source).
std::vector<NodeId> materialize_plan(Repository& repo, const TransferPlan& plan);

}  // namespace veml
