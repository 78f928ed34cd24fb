#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "veml/document.hpp"
#include "veml/ids.hpp"

namespace veml {

class RecordLog;

enum class NodeKind : std::uint8_t {
  data_version,
  model_version,
  training_version,
  inference_version,
  metadata,
};

enum class Relation : std::uint8_t {
  derived_from,
  fine_tuned_from,
  trained_on,
  uses_metadata,
  deployed_from,
  tested_on,
};

inline constexpr std::size_t kRelationCount = 6;

std::string_view to_string(NodeKind kind) noexcept;
std::string_view to_string(Relation relation) noexcept;
NodeKind parse_node_kind(std::string_view name);
Relation parse_relation(std::string_view name);

// Fixed edge typing table:
//   derived_from     X -> X for any non-metadata kind, and model -> training
//                    (a trained model derives from the run that produced it)
//   fine_tuned_from  model -> model
//   trained_on       training -> data
//   uses_metadata    any -> metadata
//   deployed_from    inference -> model
//   tested_on        training | inference -> data
bool relation_allowed(Relation relation, NodeKind from, NodeKind to) noexcept;
// derived_from and fine_tuned_from form the derivation DAG.
constexpr bool is_derivation(Relation r) noexcept {
  return r == Relation::derived_from || r == Relation::fine_tuned_from;
}

struct LifecycleNode {
  NodeId id;
  NodeKind kind = NodeKind::metadata;
  Document attributes = Document::object();
};

struct LifecycleEdge {
  NodeId from;
  NodeId to;
  Relation relation = Relation::derived_from;

  friend auto operator<=>(const LifecycleEdge&, const LifecycleEdge&) = default;
};

struct Subgraph {
  std::vector<LifecycleNode> nodes;  // ascending id
  std::vector<LifecycleEdge> edges;  // ascending (from, to, relation)
};

struct AttributeDiff {
  std::string path;
  Document value_a;
  Document value_b;
};

struct ModelMetadata {
  std::string backbone;
  std::string architecture;
  Document extra = Document::object();

  // Flat attribute document: {"architecture", "backbone", ...extra}.
  Document to_attributes() const;
  static ModelMetadata from_attributes(const Document& attrs);
};

struct TrainingVersionRecord {
  Document hyperparameters = Document::object();
  std::optional<std::string> log_ref;
  std::optional<std::string> trained_model_ref;

  Document to_attributes() const;
  static TrainingVersionRecord from_attributes(const Document& attrs);
};

struct InferenceVersionRecord {
  Document deployment_config = Document::object();
  std::optional<std::string> deployed_model_ref;

  Document to_attributes() const;
  static InferenceVersionRecord from_attributes(const Document& attrs);
};

// Validates and normalizes attributes for a node kind (fills optional refs
// with null). Throws schema_violation.
Document normalize_attributes(NodeKind kind, Document attributes);

class LineageGraph;

// Staged writes applied atomically by LineageGraph::commit. Node ids handed
// out by put_node are final once commit succeeds.
class GraphBatch {
 public:
  NodeId put_node(NodeKind kind, Document attributes);
  void link(NodeId from, NodeId to, Relation relation);

  const std::vector<LifecycleNode>& nodes() const noexcept { return nodes_; }
  const std::vector<LifecycleEdge>& edges() const noexcept { return edges_; }

 private:
  friend class LineageGraph;
  GraphBatch(const LineageGraph* graph, std::uint64_t base) : graph_(graph), base_(base) {}

  std::optional<NodeKind> kind_of(NodeId id) const;

  const LineageGraph* graph_;
  std::uint64_t base_;
  std::vector<LifecycleNode> nodes_;
  std::vector<LifecycleEdge> edges_;
};

// Embedded graph store for lifecycle versions and ML metadata. Writes are
// serialized; reads return snapshots.
class LineageGraph {
 public:
  // manifest may be null for an in-memory graph.
  explicit LineageGraph(RecordLog* manifest = nullptr) : manifest_(manifest) {}

  LineageGraph(const LineageGraph&) = delete;
  LineageGraph& operator=(const LineageGraph&) = delete;

  NodeId put_node(NodeKind kind, Document attributes);
  LifecycleEdge link(NodeId from, NodeId to, Relation relation);

  GraphBatch begin() const;
  // All-or-nothing: validates typing and acyclicity of the combined graph,
  // persists one manifest frame, then publishes. Returns the new node ids.
  std::vector<NodeId> commit(const GraphBatch& batch);

  LifecycleNode node(NodeId id) const;
  std::optional<LifecycleNode> find_node(NodeId id) const;
  std::vector<LifecycleNode> nodes() const;
  std::vector<LifecycleEdge> edges() const;
  std::vector<LifecycleEdge> out_edges(NodeId id) const;
  std::vector<LifecycleEdge> in_edges(NodeId id) const;
  std::size_t node_count() const;
  std::size_t edge_count() const;

  // data_version node carrying the given store version id, if any.
  std::optional<NodeId> data_node(VersionId version) const;

  // Connected component over the given relations, both directions.
  Subgraph lifecycle_of(NodeId id) const;
  Subgraph lifecycle_of(NodeId id, std::span<const Relation> relations) const;

  // Attribute paths whose values differ, ascending. Missing values are null.
  std::vector<AttributeDiff> diff_models(NodeId a, NodeId b) const;

  // True when the derivation relations contain no cycle. Always holds for a
  // graph built through this API; exposed for fuzzing and fixture checks.
  bool derivation_is_acyclic() const;

  // nodes.jsonl / edges.jsonl.
  void export_jsonl(const std::string& dir) const;
  static void import_jsonl(const std::string& dir, LineageGraph& into);

  static Document encode_node(const LifecycleNode& n);
  static Document encode_edge(const LifecycleEdge& e);
  static LifecycleNode decode_node(const Document& doc);
  static LifecycleEdge decode_edge(const Document& doc);
  // Manifest replay; validates the same invariants as live writes.
  void restore_node(LifecycleNode node);
  void restore_edge(LifecycleEdge edge);

 private:
  friend class GraphBatch;

  std::optional<NodeKind> kind_locked(NodeId id) const;
  bool reaches_locked(NodeId from, NodeId target,
                      const std::vector<LifecycleEdge>& extra) const;
  void apply_locked(LifecycleNode node);
  void apply_locked(const LifecycleEdge& edge);

  mutable std::shared_mutex mu_;
  RecordLog* manifest_;
  std::vector<LifecycleNode> nodes_;
  std::vector<LifecycleEdge> edges_;
  std::vector<std::vector<std::size_t>> out_;  // edge indices per node
  std::vector<std::vector<std::size_t>> in_;
  std::unordered_map<std::uint64_t, NodeId> data_nodes_;
};

}  // namespace veml
