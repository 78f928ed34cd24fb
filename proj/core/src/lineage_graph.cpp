#include "veml/lineage_graph.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>

#include "veml/error.hpp"
#include "veml/record_log.hpp"

namespace veml {

namespace {

constexpr std::array<std::string_view, 5> kNodeKindNames{
    "data_version", "model_version", "training_version", "inference_version", "metadata"};
constexpr std::array<std::string_view, kRelationCount> kRelationNames{
    "derived_from", "fine_tuned_from", "trained_on", "uses_metadata", "deployed_from", "tested_on"};

constexpr std::array<Relation, kRelationCount> kAllRelations{
    Relation::derived_from, Relation::fine_tuned_from, Relation::trained_on,
    Relation::uses_metadata, Relation::deployed_from,   Relation::tested_on};

[[noreturn]] void schema(NodeKind kind, const std::string& why) {
  fail(ErrorCode::schema_violation, std::string(to_string(kind)) + " node: " + why);
}

void require_string(NodeKind kind, const Document& attrs, const char* key) {
  auto it = attrs.find(key);
  if (it == attrs.end() || !it->is_string() || it->get<std::string>().empty()) {
    schema(kind, std::string("attribute '") + key + "' must be a non-empty string");
  }
}

void require_object(NodeKind kind, const Document& attrs, const char* key) {
  auto it = attrs.find(key);
  if (it == attrs.end() || !it->is_object()) schema(kind, std::string("attribute '") + key + "' must be an object");
}

void normalize_ref(NodeKind kind, Document& attrs, const char* key) {
  auto it = attrs.find(key);
  if (it == attrs.end()) {
    attrs[key] = nullptr;
  } else if (!it->is_null() && !it->is_string()) {
    schema(kind, std::string("attribute '") + key + "' must be a string or null");
  }
}

std::optional<std::string> opt_string(const Document& attrs, const char* key) {
  auto it = attrs.find(key);
  if (it == attrs.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

Document ref_value(const std::optional<std::string>& ref) {
  return ref ? Document(*ref) : Document(nullptr);
}

}  // namespace

std::string_view to_string(NodeKind kind) noexcept { return kNodeKindNames[static_cast<std::size_t>(kind)]; }
std::string_view to_string(Relation relation) noexcept {
  return kRelationNames[static_cast<std::size_t>(relation)];
}

NodeKind parse_node_kind(std::string_view name) {
  for (std::size_t i = 0; i < kNodeKindNames.size(); ++i) {
    if (kNodeKindNames[i] == name) return static_cast<NodeKind>(i);
  }
  fail(ErrorCode::invalid_argument, "unknown node kind '" + std::string(name) + "'");
}

Relation parse_relation(std::string_view name) {
  for (std::size_t i = 0; i < kRelationNames.size(); ++i) {
    if (kRelationNames[i] == name) return static_cast<Relation>(i);
  }
  fail(ErrorCode::invalid_argument, "unknown relation '" + std::string(name) + "'");
}

bool relation_allowed(Relation relation, NodeKind from, NodeKind to) noexcept {
  switch (relation) {
    case Relation::derived_from:
      return (from == to && from != NodeKind::metadata) ||
             (from == NodeKind::model_version && to == NodeKind::training_version);
    case Relation::fine_tuned_from:
      return from == NodeKind::model_version && to == NodeKind::model_version;
    case Relation::trained_on:
      return from == NodeKind::training_version && to == NodeKind::data_version;
    case Relation::uses_metadata:
      return to == NodeKind::metadata;
    case Relation::deployed_from:
      return from == NodeKind::inference_version && to == NodeKind::model_version;
    case Relation::tested_on:
      return (from == NodeKind::training_version || from == NodeKind::inference_version) &&
             to == NodeKind::data_version;
  }
  return false;
}

Document normalize_attributes(NodeKind kind, Document attrs) {
  if (attrs.is_null()) attrs = Document::object();
  if (!attrs.is_object()) schema(kind, "attributes must be an object");
  switch (kind) {
    case NodeKind::data_version: {
      auto it = attrs.find("version_id");
      if (it == attrs.end() || !it->is_number_unsigned()) {
        if (!(it != attrs.end() && it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
          schema(kind, "attribute 'version_id' must be an unsigned integer");
        }
      }
      break;
    }
    case NodeKind::model_version:
      require_string(kind, attrs, "architecture");
      if (attrs.contains("backbone") && !attrs["backbone"].is_string()) schema(kind, "'backbone' must be a string");
      break;
    case NodeKind::training_version:
      require_object(kind, attrs, "hyperparameters");
      normalize_ref(kind, attrs, "log_ref");
      normalize_ref(kind, attrs, "trained_model_ref");
      break;
    case NodeKind::inference_version:
      require_object(kind, attrs, "deployment_config");
      normalize_ref(kind, attrs, "deployed_model_ref");
      break;
    case NodeKind::metadata:
      require_string(kind, attrs, "category");
      break;
  }
  return attrs;
}

Document ModelMetadata::to_attributes() const {
  Document attrs = extra.is_object() ? extra : Document::object();
  attrs["architecture"] = architecture;
  if (!backbone.empty()) attrs["backbone"] = backbone;
  return attrs;
}

ModelMetadata ModelMetadata::from_attributes(const Document& attrs) {
  ModelMetadata m;
  m.architecture = attrs.value("architecture", "");
  m.backbone = attrs.value("backbone", "");
  m.extra = attrs;
  m.extra.erase("architecture");
  m.extra.erase("backbone");
  return m;
}

Document TrainingVersionRecord::to_attributes() const {
  return {{"hyperparameters", hyperparameters},
          {"log_ref", ref_value(log_ref)},
          {"trained_model_ref", ref_value(trained_model_ref)}};
}

TrainingVersionRecord TrainingVersionRecord::from_attributes(const Document& attrs) {
  return {attrs.value("hyperparameters", Document::object()), opt_string(attrs, "log_ref"),
          opt_string(attrs, "trained_model_ref")};
}

Document InferenceVersionRecord::to_attributes() const {
  return {{"deployment_config", deployment_config}, {"deployed_model_ref", ref_value(deployed_model_ref)}};
}

InferenceVersionRecord InferenceVersionRecord::from_attributes(const Document& attrs) {
  return {attrs.value("deployment_config", Document::object()), opt_string(attrs, "deployed_model_ref")};
}

// ---------------------------------------------------------------------------
// GraphBatch
// ---------------------------------------------------------------------------

std::optional<NodeKind> GraphBatch::kind_of(NodeId id) const {
  if (id.value >= base_ && id.value < base_ + nodes_.size()) return nodes_[id.value - base_].kind;
  std::shared_lock lock(graph_->mu_);
  return graph_->kind_locked(id);
}

NodeId GraphBatch::put_node(NodeKind kind, Document attributes) {
  LifecycleNode n{NodeId{base_ + nodes_.size()}, kind, normalize_attributes(kind, std::move(attributes))};
  nodes_.push_back(std::move(n));
  return nodes_.back().id;
}

void GraphBatch::link(NodeId from, NodeId to, Relation relation) {
  const auto fk = kind_of(from);
  const auto tk = kind_of(to);
  if (!fk) fail(ErrorCode::not_found, "link: unknown node " + std::to_string(from.value));
  if (!tk) fail(ErrorCode::not_found, "link: unknown node " + std::to_string(to.value));
  if (!relation_allowed(relation, *fk, *tk)) {
    fail(ErrorCode::type_mismatch, std::string("link: relation ") + std::string(to_string(relation)) +
                                       " not allowed from " + std::string(to_string(*fk)) + " to " +
                                       std::string(to_string(*tk)));
  }
  edges_.push_back({from, to, relation});
}

// ---------------------------------------------------------------------------
// LineageGraph
// ---------------------------------------------------------------------------

std::optional<NodeKind> LineageGraph::kind_locked(NodeId id) const {
  if (id.value >= nodes_.size()) return std::nullopt;
  return nodes_[id.value].kind;
}

GraphBatch LineageGraph::begin() const {
  std::shared_lock lock(mu_);
  return GraphBatch(this, nodes_.size());
}

NodeId LineageGraph::put_node(NodeKind kind, Document attributes) {
  auto batch = begin();
  batch.put_node(kind, std::move(attributes));
  return commit(batch).front();
}

LifecycleEdge LineageGraph::link(NodeId from, NodeId to, Relation relation) {
  auto batch = begin();
  batch.link(from, to, relation);
  commit(batch);
  return {from, to, relation};
}

bool LineageGraph::reaches_locked(NodeId from, NodeId target,
                                  const std::vector<LifecycleEdge>& extra) const {
  std::vector<std::uint64_t> stack{from.value};
  std::set<std::uint64_t> seen{from.value};
  while (!stack.empty()) {
    const auto cur = stack.back();
    stack.pop_back();
    if (cur == target.value) return true;
    auto visit = [&](const LifecycleEdge& e) {
      if (is_derivation(e.relation) && e.from.value == cur && seen.insert(e.to.value).second) {
        stack.push_back(e.to.value);
      }
    };
    if (cur < out_.size()) {
      for (auto idx : out_[cur]) visit(edges_[idx]);
    }
    for (const auto& e : extra) visit(e);
  }
  return false;
}

void LineageGraph::apply_locked(LifecycleNode node) {
  if (node.kind == NodeKind::data_version) {
    data_nodes_[node.attributes["version_id"].get<std::uint64_t>()] = node.id;
  }
  nodes_.push_back(std::move(node));
  out_.emplace_back();
  in_.emplace_back();
}

void LineageGraph::apply_locked(const LifecycleEdge& edge) {
  out_[edge.from.value].push_back(edges_.size());
  in_[edge.to.value].push_back(edges_.size());
  edges_.push_back(edge);
}

std::vector<NodeId> LineageGraph::commit(const GraphBatch& batch) {
  std::unique_lock lock(mu_);
  if (batch.graph_ != this) fail(ErrorCode::invalid_argument, "commit: batch belongs to another graph");
  if (batch.base_ != nodes_.size()) {
    fail(ErrorCode::precondition_failed, "commit: graph changed since the batch began");
  }
  const std::uint64_t end = batch.base_ + batch.nodes_.size();
  std::vector<LifecycleEdge> staged;
  for (const auto& e : batch.edges_) {
    if (e.from.value >= end || e.to.value >= end) fail(ErrorCode::not_found, "commit: dangling edge");
    const bool duplicate =
        std::find(staged.begin(), staged.end(), e) != staged.end() ||
        (e.from.value < out_.size() &&
         std::any_of(out_[e.from.value].begin(), out_[e.from.value].end(),
                     [&](std::size_t idx) { return edges_[idx] == e; }));
    if (duplicate) {
      fail(ErrorCode::duplicate_id, "link: edge " + std::to_string(e.from.value) + " -" +
                                            std::string(to_string(e.relation)) + "-> " +
                                            std::to_string(e.to.value) + " already exists");
    }
    if (is_derivation(e.relation) && reaches_locked(e.to, e.from, staged)) {
      fail(ErrorCode::cycle_detected, "link: " + std::string(to_string(e.relation)) + " edge " +
                                          std::to_string(e.from.value) + " -> " + std::to_string(e.to.value) +
                                          " would create a derivation cycle");
    }
    staged.push_back(e);
  }

  if (manifest_) {
    std::vector<Blob> recs;
    for (const auto& n : batch.nodes_) {
      const auto s = encode_node(n).dump();
      recs.emplace_back(s.begin(), s.end());
    }
    for (const auto& e : batch.edges_) {
      const auto s = encode_edge(e).dump();
      recs.emplace_back(s.begin(), s.end());
    }
    if (!recs.empty()) manifest_->append(recs);
  }

  std::vector<NodeId> ids;
  for (const auto& n : batch.nodes_) {
    ids.push_back(n.id);
    apply_locked(n);
  }
  for (const auto& e : batch.edges_) apply_locked(e);
  return ids;
}

void LineageGraph::restore_node(LifecycleNode node) {
  std::unique_lock lock(mu_);
  if (node.id.value != nodes_.size()) fail(ErrorCode::format_error, "graph replay: out-of-order node id");
  node.attributes = normalize_attributes(node.kind, std::move(node.attributes));
  apply_locked(std::move(node));
}

void LineageGraph::restore_edge(LifecycleEdge edge) {
  std::unique_lock lock(mu_);
  const auto fk = kind_locked(edge.from);
  const auto tk = kind_locked(edge.to);
  if (!fk || !tk || !relation_allowed(edge.relation, *fk, *tk)) {
    fail(ErrorCode::format_error, "graph replay: invalid edge");
  }
  if (is_derivation(edge.relation) && reaches_locked(edge.to, edge.from, {})) {
    fail(ErrorCode::format_error, "graph replay: derivation cycle");
  }
  apply_locked(edge);
}

LifecycleNode LineageGraph::node(NodeId id) const {
  if (auto n = find_node(id)) return *n;
  fail(ErrorCode::not_found, "unknown node " + std::to_string(id.value));
}

std::optional<LifecycleNode> LineageGraph::find_node(NodeId id) const {
  std::shared_lock lock(mu_);
  if (id.value >= nodes_.size()) return std::nullopt;
  return nodes_[id.value];
}

std::vector<LifecycleNode> LineageGraph::nodes() const {
  std::shared_lock lock(mu_);
  return nodes_;
}

std::vector<LifecycleEdge> LineageGraph::edges() const {
  std::shared_lock lock(mu_);
  return edges_;
}

std::vector<LifecycleEdge> LineageGraph::out_edges(NodeId id) const {
  std::shared_lock lock(mu_);
  std::vector<LifecycleEdge> out;
  if (id.value < out_.size()) {
    for (auto idx : out_[id.value]) out.push_back(edges_[idx]);
  }
  return out;
}

std::vector<LifecycleEdge> LineageGraph::in_edges(NodeId id) const {
  std::shared_lock lock(mu_);
  std::vector<LifecycleEdge> out;
  if (id.value < in_.size()) {
    for (auto idx : in_[id.value]) out.push_back(edges_[idx]);
  }
  return out;
}

std::size_t LineageGraph::node_count() const {
  std::shared_lock lock(mu_);
  return nodes_.size();
}

std::size_t LineageGraph::edge_count() const {
  std::shared_lock lock(mu_);
  return edges_.size();
}

std::optional<NodeId> LineageGraph::data_node(VersionId version) const {
  std::shared_lock lock(mu_);
  auto it = data_nodes_.find(version.value);
  if (it == data_nodes_.end()) return std::nullopt;
  return it->second;
}

Subgraph LineageGraph::lifecycle_of(NodeId id) const { return lifecycle_of(id, kAllRelations); }

Subgraph LineageGraph::lifecycle_of(NodeId id, std::span<const Relation> relations) const {
  std::shared_lock lock(mu_);
  if (id.value >= nodes_.size()) fail(ErrorCode::not_found, "unknown node " + std::to_string(id.value));
  std::array<bool, kRelationCount> use{};
  for (auto r : relations) use[static_cast<std::size_t>(r)] = true;

  std::set<std::uint64_t> seen{id.value};
  std::set<std::size_t> edge_idx;
  std::vector<std::uint64_t> stack{id.value};
  while (!stack.empty()) {
    const auto cur = stack.back();
    stack.pop_back();
    auto walk = [&](const std::vector<std::size_t>& adj, bool outgoing) {
      for (auto idx : adj) {
        const auto& e = edges_[idx];
        if (!use[static_cast<std::size_t>(e.relation)]) continue;
        edge_idx.insert(idx);
        const auto next = outgoing ? e.to.value : e.from.value;
        if (seen.insert(next).second) stack.push_back(next);
      }
    };
    walk(out_[cur], true);
    walk(in_[cur], false);
  }

  Subgraph g;
  for (auto n : seen) g.nodes.push_back(nodes_[n]);
  for (auto idx : edge_idx) g.edges.push_back(edges_[idx]);
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

std::vector<AttributeDiff> LineageGraph::diff_models(NodeId a, NodeId b) const {
  const auto na = node(a);
  const auto nb = node(b);
  if (na.kind != NodeKind::model_version || nb.kind != NodeKind::model_version) {
    fail(ErrorCode::type_mismatch, "diff_models: both nodes must be model versions");
  }
  std::map<std::string, std::pair<Document, Document>> merged;
  for (auto& [path, value] : flatten(na.attributes)) merged[path].first = value;
  for (auto& [path, value] : flatten(nb.attributes)) merged[path].second = value;
  std::vector<AttributeDiff> out;
  for (auto& [path, values] : merged) {
    if (values.first != values.second) out.push_back({path, values.first, values.second});
  }
  return out;
}

bool LineageGraph::derivation_is_acyclic() const {
  std::shared_lock lock(mu_);
  // Kahn's algorithm over derivation edges.
  std::vector<std::size_t> indegree(nodes_.size(), 0);
  for (const auto& e : edges_) {
    if (is_derivation(e.relation)) ++indegree[e.to.value];
  }
  std::vector<std::uint64_t> ready;
  for (std::uint64_t i = 0; i < nodes_.size(); ++i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  std::size_t removed = 0;
  while (!ready.empty()) {
    const auto cur = ready.back();
    ready.pop_back();
    ++removed;
    for (auto idx : out_[cur]) {
      const auto& e = edges_[idx];
      if (is_derivation(e.relation) && --indegree[e.to.value] == 0) ready.push_back(e.to.value);
    }
  }
  return removed == nodes_.size();
}

Document LineageGraph::encode_node(const LifecycleNode& n) {
  return {{"type", "node"}, {"id", n.id.value}, {"kind", to_string(n.kind)}, {"attributes", n.attributes}};
}

Document LineageGraph::encode_edge(const LifecycleEdge& e) {
  return {{"type", "edge"}, {"from", e.from.value}, {"to", e.to.value}, {"relation", to_string(e.relation)}};
}

LifecycleNode LineageGraph::decode_node(const Document& doc) {
  return {NodeId{doc.at("id").get<std::uint64_t>()}, parse_node_kind(doc.at("kind").get<std::string>()),
          doc.value("attributes", Document::object())};
}

LifecycleEdge LineageGraph::decode_edge(const Document& doc) {
  return {NodeId{doc.at("from").get<std::uint64_t>()}, NodeId{doc.at("to").get<std::uint64_t>()},
          parse_relation(doc.at("relation").get<std::string>())};
}

void LineageGraph::export_jsonl(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  std::shared_lock lock(mu_);
  std::ofstream nodes(dir + "/nodes.jsonl", std::ios::trunc);
  std::ofstream edges(dir + "/edges.jsonl", std::ios::trunc);
  if (!nodes || !edges) fail(ErrorCode::io_error, "cannot write graph export to " + dir);
  for (const auto& n : nodes_) nodes << encode_node(n).dump() << '\n';
  for (const auto& e : edges_) edges << encode_edge(e).dump() << '\n';
}

void LineageGraph::import_jsonl(const std::string& dir, LineageGraph& into) {
  auto read_lines = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io_error, "cannot open " + path);
    std::vector<Document> docs;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) docs.push_back(Document::parse(line));
    }
    return docs;
  };
  auto batch = into.begin();
  for (const auto& d : read_lines(dir + "/nodes.jsonl")) {
    auto n = decode_node(d);
    if (batch.put_node(n.kind, n.attributes) != n.id) {
      fail(ErrorCode::format_error, "nodes.jsonl: ids must be dense and ascending from the target graph size");
    }
  }
  for (const auto& d : read_lines(dir + "/edges.jsonl")) {
    const auto e = decode_edge(d);
    batch.link(e.from, e.to, e.relation);
  }
  into.commit(batch);
}

}  // namespace veml
