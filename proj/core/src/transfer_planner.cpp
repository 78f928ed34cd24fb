#include "veml/transfer_planner.hpp"

#include <algorithm>

#include "veml/error.hpp"
#include "veml/repository.hpp"

namespace veml {

namespace {

bool is_section(std::string_view name) {
  return std::find(kConfigSections.begin(), kConfigSections.end(), name) != kConfigSections.end();
}

Document ref_or_null(const std::optional<std::string>& ref) { return ref ? Document(*ref) : Document(nullptr); }

std::optional<std::string> opt_ref(const Document& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

// Highest-id node with an edge of the given relation into `to`, restricted to
// a node kind.
std::optional<NodeId> newest_source(const LineageGraph& g, NodeId to, Relation rel, NodeKind kind) {
  std::optional<NodeId> best;
  for (const auto& e : g.in_edges(to)) {
    if (e.relation != rel || g.node(e.from).kind != kind) continue;
    if (!best || e.from > *best) best = e.from;
  }
  return best;
}

}  // namespace

ConfigOverride parse_override(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    fail(ErrorCode::invalid_argument, "override must look like path=value, got '" + std::string(text) + "'");
  }
  ConfigOverride o;
  o.path = std::string(text.substr(0, eq));
  split_path(o.path);  // syntax check
  const auto raw = std::string(text.substr(eq + 1));
  o.value = Document::parse(raw, nullptr, false);
  if (o.value.is_discarded()) o.value = raw;
  return o;
}

Document apply_overrides(Document doc, std::span<const ConfigOverride> overrides) {
  if (doc.is_null()) doc = Document::object();
  for (const auto& o : overrides) {
    const auto parts = split_path(o.path);
    Document* cur = &doc;
    std::string prefix;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!cur->is_object()) {
        fail(ErrorCode::invalid_argument, "override '" + o.path + "': '" + prefix + "' is not an object");
      }
      prefix += (prefix.empty() ? "" : ".") + parts[i];
      cur = &(*cur)[parts[i]];
      if (cur->is_null()) *cur = Document::object();
    }
    if (!cur->is_object()) {
      fail(ErrorCode::invalid_argument, "override '" + o.path + "': '" + prefix + "' is not an object");
    }
    (*cur)[parts.back()] = o.value;
  }
  return doc;
}

Document LifecycleConfig::empty_sections() {
  Document d = Document::object();
  for (auto s : kConfigSections) d[std::string(s)] = Document::object();
  return d;
}

Document LifecycleConfig::to_document() const {
  Document prov = Document::object();
  for (const auto& [section, node] : section_sources) prov[section] = node.value;
  return {{"sections", sections},
          {"provenance", prov},
          {"pretrained_model_ref", ref_or_null(pretrained_model_ref)},
          {"overrides", overridden_paths}};
}

LifecycleConfig LifecycleConfig::from_document(const Document& doc) {
  LifecycleConfig c;
  c.sections = doc.at("sections");
  for (auto s : kConfigSections) {
    if (!c.sections.contains(std::string(s)) || !c.sections[std::string(s)].is_object()) {
      fail(ErrorCode::invalid_argument, "lifecycle config lacks section '" + std::string(s) + "'");
    }
  }
  for (const auto& [k, v] : doc.at("provenance").items()) c.section_sources.emplace(k, NodeId{v.get<std::uint64_t>()});
  c.pretrained_model_ref = opt_ref(doc, "pretrained_model_ref");
  c.overridden_paths = doc.value("overrides", std::vector<std::string>{});
  return c;
}

LifecycleConfig apply_overrides(LifecycleConfig config, std::span<const ConfigOverride> overrides) {
  for (const auto& o : overrides) {
    const auto parts = split_path(o.path);
    if (!is_section(parts.front())) {
      fail(ErrorCode::invalid_argument, "override '" + o.path + "': unknown section '" + parts.front() +
                                            "' (expected data_preparation, model, training or inference)");
    }
    if (parts.size() < 2) {
      fail(ErrorCode::invalid_argument, "override '" + o.path + "' must name a key inside a section");
    }
  }
  config.sections = apply_overrides(std::move(config.sections), overrides);
  for (const auto& o : overrides) {
    if (std::find(config.overridden_paths.begin(), config.overridden_paths.end(), o.path) ==
        config.overridden_paths.end()) {
      config.overridden_paths.push_back(o.path);
    }
  }
  return config;
}

std::optional<SourceLifecycle> resolve_lifecycle(const Repository& repo, NodeId data_node, std::string* why) {
  const auto& g = repo.graph();
  auto miss = [&](std::string text) -> std::optional<SourceLifecycle> {
    if (why) *why = std::move(text);
    return std::nullopt;
  };
  const auto data = g.find_node(data_node);
  if (!data || data->kind != NodeKind::data_version) {
    return miss("node " + std::to_string(data_node.value) + " is not a data_version node");
  }

  // Training runs on this data, newest first; take the first one that leads
  // to a model and a deployment.
  std::vector<NodeId> trainings;
  for (const auto& e : g.in_edges(data_node)) {
    if (e.relation == Relation::trained_on) trainings.push_back(e.from);
  }
  if (trainings.empty()) return miss("no training_version is trained_on data node " + std::to_string(data_node.value));
  std::sort(trainings.rbegin(), trainings.rend());
  std::string last = "no model derived from its training versions";
  for (auto t : trainings) {
    const auto model = newest_source(g, t, Relation::derived_from, NodeKind::model_version);
    if (!model) continue;
    const auto inference = newest_source(g, *model, Relation::deployed_from, NodeKind::inference_version);
    if (!inference) {
      last = "model " + std::to_string(model->value) + " has no inference_version deployed from it";
      continue;
    }
    return SourceLifecycle{data_node, VersionId{data->attributes.at("version_id").get<std::uint64_t>()}, t, *model,
                           *inference};
  }
  return miss(last);
}

LifecycleConfig lifecycle_config(const Repository& repo, const SourceLifecycle& source) {
  const auto& g = repo.graph();
  LifecycleConfig c;
  const auto version = repo.store().version(source.version);
  c.sections["data_preparation"] = {{"steps", version->preparation.to_document()}};

  auto model = g.node(source.model).attributes;
  c.sections["model"] = model;

  const auto training = TrainingVersionRecord::from_attributes(g.node(source.training).attributes);
  c.sections["training"] = training.hyperparameters;
  c.pretrained_model_ref = training.trained_model_ref;

  const auto inference = InferenceVersionRecord::from_attributes(g.node(source.inference).attributes);
  c.sections["inference"] = inference.deployment_config;

  c.section_sources = {{"data_preparation", source.data},
                       {"model", source.model},
                       {"training", source.training},
                       {"inference", source.inference}};
  return c;
}

std::string_view to_string(Recommendation r) noexcept {
  return r == Recommendation::transfer ? "transfer" : "train_from_scratch";
}

Document TransferPlan::to_document() const {
  Document r = Document::array();
  for (const auto& e : ranked) {
    r.push_back({{"dataset_id", e.dataset_id}, {"distance", e.distance}, {"highly_similar", e.highly_similar}});
  }
  Document c = Document::array();
  for (const auto& s : chosen) {
    c.push_back({{"dataset_id", s.dataset_id},
                 {"distance", s.distance},
                 {"lifecycle",
                  {{"data", s.lifecycle.data.value},
                   {"version_id", s.lifecycle.version.value},
                   {"training", s.lifecycle.training.value},
                   {"model", s.lifecycle.model.value},
                   {"inference", s.lifecycle.inference.value}}},
                 {"config", s.config.to_document()}});
  }
  return {{"target_version_id", target.value},
          {"metric", std::string(to_string(metric))},
          {"threshold", threshold},
          {"k_star", k_star},
          {"ranked", r},
          {"chosen", c},
          {"recommendation", std::string(to_string(recommendation))},
          {"warnings", warnings}};
}

TransferPlan TransferPlan::from_document(const Document& doc) {
  TransferPlan p;
  try {
    p.target = VersionId{doc.at("target_version_id").get<std::uint64_t>()};
    p.metric = parse_similarity_metric(doc.at("metric").get<std::string>());
    p.threshold = doc.at("threshold").get<double>();
    p.k_star = doc.at("k_star").get<std::size_t>();
    for (const auto& e : doc.at("ranked")) {
      p.ranked.push_back({e.at("dataset_id").get<std::string>(), e.at("distance").get<double>(),
                          e.at("highly_similar").get<bool>()});
    }
    for (const auto& s : doc.at("chosen")) {
      const auto& l = s.at("lifecycle");
      p.chosen.push_back({s.at("dataset_id").get<std::string>(),
                          s.at("distance").get<double>(),
                          {NodeId{l.at("data").get<std::uint64_t>()}, VersionId{l.at("version_id").get<std::uint64_t>()},
                           NodeId{l.at("training").get<std::uint64_t>()}, NodeId{l.at("model").get<std::uint64_t>()},
                           NodeId{l.at("inference").get<std::uint64_t>()}},
                          LifecycleConfig::from_document(s.at("config"))});
    }
    const auto rec = doc.at("recommendation").get<std::string>();
    if (rec == "transfer") p.recommendation = Recommendation::transfer;
    else if (rec == "train_from_scratch") p.recommendation = Recommendation::train_from_scratch;
    else fail(ErrorCode::invalid_argument, "unknown recommendation '" + rec + "'");
    p.warnings = doc.value("warnings", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::invalid_argument, std::string("malformed transfer plan: ") + e.what());
  }
  if ((p.recommendation == Recommendation::transfer) == p.chosen.empty()) {
    fail(ErrorCode::invalid_argument, "transfer plan recommendation disagrees with its chosen sources");
  }
  return p;
}

TransferPlan plan_from_ranking(const Repository& repo, const TransferRequest& request,
                               std::vector<RankedEntry> ranked,
                               const std::map<std::string, NodeId>& data_nodes) {
  if (request.k_star == 0) fail(ErrorCode::invalid_argument, "k_star must be at least 1");
  TransferPlan plan;
  plan.target = request.target;
  plan.metric = request.metric;
  plan.threshold = request.threshold;
  plan.k_star = request.k_star;
  plan.ranked = std::move(ranked);

  for (const auto& entry : plan.ranked) {
    if (plan.chosen.size() == request.k_star) break;
    if (!entry.highly_similar) continue;
    auto it = data_nodes.find(entry.dataset_id);
    if (it == data_nodes.end()) {
      plan.warnings.push_back(entry.dataset_id + ": not registered in the lineage graph");
      continue;
    }
    std::string why;
    auto lifecycle = resolve_lifecycle(repo, it->second, &why);
    if (!lifecycle) {
      plan.warnings.push_back(entry.dataset_id + ": incomplete lifecycle, " + why);
      continue;
    }
    auto config = apply_overrides(lifecycle_config(repo, *lifecycle), request.overrides);
    plan.chosen.push_back({entry.dataset_id, entry.distance, *lifecycle, std::move(config)});
  }
  plan.recommendation = plan.chosen.empty() ? Recommendation::train_from_scratch : Recommendation::transfer;
  return plan;
}

TransferPlan plan_transfer(const Repository& repo, const CoreSet& target_core,
                           std::span<const RegistryEntry> registry, const TransferRequest& request) {
  std::vector<NamedCoreSet> named;
  std::map<std::string, NodeId> data_nodes;
  named.reserve(registry.size());
  for (const auto& r : registry) {
    if (!data_nodes.emplace(r.dataset_id, r.data_node).second) {
      fail(ErrorCode::duplicate_id, "registry lists dataset '" + r.dataset_id + "' twice");
    }
    named.push_back({r.dataset_id, r.core});
  }
  auto ranked = rank_similar(target_core, named, request.metric, request.threshold, request.gw, request.distance);
  return plan_from_ranking(repo, request, std::move(ranked), data_nodes);
}

std::vector<NodeId> materialize_plan(Repository& repo, const TransferPlan& plan) {
  if (plan.recommendation != Recommendation::transfer || plan.chosen.empty()) {
    fail(ErrorCode::precondition_failed, "plan recommends training from scratch; nothing to materialize");
  }
  auto& g = repo.graph();
  const auto target = repo.data_node(plan.target);
  auto batch = g.begin();
  std::vector<NodeId> created;
  for (const auto& src : plan.chosen) {
    const auto& s = src.config.sections;
    const auto model = batch.put_node(NodeKind::model_version, s.at("model"));

    Document training = TrainingVersionRecord{s.at("training"), std::nullopt, std::nullopt}.to_attributes();
    training["pretrained_model_ref"] = ref_or_null(src.config.pretrained_model_ref);
    training["data_preparation"] = s.at("data_preparation");
    const auto train = batch.put_node(NodeKind::training_version, std::move(training));

    const auto inference = batch.put_node(NodeKind::inference_version,
                                          InferenceVersionRecord{s.at("inference"), std::nullopt}.to_attributes());

    batch.link(model, src.lifecycle.model, Relation::derived_from);
    batch.link(train, src.lifecycle.training, Relation::derived_from);
    batch.link(inference, src.lifecycle.inference, Relation::derived_from);
    batch.link(train, target, Relation::trained_on);
    created.insert(created.end(), {model, train, inference});
  }
  g.commit(batch);
  return created;
}

}  // namespace veml
