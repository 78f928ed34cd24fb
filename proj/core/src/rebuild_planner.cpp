#include "veml/rebuild_planner.hpp"

#include <algorithm>
#include <cmath>

#include "veml/coreset.hpp"
#include "veml/error.hpp"
#include "veml/repository.hpp"

namespace veml {

namespace {

void check_base(const Repository& repo, NodeId model, NodeId training) {
  const auto& g = repo.graph();
  if (g.node(model).kind != NodeKind::model_version) {
    fail(ErrorCode::type_mismatch, "node " + std::to_string(model.value) + " is not a model_version");
  }
  if (g.node(training).kind != NodeKind::training_version) {
    fail(ErrorCode::type_mismatch, "node " + std::to_string(training.value) + " is not a training_version");
  }
}

RebuildPlan base_plan(const Repository& repo, RebuildMethod method, VersionId drifted, NodeId model,
                      NodeId training) {
  check_base(repo, model, training);
  RebuildPlan p;
  p.method = method;
  p.drifted = drifted;
  p.base_model = model;
  p.base_training = training;
  // Same architecture and hyperparameters as the lifecycle being rebuilt.
  p.model_spec = repo.graph().node(model).attributes;
  p.training_spec = {{"hyperparameters",
                      TrainingVersionRecord::from_attributes(repo.graph().node(training).attributes).hyperparameters},
                     {"pretrained_model_ref", nullptr}};
  p.labeling_request = repo.store().version(drifted)->sample_ids;
  return p;
}

std::string label(std::string_view what, VersionId v) { return std::string(what) + ":v" + std::to_string(v.value); }

}  // namespace

std::string_view to_string(RebuildMethod m) noexcept {
  switch (m) {
    case RebuildMethod::full_training: return "full_training";
    case RebuildMethod::transfer_learning: return "transfer_learning";
    case RebuildMethod::active_learning: return "active_learning";
  }
  return "?";
}

RebuildMethod parse_rebuild_method(std::string_view name) {
  if (name == "full_training" || name == "full") return RebuildMethod::full_training;
  if (name == "transfer_learning" || name == "transfer") return RebuildMethod::transfer_learning;
  if (name == "active_learning" || name == "active") return RebuildMethod::active_learning;
  fail(ErrorCode::invalid_argument, "unknown rebuild method '" + std::string(name) + "'");
}

std::size_t label_count(double ratio, std::size_t n) {
  if (!std::isfinite(ratio) || ratio <= 0.0 || ratio > 1.0) {
    fail(ErrorCode::invalid_argument, "ratio must be in (0, 1], got " + std::to_string(ratio));
  }
  if (n == 0) fail(ErrorCode::invalid_argument, "cannot select from an empty version");
  // The small slack keeps products like 0.3 * 10 from landing just below 3.
  const auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

Document RebuildPlan::to_document() const {
  Document pri = Document::array();
  for (auto v : priors) pri.push_back(v.value);
  Document req = Document::array();
  for (auto s : labeling_request) req.push_back(s.value);
  return {{"method", std::string(to_string(method))},
          {"ratio", ratio ? Document(*ratio) : Document(nullptr)},
          {"seed", seed ? Document(*seed) : Document(nullptr)},
          {"drifted_version_id", drifted.value},
          {"prior_version_ids", pri},
          {"training_data_version_id", training_data.value},
          {"base_model", base_model.value},
          {"base_training", base_training.value},
          {"model_spec", model_spec},
          {"training_spec", training_spec},
          {"labeling_request", req}};
}

RebuildPlan RebuildPlan::from_document(const Document& doc) {
  RebuildPlan p;
  try {
    p.method = parse_rebuild_method(doc.at("method").get<std::string>());
    if (!doc.at("ratio").is_null()) p.ratio = doc["ratio"].get<double>();
    if (!doc.at("seed").is_null()) p.seed = doc["seed"].get<std::uint64_t>();
    p.drifted = VersionId{doc.at("drifted_version_id").get<std::uint64_t>()};
    for (const auto& v : doc.at("prior_version_ids")) p.priors.emplace_back(v.get<std::uint64_t>());
    p.training_data = VersionId{doc.at("training_data_version_id").get<std::uint64_t>()};
    p.base_model = NodeId{doc.at("base_model").get<std::uint64_t>()};
    p.base_training = NodeId{doc.at("base_training").get<std::uint64_t>()};
    p.model_spec = doc.at("model_spec");
    p.training_spec = doc.at("training_spec");
    for (const auto& s : doc.at("labeling_request")) p.labeling_request.emplace_back(s.get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::invalid_argument, std::string("malformed rebuild plan: ") + e.what());
  }
  if (!p.model_spec.is_object() || !p.training_spec.is_object() ||
      !p.training_spec.value("hyperparameters", Document()).is_object()) {
    fail(ErrorCode::invalid_argument, "malformed rebuild plan: model_spec/training_spec");
  }
  if ((p.method == RebuildMethod::active_learning) != p.ratio.has_value()) {
    fail(ErrorCode::invalid_argument, "malformed rebuild plan: ratio is set exactly for active learning");
  }
  return p;
}

RebuildBase latest_base(const Repository& repo) {
  const auto& g = repo.graph();
  const auto nodes = g.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    if (it->kind != NodeKind::training_version) continue;
    std::optional<NodeId> model;
    std::vector<VersionId> priors;
    for (const auto& e : g.in_edges(it->id)) {
      if (e.relation == Relation::derived_from && g.node(e.from).kind == NodeKind::model_version) {
        if (!model || e.from > *model) model = e.from;
      }
    }
    if (!model) continue;
    for (const auto& e : g.out_edges(it->id)) {
      if (e.relation == Relation::trained_on) {
        priors.emplace_back(g.node(e.to).attributes.at("version_id").get<std::uint64_t>());
      }
    }
    std::sort(priors.begin(), priors.end());
    return {*model, it->id, std::move(priors)};
  }
  fail(ErrorCode::not_found, "no trained lifecycle to rebuild from (need a training_version with a model derived from it)");
}

RebuildPlan plan_full_training(Repository& repo, std::span<const VersionId> priors, VersionId drifted,
                               NodeId base_model, NodeId base_training) {
  if (priors.empty()) {
    fail(ErrorCode::precondition_failed, "full training needs at least one prior training version to merge");
  }
  auto p = base_plan(repo, RebuildMethod::full_training, drifted, base_model, base_training);
  p.priors.assign(priors.begin(), priors.end());
  std::vector<VersionId> ids(priors.begin(), priors.end());
  ids.push_back(drifted);
  p.training_data = repo.store().merge_versions(ids, VersionKind::training, label("rebuild-full", drifted));
  return p;
}

RebuildPlan plan_transfer_learning(Repository& repo, VersionId drifted, NodeId base_model, NodeId base_training) {
  auto p = base_plan(repo, RebuildMethod::transfer_learning, drifted, base_model, base_training);
  const auto t = TrainingVersionRecord::from_attributes(repo.graph().node(base_training).attributes);
  if (!t.trained_model_ref) {
    fail(ErrorCode::missing_pretrained,
         "training version " + std::to_string(base_training.value) + " has no trained_model_ref to start from");
  }
  p.training_spec["pretrained_model_ref"] = *t.trained_model_ref;
  p.training_data = drifted;
  return p;
}

RebuildPlan plan_active_learning(Repository& repo, std::span<const VersionId> priors, VersionId drifted,
                                 double ratio, const Embeddings& drifted_embeddings, std::uint64_t seed,
                                 NodeId base_model, NodeId base_training) {
  const auto version = repo.store().version(drifted);
  const auto k = label_count(ratio, version->size());
  check_covers_version(drifted_embeddings.manifest, *version);

  auto p = base_plan(repo, RebuildMethod::active_learning, drifted, base_model, base_training);
  p.ratio = ratio;
  p.seed = seed;
  p.priors.assign(priors.begin(), priors.end());

  const auto core = kcenter_greedy(drifted_embeddings, k, seed);
  p.labeling_request = core.center_samples;
  std::sort(p.labeling_request.begin(), p.labeling_request.end());

  Document ids = Document::array();
  for (auto s : p.labeling_request) ids.push_back(s.value);
  const auto selected = repo.store().filter_version(drifted, {{"sample_ids", ids}}, label("active-selection", drifted));
  if (priors.empty()) {
    p.training_data = selected;
  } else {
    std::vector<VersionId> merge(priors.begin(), priors.end());
    merge.push_back(selected);
    p.training_data = repo.store().merge_versions(merge, VersionKind::training, label("rebuild-active", drifted));
  }
  return p;
}

ExecuteResult execute(Repository& repo, const RebuildPlan& plan, Trainer& trainer, std::uint64_t seed,
                      std::stop_token stop) {
  check_base(repo, plan.base_model, plan.base_training);
  const auto data_node = repo.data_node(plan.training_data);

  std::vector<std::uint64_t> outstanding;
  for (auto s : plan.labeling_request) {
    if (!repo.store().has_annotations(s)) outstanding.push_back(s.value);
  }
  if (!outstanding.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < outstanding.size() && i < 20; ++i) ids += (i ? "," : "") + std::to_string(outstanding[i]);
    if (outstanding.size() > 20) ids += ",...";
    // Message first: argument evaluation order is unspecified.
    auto message = std::to_string(outstanding.size()) + " requested samples lack annotations: " + ids;
    throw LabelingIncompleteError(message, std::move(outstanding));
  }
  if (stop.stop_requested()) fail(ErrorCode::cancelled, "rebuild cancelled before training");

  TrainRequest request;
  request.config = {{"method", std::string(to_string(plan.method))},
                    {"seed", seed},
                    {"model", plan.model_spec},
                    {"training", plan.training_spec},
                    {"data_version_id", plan.training_data.value}};
  request.data_version = plan.training_data;
  request.repository = &repo;

  TrainResult result;
  try {
    result = trainer.train(request, stop);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorCode::trainer_failure, std::string("trainer failed: ") + e.what());
  }
  if (stop.stop_requested()) fail(ErrorCode::cancelled, "rebuild cancelled; training result discarded");

  auto batch = repo.graph().begin();
  const auto model = batch.put_node(NodeKind::model_version, plan.model_spec);
  Document training =
      TrainingVersionRecord{plan.training_spec.at("hyperparameters"), std::nullopt, result.trained_model_ref}
          .to_attributes();
  training["pretrained_model_ref"] = plan.training_spec.value("pretrained_model_ref", Document());
  training["metrics"] = result.metrics;
  training["method"] = std::string(to_string(plan.method));
  training["seed"] = seed;
  training["drifted_version_id"] = plan.drifted.value;
  training["labels_requested"] = plan.labeling_request.size();
  training["ratio"] = plan.ratio ? Document(*plan.ratio) : Document(nullptr);
  const auto train = batch.put_node(NodeKind::training_version, std::move(training));
  batch.link(model, plan.base_model, Relation::derived_from);
  batch.link(train, plan.base_training, Relation::derived_from);
  batch.link(train, data_node, Relation::trained_on);
  batch.link(model, train, Relation::derived_from);
  repo.graph().commit(batch);
  return {model, train, std::move(result)};
}

}  // namespace veml
