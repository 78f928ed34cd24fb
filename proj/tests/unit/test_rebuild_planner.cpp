#include <doctest.h>

#include <chrono>
#include <thread>

#include "core_fixtures.hpp"
#include "oracles.hpp"
#include "repo_fixtures.hpp"
#include "temp_dir.hpp"
#include "veml/rebuild_planner.hpp"

using namespace veml;
using testutil::code_of;

namespace {

struct Drifted {
  std::unique_ptr<Repository> repo = Repository::in_memory();
  VersionId prior;    // D0821-sized
  VersionId drifted;  // D1018-sized
  SourceLifecycle base;
  Embeddings embeddings;
};

Drifted drifted_fixture(bool label_drifted = true, std::optional<std::string> trained = "weights://d0821") {
  Drifted f;
  f.prior = testutil::make_version(*f.repo, 1597, "D0821");
  f.drifted = testutil::make_version(*f.repo, 673, "D1018", VersionKind::testing, label_drifted);
  f.base = testutil::add_lifecycle(*f.repo, f.prior, "FasterRCNN", trained);
  const std::vector<GaussianCluster> c{{{0.0, 0.0, 0.0, 0.0}, 1.0}, {{5.0, 0.0, 0.0, 0.0}, 1.0}};
  f.embeddings = synth_embed(*f.repo->store().version(f.drifted), 4, 3, c);
  return f;
}

void annotate(Repository& repo, std::span<const SampleId> ids) {
  std::vector<AnnotationRecord> a;
  for (auto s : ids) a.push_back({s, AnnotationKind::class_label, "", {{"label", 1}}});
  repo.store().add_annotations(a);
}

}  // namespace

TEST_CASE("label counts for the drifted set") {
  CHECK(label_count(0.10, 673) == 67);
  CHECK(label_count(0.30, 673) == 201);
  CHECK(label_count(0.50, 673) == 336);
  CHECK(label_count(1.0, 673) == 673);
  CHECK(label_count(0.01, 10) == 1);
  CHECK(label_count(0.3, 10) == 3);
  for (std::size_t pm = 1; pm <= 1000; pm += 37)
    for (std::size_t n : {1u, 7u, 673u, 1597u}) CHECK(label_count(pm / 1000.0, n) == oracle::labels_for(pm, n));
  CHECK(code_of([] { label_count(0.0, 5); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { label_count(1.5, 5); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { label_count(0.5, 0); }) == ErrorCode::invalid_argument);
}

TEST_CASE("full training merges priors with the drifted set") {
  auto f = drifted_fixture();
  const std::vector<VersionId> priors{f.prior};
  const auto p = plan_full_training(*f.repo, priors, f.drifted, f.base.model, f.base.training);
  CHECK(f.repo->store().version(p.training_data)->size() == 2270);
  CHECK(p.labeling_request.size() == 673);
  CHECK(p.labeling_request == f.repo->store().version(f.drifted)->sample_ids);
  CHECK(p.model_spec["architecture"] == "FasterRCNN");
  CHECK(p.training_spec["hyperparameters"]["epochs"] == 12);
  CHECK(code_of([&] { plan_full_training(*f.repo, {}, f.drifted, f.base.model, f.base.training); }) ==
        ErrorCode::precondition_failed);
}

TEST_CASE("two disjoint priors add up") {
  auto f = drifted_fixture();
  const auto extra = testutil::make_version(*f.repo, 40, "extra");
  const std::vector<VersionId> priors{f.prior, extra};
  const auto p = plan_full_training(*f.repo, priors, f.drifted, f.base.model, f.base.training);
  CHECK(f.repo->store().version(p.training_data)->size() == 1597 + 40 + 673);
}

TEST_CASE("transfer learning starts from the trained model") {
  auto f = drifted_fixture();
  const auto p = plan_transfer_learning(*f.repo, f.drifted, f.base.model, f.base.training);
  CHECK(p.training_data == f.drifted);
  CHECK(p.labeling_request.size() == 673);
  CHECK(p.training_spec["pretrained_model_ref"] == "weights://d0821");

  const auto one = testutil::make_version(*f.repo, 1, "one", VersionKind::testing);
  CHECK(plan_transfer_learning(*f.repo, one, f.base.model, f.base.training).labeling_request.size() == 1);

  auto g = drifted_fixture(true, std::nullopt);
  CHECK(code_of([&] { plan_transfer_learning(*g.repo, g.drifted, g.base.model, g.base.training); }) ==
        ErrorCode::missing_pretrained);
  CHECK(code_of([&] { plan_transfer_learning(*g.repo, g.drifted, g.base.training, g.base.training); }) ==
        ErrorCode::type_mismatch);
}

TEST_CASE("active learning labels a coreset of the drifted set") {
  auto f = drifted_fixture();
  const std::vector<VersionId> priors{f.prior};
  for (auto [ratio, want] : {std::pair{0.1, 67u}, std::pair{0.3, 201u}, std::pair{0.5, 336u}}) {
    const auto p = plan_active_learning(*f.repo, priors, f.drifted, ratio, f.embeddings, 5, f.base.model,
                                        f.base.training);
    CHECK(p.labeling_request.size() == want);
    CHECK(std::is_sorted(p.labeling_request.begin(), p.labeling_request.end()));
    CHECK(f.repo->store().version(p.training_data)->size() == 1597 + want);
    auto core = kcenter_greedy(f.embeddings, want, 5);
    std::sort(core.center_samples.begin(), core.center_samples.end());
    CHECK(core.center_samples == p.labeling_request);
  }
  const auto all = plan_active_learning(*f.repo, {}, f.drifted, 1.0, f.embeddings, 5, f.base.model,
                                        f.base.training);
  CHECK(all.labeling_request == f.repo->store().version(f.drifted)->sample_ids);
  CHECK(f.repo->store().version(all.training_data)->sample_ids == all.labeling_request);
}

TEST_CASE("plans round trip through JSON") {
  auto f = drifted_fixture();
  const auto p = plan_active_learning(*f.repo, {}, f.drifted, 0.1, f.embeddings, 2, f.base.model, f.base.training);
  const auto text = p.to_document().dump();
  CHECK(RebuildPlan::from_document(Document::parse(text)).to_document().dump() == text);
  auto doc = p.to_document();
  doc["ratio"] = nullptr;
  CHECK(code_of([&] { RebuildPlan::from_document(doc); }) == ErrorCode::invalid_argument);
}

TEST_CASE("latest base") {
  auto f = drifted_fixture();
  const auto b = latest_base(*f.repo);
  CHECK(b.model == f.base.model);
  CHECK(b.training == f.base.training);
  CHECK(b.priors == std::vector<VersionId>{f.prior});
  auto empty = Repository::in_memory();
  CHECK(code_of([&] { latest_base(*empty); }) == ErrorCode::not_found);
}

TEST_CASE("execute with the mock trainer") {
  auto f = drifted_fixture();
  const auto p = plan_transfer_learning(*f.repo, f.drifted, f.base.model, f.base.training);
  MockTrainer mock({{"mAP", 0.584}, {"minutes", 20}});
  const auto n0 = f.repo->graph().node_count();
  const auto a = execute(*f.repo, p, mock, 7);
  const auto b = execute(*f.repo, p, mock, 7);
  CHECK(mock.calls() == 2);
  CHECK(f.repo->graph().node_count() == n0 + 4);
  CHECK(a.training != b.training);
  const auto& g = f.repo->graph();
  CHECK(g.node(a.training).attributes["metrics"] == g.node(b.training).attributes["metrics"]);
  CHECK(g.node(a.training).attributes["metrics"]["mAP"] == 0.584);
  CHECK(g.node(a.training).attributes["trained_model_ref"] == a.result.trained_model_ref);
  CHECK(a.result.trained_model_ref == b.result.trained_model_ref);
  CHECK(a.result.trained_model_ref.rfind("mock://model/", 0) == 0);
  CHECK(g.node(a.training).attributes["pretrained_model_ref"] == "weights://d0821");
  CHECK(g.node(a.training).attributes["method"] == "transfer_learning");

  std::map<Relation, std::size_t> rel;
  for (auto id : {a.model, a.training})
    for (const auto& e : g.out_edges(id)) ++rel[e.relation];
  CHECK(rel[Relation::derived_from] == 3);
  CHECK(rel[Relation::trained_on] == 1);
  CHECK(g.derivation_is_acyclic());
}

TEST_CASE("missing labels block execution") {
  auto f = drifted_fixture(false);
  const auto p = plan_transfer_learning(*f.repo, f.drifted, f.base.model, f.base.training);
  std::vector<SampleId> all = p.labeling_request;
  const SampleId held = all[100];
  all.erase(all.begin() + 100);
  annotate(*f.repo, all);
  MockTrainer mock;
  const auto n0 = f.repo->graph().node_count();
  try {
    execute(*f.repo, p, mock, 1);
    FAIL("expected labeling_incomplete");
  } catch (const LabelingIncompleteError& e) {
    CHECK(e.outstanding() == std::vector<std::uint64_t>{held.value});
    CHECK(e.code() == ErrorCode::labeling_incomplete);
    CHECK(std::string(e.what()).starts_with("1 requested samples lack annotations: " + std::to_string(held.value)));
  }
  CHECK(mock.calls() == 0);
  CHECK(f.repo->graph().node_count() == n0);
  const SampleId one[1] = {held};
  annotate(*f.repo, one);
  execute(*f.repo, p, mock, 1);
  CHECK(f.repo->graph().node_count() == n0 + 2);
}

TEST_CASE("failed or cancelled training leaves the graph alone") {
  auto f = drifted_fixture();
  const auto p = plan_transfer_learning(*f.repo, f.drifted, f.base.model, f.base.training);
  MockTrainer mock;
  const auto n0 = f.repo->graph().node_count(), e0 = f.repo->graph().edge_count();
  mock.fail_next("out of memory");
  CHECK(code_of([&] { execute(*f.repo, p, mock, 1); }) == ErrorCode::trainer_failure);
  std::stop_source stop;
  stop.request_stop();
  CHECK(code_of([&] { execute(*f.repo, p, mock, 1, stop.get_token()); }) == ErrorCode::cancelled);
  CHECK(f.repo->graph().node_count() == n0);
  CHECK(f.repo->graph().edge_count() == e0);
}

TEST_CASE("external command trainer") {
  testutil::TempDir dir;
  auto f = drifted_fixture();
  const auto p = plan_transfer_learning(*f.repo, f.drifted, f.base.model, f.base.training);

  SUBCASE("reads the result file") {
    ExternalCommandTrainer t(
        "test -s \"$VEML_WORK_DIR/checkout.bin\" && grep -q checkout_path \"$VEML_WORK_DIR/config.json\" && "
        "printf '{\"trained_model_ref\":\"ext://m1\",\"metrics\":{\"mAP\":0.5}}' > \"$VEML_WORK_DIR/result.json\"",
        (dir / "work").string());
    const auto r = execute(*f.repo, p, t, 3);
    CHECK(r.result.trained_model_ref == "ext://m1");
    CHECK(f.repo->graph().node(r.training).attributes["metrics"]["mAP"] == 0.5);
  }
  SUBCASE("nonzero exit fails") {
    ExternalCommandTrainer t("exit 4", (dir / "work").string());
    CHECK(code_of([&] { execute(*f.repo, p, t, 3); }) == ErrorCode::trainer_failure);
  }
  SUBCASE("missing result fails") {
    ExternalCommandTrainer t("true", (dir / "work").string());
    CHECK(code_of([&] { execute(*f.repo, p, t, 3); }) == ErrorCode::trainer_failure);
  }
  SUBCASE("stop kills a running command") {
    ExternalCommandTrainer t("sleep 30", (dir / "work").string());
    std::stop_source stop;
    std::jthread stopper([&] {
      std::this_thread::sleep_for(std::chrono::milliseconds(150));
      stop.request_stop();
    });
    const auto t0 = std::chrono::steady_clock::now();
    CHECK(code_of([&] { execute(*f.repo, p, t, 3, stop.get_token()); }) == ErrorCode::cancelled);
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(10));
  }
  CHECK(f.repo->graph().derivation_is_acyclic());
}
