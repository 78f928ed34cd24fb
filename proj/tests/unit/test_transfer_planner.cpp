#include <doctest.h>

#include "core_fixtures.hpp"
#include "repo_fixtures.hpp"
#include "veml/transfer_planner.hpp"

using namespace veml;
using testutil::code_of;

namespace {

struct Registry {
  std::unique_ptr<Repository> repo = Repository::in_memory();
  VersionId target;
  std::map<std::string, NodeId> nodes;
  std::map<std::string, SourceLifecycle> lifecycles;
};

// Five source datasets with complete lifecycles and an unrelated target.
Registry driving_registry() {
  Registry r;
  for (const char* name : {"COCO", "BDD", "Cityscapes", "KITTI", "VOC"}) {
    const auto v = testutil::make_version(*r.repo, 4, name);
    r.lifecycles[name] = testutil::add_lifecycle(*r.repo, v, "FasterRCNN", std::string("weights://") + name);
    r.nodes[name] = r.repo->data_node(v);
  }
  r.target = testutil::make_version(*r.repo, 4, "ours");
  return r;
}

std::vector<RankedEntry> driving_row(double threshold) {
  return rank_distances(
      {{"COCO", 21.65}, {"BDD", 13.14}, {"Cityscapes", 10.59}, {"KITTI", 12.38}, {"VOC", 21.87}}, threshold);
}

TransferRequest request(const Registry& r, double threshold, std::size_t k_star) {
  TransferRequest q;
  q.target = r.target;
  q.threshold = threshold;
  q.k_star = k_star;
  return q;
}

}  // namespace

TEST_CASE("the driving-data row selects the three road datasets") {
  auto r = driving_registry();
  const auto plan = plan_from_ranking(*r.repo, request(r, 15.0, 3), driving_row(15.0), r.nodes);
  REQUIRE(plan.chosen.size() == 3);
  CHECK(plan.chosen[0].dataset_id == "Cityscapes");
  CHECK(plan.chosen[0].distance == 10.59);
  CHECK(plan.chosen[1].dataset_id == "KITTI");
  CHECK(plan.chosen[2].dataset_id == "BDD");
  CHECK(plan.recommendation == Recommendation::transfer);
  CHECK(plan.warnings.empty());
  CHECK(plan.chosen[0].config.pretrained_model_ref == "weights://Cityscapes");
  CHECK(plan.chosen[0].lifecycle.model == r.lifecycles["Cityscapes"].model);
}

TEST_CASE("nothing similar means training from scratch") {
  auto r = driving_registry();
  const auto plan = plan_from_ranking(*r.repo, request(r, 5.0, 3), driving_row(5.0), r.nodes);
  CHECK(plan.chosen.empty());
  CHECK(plan.recommendation == Recommendation::train_from_scratch);
  CHECK(code_of([&] { materialize_plan(*r.repo, plan); }) == ErrorCode::precondition_failed);
}

TEST_CASE("k_star caps the selection and ties go to the lower id") {
  auto r = driving_registry();
  const auto ranked = rank_distances({{"KITTI", 3.0}, {"BDD", 3.0}}, 5.0);
  const auto plan = plan_from_ranking(*r.repo, request(r, 5.0, 1), ranked, r.nodes);
  REQUIRE(plan.chosen.size() == 1);
  CHECK(plan.chosen[0].dataset_id == "BDD");
  CHECK(code_of([&] { plan_from_ranking(*r.repo, request(r, 5.0, 0), ranked, r.nodes); }) ==
        ErrorCode::invalid_argument);
}

TEST_CASE("incomplete lifecycles are skipped with a warning") {
  auto r = driving_registry();
  const auto bare = testutil::make_version(*r.repo, 2, "bare");
  r.nodes["bare"] = r.repo->data_node(bare);
  const auto ranked = rank_distances({{"bare", 1.0}, {"ghost", 2.0}, {"KITTI", 3.0}}, 5.0);
  const auto plan = plan_from_ranking(*r.repo, request(r, 5.0, 2), ranked, r.nodes);
  REQUIRE(plan.chosen.size() == 1);
  CHECK(plan.chosen[0].dataset_id == "KITTI");
  REQUIRE(plan.warnings.size() == 2);
  CHECK(plan.warnings[0].find("bare") == 0);
  CHECK(plan.warnings[1].find("ghost") == 0);
}

TEST_CASE("a lifecycle config carries all four sections") {
  auto r = driving_registry();
  std::string why;
  const auto lc = resolve_lifecycle(*r.repo, r.nodes["BDD"], &why);
  REQUIRE(lc);
  const auto cfg = lifecycle_config(*r.repo, *lc);
  CHECK(cfg.sections["model"]["architecture"] == "FasterRCNN");
  CHECK(cfg.sections["model"]["num_classes"] == 80);
  CHECK(cfg.sections["training"]["epochs"] == 12);
  CHECK(cfg.sections["inference"]["batch"] == 4);
  CHECK(cfg.sections["data_preparation"]["steps"].is_array());
  CHECK(cfg.section_sources.at("model") == lc->model);
  CHECK_FALSE(resolve_lifecycle(*r.repo, lc->model, &why));
  CHECK(why.find("not a data_version") != std::string::npos);
}

TEST_CASE("overrides") {
  Document base = {{"model", {{"num_classes", 80}, {"backbone", "ResNet50"}}}, {"training", {{"lr", 0.02}}}};
  SUBCASE("class count changes exactly one key") {
    const std::vector<ConfigOverride> o{parse_override("model.num_classes=10")};
    const auto out = apply_overrides(base, o);
    CHECK(out["model"]["num_classes"] == 10);
    const auto diff = Document::diff(base, out);
    REQUIRE(diff.size() == 1);
    CHECK(diff[0]["path"] == "/model/num_classes");
  }
  SUBCASE("no overrides is the identity") {
    CHECK(apply_overrides(base, {}).dump() == base.dump());
  }
  SUBCASE("last writer wins") {
    const std::vector<ConfigOverride> o{{"a.b", 1}, {"a.b", 2}};
    CHECK(apply_overrides(base, o)["a"]["b"] == 2);
  }
  SUBCASE("a scalar on the path is reported") {
    const std::vector<ConfigOverride> o{{"training.lr.x", 1}};
    try {
      apply_overrides(base, o);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::invalid_argument);
      CHECK(std::string(e.what()).find("'training.lr'") != std::string::npos);
    }
  }
  SUBCASE("values parse as JSON when they can") {
    CHECK(parse_override("a=[1,2]").value == Document::array({1, 2}));
    CHECK(parse_override("a=true").value == true);
    CHECK(parse_override("a=hello").value == "hello");
    CHECK(code_of([] { parse_override("novalue"); }) == ErrorCode::invalid_argument);
  }
  SUBCASE("lifecycle overrides must target a section") {
    LifecycleConfig c;
    const std::vector<ConfigOverride> bad{{"optimizer.lr", 1}};
    CHECK(code_of([&] { apply_overrides(c, bad); }) == ErrorCode::invalid_argument);
    const std::vector<ConfigOverride> shallow{{"model", 1}};
    CHECK(code_of([&] { apply_overrides(c, shallow); }) == ErrorCode::invalid_argument);
    const std::vector<ConfigOverride> ok{{"model.num_classes", 10}, {"model.num_classes", 12}};
    const auto out = apply_overrides(c, ok);
    CHECK(out.sections["model"]["num_classes"] == 12);
    CHECK(out.overridden_paths == std::vector<std::string>{"model.num_classes"});
  }
}

TEST_CASE("materializing one source adds three nodes and four edges") {
  auto r = driving_registry();
  auto q = request(r, 11.0, 3);
  q.overrides = {{"model.num_classes", 10}};
  const auto plan = plan_from_ranking(*r.repo, q, driving_row(11.0), r.nodes);
  REQUIRE(plan.chosen.size() == 1);
  const auto n0 = r.repo->graph().node_count(), e0 = r.repo->graph().edge_count();
  const auto ids = materialize_plan(*r.repo, plan);
  REQUIRE(ids.size() == 3);
  CHECK(r.repo->graph().node_count() == n0 + 3);
  CHECK(r.repo->graph().edge_count() == e0 + 4);

  const auto& g = r.repo->graph();
  CHECK(g.node(ids[0]).kind == NodeKind::model_version);
  CHECK(g.node(ids[0]).attributes["num_classes"] == 10);
  CHECK(g.node(ids[1]).attributes["pretrained_model_ref"] == "weights://Cityscapes");
  CHECK(g.node(ids[2]).kind == NodeKind::inference_version);
  std::size_t derived = 0, trained = 0;
  for (auto id : ids)
    for (const auto& e : g.out_edges(id)) {
      derived += e.relation == Relation::derived_from;
      trained += e.relation == Relation::trained_on;
      if (e.relation == Relation::trained_on) CHECK(e.to == r.repo->data_node(r.target));
    }
  CHECK(derived == 3);
  CHECK(trained == 1);
}

TEST_CASE("materializing three sources adds nine nodes and twelve edges") {
  auto r = driving_registry();
  const auto plan = plan_from_ranking(*r.repo, request(r, 15.0, 3), driving_row(15.0), r.nodes);
  const auto n0 = r.repo->graph().node_count(), e0 = r.repo->graph().edge_count();
  CHECK(materialize_plan(*r.repo, plan).size() == 9);
  CHECK(r.repo->graph().node_count() == n0 + 9);
  CHECK(r.repo->graph().edge_count() == e0 + 12);
  CHECK(r.repo->graph().derivation_is_acyclic());
}

TEST_CASE("plans are deterministic and survive serialization") {
  auto r = driving_registry();
  const auto a = plan_from_ranking(*r.repo, request(r, 15.0, 2), driving_row(15.0), r.nodes);
  const auto b = plan_from_ranking(*r.repo, request(r, 15.0, 2), driving_row(15.0), r.nodes);
  CHECK(a.to_document().dump() == b.to_document().dump());
  const auto back = TransferPlan::from_document(Document::parse(a.to_document().dump()));
  CHECK(back.to_document().dump() == a.to_document().dump());
  auto broken = a.to_document();
  broken["recommendation"] = "train_from_scratch";
  CHECK(code_of([&] { TransferPlan::from_document(broken); }) == ErrorCode::invalid_argument);
}

TEST_CASE("planning from coresets ranks by coreset distance") {
  auto r = driving_registry();
  std::vector<RegistryEntry> reg;
  const double pos[5] = {21.65, 13.14, 10.59, 12.38, 21.87};
  const char* names[5] = {"COCO", "BDD", "Cityscapes", "KITTI", "VOC"};
  for (int i = 0; i < 5; ++i) {
    reg.push_back({names[i], r.nodes[names[i]], testutil::core_of(EmbeddingMatrix::from_rows({{pos[i]}}))});
  }
  const auto target = testutil::core_of(EmbeddingMatrix::from_rows({{0.0}}));
  const auto plan = plan_transfer(*r.repo, target, reg, request(r, 15.0, 3));
  REQUIRE(plan.chosen.size() == 3);
  CHECK(plan.chosen[0].dataset_id == "Cityscapes");
  CHECK(plan.chosen[1].dataset_id == "KITTI");
  CHECK(plan.chosen[2].dataset_id == "BDD");
  CHECK(plan.chosen[2].distance == doctest::Approx(13.14).epsilon(1e-6));
  reg.push_back(reg.front());
  CHECK(code_of([&] { plan_transfer(*r.repo, target, reg, request(r, 15.0, 3)); }) == ErrorCode::duplicate_id);
}
