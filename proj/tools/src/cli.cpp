#include "veml_cli/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "veml/coreset.hpp"
#include "veml/drift.hpp"
#include "veml/embedding_io.hpp"
#include "veml/error.hpp"
#include "veml/lineage_graph.hpp"
#include "veml/rebuild_planner.hpp"
#include "veml/repository.hpp"
#include "veml/similarity.hpp"
#include "veml/trainer.hpp"
#include "veml/transfer_planner.hpp"
#include "veml/version_store.hpp"
#include "veml_cli/report.hpp"

namespace veml::cli {

namespace {

namespace fs = std::filesystem;

class Session {
 public:
  Session(std::ostream& out, std::ostream& err, std::optional<std::string> env)
      : out(out), err(err), env_store_(std::move(env)) {}

  std::ostream& out;
  std::ostream& err;
  std::string store_flag;

  Repository& repo() {
    if (!repo_) {
      const auto dir = !store_flag.empty() ? store_flag : env_store_.value_or("");
      if (dir.empty()) fail(ErrorCode::invalid_argument, "no store given: pass --store DIR or set VEML_STORE");
      repo_ = Repository::open(dir);
    }
    return *repo_;
  }

  void print(const Document& doc) { out << doc.dump(2) << "\n"; }

 private:
  std::optional<std::string> env_store_;
  std::unique_ptr<Repository> repo_;
};

Document parse_json(const std::string& text, const std::string& what) {
  std::string body = text;
  if (!text.empty() && text.front() == '@') {
    const auto bytes = read_file(text.substr(1));
    body.assign(bytes.begin(), bytes.end());
  }
  auto doc = Document::parse(body, nullptr, false);
  if (doc.is_discarded()) fail(ErrorCode::invalid_argument, what + " is not valid JSON");
  return doc;
}

std::vector<Document> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open " + path);
  std::vector<Document> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto doc = Document::parse(line, nullptr, false);
    if (doc.is_discarded()) fail(ErrorCode::invalid_argument, path + ":" + std::to_string(lineno) + ": invalid JSON");
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::uint64_t parse_u64(std::string_view s, std::string_view what) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || s.empty()) {
    fail(ErrorCode::invalid_argument, std::string(what) + ": '" + std::string(s) + "' is not an unsigned integer");
  }
  return v;
}

// "0-9,12,20-21" with inclusive ranges.
std::vector<SampleId> parse_id_list(const std::string& text) {
  std::vector<SampleId> ids;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      ids.emplace_back(parse_u64(part, "sample id"));
      continue;
    }
    const auto lo = parse_u64(std::string_view(part).substr(0, dash), "sample id");
    const auto hi = parse_u64(std::string_view(part).substr(dash + 1), "sample id");
    if (hi < lo) fail(ErrorCode::invalid_argument, "bad sample range '" + part + "'");
    for (auto i = lo; i <= hi; ++i) ids.emplace_back(i);
  }
  return ids;
}

std::string format_id_list(std::vector<SampleId> ids) {
  std::sort(ids.begin(), ids.end());
  std::string out;
  for (const auto& r : compress_ranges(ids)) {
    if (!out.empty()) out += ',';
    out += std::to_string(r.first.value);
    if (r.count > 1) out += "-" + std::to_string(r.first.value + r.count - 1);
  }
  return out;
}

// Numeric id or unique version name.
VersionId resolve_version(const VersionStore& store, const std::string& ref) {
  if (!ref.empty() && std::all_of(ref.begin(), ref.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    const VersionId id{parse_u64(ref, "version")};
    store.version(id);
    return id;
  }
  std::optional<VersionId> found;
  for (const auto& v : store.versions()) {
    if (v->name != ref) continue;
    if (found) fail(ErrorCode::invalid_argument, "version name '" + ref + "' is ambiguous; use the numeric id");
    found = v->id;
  }
  if (!found) fail(ErrorCode::not_found, "no version named '" + ref + "'");
  return *found;
}

std::vector<VersionId> resolve_versions(const VersionStore& store, const std::vector<std::string>& refs) {
  std::vector<VersionId> ids;
  for (const auto& r : refs) ids.push_back(resolve_version(store, r));
  return ids;
}

std::string dataset_name(const DataVersion& v) { return v.name.empty() ? "v" + std::to_string(v.id.value) : v.name; }

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed, std::string_view what) {
  if (!seed) fail(ErrorCode::invalid_argument, std::string(what) + " is randomized; pass --seed");
  return *seed;
}

Document version_summary(const DataVersion& v) {
  auto doc = VersionStore::encode_version(v);
  doc.erase("type");
  doc["size"] = v.size();
  return doc;
}

Document subgraph_document(const Subgraph& g) {
  Document nodes = Document::array();
  for (const auto& n : g.nodes) {
    auto d = LineageGraph::encode_node(n);
    d.erase("type");
    nodes.push_back(std::move(d));
  }
  Document edges = Document::array();
  for (const auto& e : g.edges) {
    auto d = LineageGraph::encode_edge(e);
    d.erase("type");
    edges.push_back(std::move(d));
  }
  return {{"nodes", nodes}, {"edges", edges}};
}

void emit_table(Session& s, const ReportTable& t, const std::string& format) {
  if (format == "text") s.out << t.to_text();
  else s.out << t.to_csv();
}

GwParams gw_params(double epsilon) {
  GwParams p;
  p.epsilon = epsilon;
  return p;
}

// All option storage for every subcommand. CLI11 binds into these fields.
struct Options {
  // data
  std::vector<std::string> files;
  std::string dir;
  std::string annotations_file;
  std::optional<std::uint64_t> sample;
  std::string kind;
  std::string tag;
  std::string body = "{}";
  std::string samples;
  std::string prep = "[]";
  std::string version_kind = "training";
  std::string name;
  std::vector<std::string> versions;
  std::string version;
  std::string source;
  std::string predicate;
  std::string out_file;
  // graph
  std::string node_kind;
  std::string attrs = "{}";
  std::uint64_t from = 0, to = 0;
  std::string relation;
  std::optional<std::uint64_t> node;
  std::vector<std::string> relations;
  std::uint64_t a = 0, b = 0;
  // embed / coreset / similarity / drift
  std::string file;
  std::size_t dim = 0;
  std::optional<std::uint64_t> seed;
  std::vector<double> offsets{0.0};
  double sigma = 1.0;
  std::size_t k = kImageCoresetK;
  std::string metric = "coreset";
  bool full = false;
  bool normalize = false;
  double epsilon = 0.0;
  std::string format = "csv";
  std::string train;
  std::string test;
  bool json = false;
  std::vector<std::string> train_list;
  std::vector<std::string> test_list;
  // transfer
  std::string target;
  std::optional<double> threshold;
  std::optional<std::size_t> kstar;
  std::vector<std::string> registry;
  std::vector<std::string> overrides;
  bool apply = false;
  std::string plan_file;
  // rebuild
  std::string method;
  std::optional<double> ratio;
  std::string drifted;
  std::vector<std::string> priors;
  std::optional<std::uint64_t> model;
  std::optional<std::uint64_t> training;
  bool force = false;
  std::string trainer = "mock";
  std::string mock_metrics = "{}";
  std::string command;
  std::string work_dir;
  std::optional<double> baseline_accuracy;
};

// ---------------------------------------------------------------------------
// data

void data_add(Session& s, const Options& o) {
  std::vector<std::string> paths = o.files;
  if (!o.dir.empty()) {
    std::vector<std::string> found;
    for (const auto& e : fs::directory_iterator(o.dir)) {
      if (e.is_regular_file()) found.push_back(e.path().string());
    }
    std::sort(found.begin(), found.end());
    paths.insert(paths.end(), found.begin(), found.end());
  }
  if (paths.empty()) fail(ErrorCode::invalid_argument, "data add: give --file or --dir");
  std::vector<Blob> payloads;
  payloads.reserve(paths.size());
  for (const auto& p : paths) payloads.push_back(read_file(p));

  std::vector<NewAnnotation> anns;
  if (!o.annotations_file.empty()) {
    for (const auto& d : read_jsonl(o.annotations_file)) {
      NewAnnotation a;
      a.batch_index = d.at("index").get<std::size_t>();
      a.kind = parse_annotation_kind(d.value("kind", "class"));
      a.tag = d.value("tag", "");
      a.body = d.value("body", Document::object());
      anns.push_back(std::move(a));
    }
  }
  const auto ids = s.repo().store().add_samples(payloads, anns);
  s.print({{"sample_ids", format_id_list(ids)}, {"count", ids.size()}});
}

void data_annotate(Session& s, const Options& o) {
  std::vector<AnnotationRecord> recs;
  if (!o.annotations_file.empty()) {
    for (const auto& d : read_jsonl(o.annotations_file)) {
      recs.push_back({SampleId{d.at("sample_id").get<std::uint64_t>()}, parse_annotation_kind(d.value("kind", "class")),
                      d.value("tag", ""), d.value("body", Document::object())});
    }
  } else {
    if (!o.sample) fail(ErrorCode::invalid_argument, "data annotate: give --sample or --file");
    recs.push_back({SampleId{*o.sample}, parse_annotation_kind(o.kind.empty() ? "class" : o.kind), o.tag,
                    parse_json(o.body, "--body")});
  }
  s.repo().store().add_annotations(recs);
  s.print({{"annotations", recs.size()}});
}

void version_create(Session& s, const Options& o) {
  const auto ids = parse_id_list(o.samples);
  const auto prep = PreparationDescriptor::from_document(parse_json(o.prep, "--prep"));
  const auto id = s.repo().store().create_version(ids, prep, parse_version_kind(o.version_kind), o.name);
  s.print({{"version_id", id.value}});
}

void version_merge(Session& s, const Options& o) {
  auto& store = s.repo().store();
  const auto ids = resolve_versions(store, o.versions);
  const auto id = store.merge_versions(ids, parse_version_kind(o.version_kind), o.name);
  s.print({{"version_id", id.value}, {"size", store.version(id)->size()}});
}

void version_filter(Session& s, const Options& o) {
  auto& store = s.repo().store();
  const auto id = store.filter_version(resolve_version(store, o.source), parse_json(o.predicate, "--predicate"), o.name);
  s.print({{"version_id", id.value}, {"size", store.version(id)->size()}});
}

void version_reprepare(Session& s, const Options& o) {
  auto& store = s.repo().store();
  const auto id = store.reprepare_version(resolve_version(store, o.source),
                                          PreparationDescriptor::from_document(parse_json(o.prep, "--prep")), o.name);
  s.print({{"version_id", id.value}});
}

void version_checkout(Session& s, const Options& o) {
  auto& store = s.repo().store();
  const auto records = store.checkout(resolve_version(store, o.version));
  if (!o.out_file.empty()) {
    write_file_atomic(o.out_file, encode_checkout(records));
    s.print({{"records", records.size()}, {"path", o.out_file}});
    return;
  }
  for (const auto& r : records) {
    Document anns = Document::array();
    for (const auto& a : r.annotations) {
      anns.push_back({{"kind", std::string(to_string(a.kind))}, {"tag", a.tag}, {"body", a.body}});
    }
    s.out << Document{{"sample_id", r.sample_id.value},
                      {"content_hash", to_hex(r.content_hash)},
                      {"payload_size", r.payload.size()},
                      {"annotations", anns}}
                 .dump()
          << "\n";
  }
}

void version_list(Session& s) {
  for (const auto& v : s.repo().store().versions()) s.out << version_summary(*v).dump() << "\n";
}

void version_show(Session& s, const Options& o) {
  auto& store = s.repo().store();
  const auto v = store.version(resolve_version(store, o.version));
  auto doc = version_summary(*v);
  doc["sample_ids"] = format_id_list(v->sample_ids);
  s.print(doc);
}

// ---------------------------------------------------------------------------
// graph

void graph_add_node(Session& s, const Options& o) {
  const auto id = s.repo().graph().put_node(parse_node_kind(o.node_kind), parse_json(o.attrs, "--attrs"));
  s.print({{"node_id", id.value}});
}

void graph_link(Session& s, const Options& o) {
  const auto e = s.repo().graph().link(NodeId{o.from}, NodeId{o.to}, parse_relation(o.relation));
  s.print({{"from", e.from.value}, {"to", e.to.value}, {"relation", std::string(to_string(e.relation))}});
}

void graph_show(Session& s, const Options& o) {
  const auto& g = s.repo().graph();
  if (!o.node) {
    Subgraph all{g.nodes(), g.edges()};
    std::sort(all.edges.begin(), all.edges.end());
    s.print(subgraph_document(all));
    return;
  }
  if (o.relations.empty()) {
    s.print(subgraph_document(g.lifecycle_of(NodeId{*o.node})));
    return;
  }
  std::vector<Relation> rels;
  for (const auto& r : o.relations) rels.push_back(parse_relation(r));
  s.print(subgraph_document(g.lifecycle_of(NodeId{*o.node}, rels)));
}

void graph_diff(Session& s, const Options& o) {
  Document out = Document::array();
  for (const auto& d : s.repo().graph().diff_models(NodeId{o.a}, NodeId{o.b})) {
    out.push_back({{"path", d.path}, {"a", d.value_a}, {"b", d.value_b}});
  }
  s.print(out);
}

void graph_export(Session& s, const Options& o) {
  fs::create_directories(o.dir);
  s.repo().graph().export_jsonl(o.dir);
  s.print({{"nodes", s.repo().graph().node_count()}, {"edges", s.repo().graph().edge_count()}, {"dir", o.dir}});
}

// ---------------------------------------------------------------------------
// embeddings and coresets

Document embeddings_info(const Embeddings& e) {
  return {{"rows", e.matrix.rows},
          {"cols", e.matrix.cols},
          {"embedder_tag", e.manifest.embedder_tag},
          {"data_version_id", e.manifest.data_version_id ? Document(e.manifest.data_version_id->value) : Document()}};
}

void embed_import(Session& s, const Options& o) {
  auto& repo = s.repo();
  const auto id = resolve_version(repo.store(), o.version);
  auto e = read_embeddings(o.file);
  if (e.manifest.data_version_id && *e.manifest.data_version_id != id) {
    fail(ErrorCode::invalid_argument, o.file + " is bound to version " +
                                          std::to_string(e.manifest.data_version_id->value) + ", not " +
                                          std::to_string(id.value));
  }
  repo.put_embeddings(id, e);
  s.print(embeddings_info(repo.embeddings(id)));
}

void embed_synth(Session& s, const Options& o) {
  auto& repo = s.repo();
  const auto id = resolve_version(repo.store(), o.version);
  if (o.dim == 0) fail(ErrorCode::invalid_argument, "embed synth: --dim must be positive");
  std::vector<GaussianCluster> clusters;
  for (double off : o.offsets) clusters.push_back({std::vector<double>(o.dim, off), o.sigma});
  auto e = synth_embed(*repo.store().version(id), o.dim, require_seed(o.seed, "embed synth"), clusters);
  repo.put_embeddings(id, e);
  s.print(embeddings_info(repo.embeddings(id)));
}

void embed_info(Session& s, const Options& o) {
  if (!o.file.empty()) {
    s.print(embeddings_info(read_embeddings(o.file)));
    return;
  }
  auto& repo = s.repo();
  s.print(embeddings_info(repo.embeddings(resolve_version(repo.store(), o.version))));
}

void coreset_compute(Session& s, const Options& o) {
  auto& repo = s.repo();
  const auto id = resolve_version(repo.store(), o.version);
  const auto core = repo.coreset(id, o.k, require_seed(o.seed, "coreset compute"));
  std::vector<std::uint64_t> samples;
  for (auto x : core.center_samples) samples.push_back(x.value);
  s.print({{"version_id", id.value},
           {"k", core.k},
           {"seed", core.seed},
           {"covering_radius", core.covering_radius},
           {"center_samples", samples},
           {"embedder_tag", core.embedder_tag}});
}

void similarity(Session& s, const Options& o) {
  auto& repo = s.repo();
  const auto ids = resolve_versions(repo.store(), o.versions);
  if (ids.size() < 2) fail(ErrorCode::invalid_argument, "similarity needs at least two --versions");
  const auto metric = parse_similarity_metric(o.metric);
  DistanceOptions dopt;
  dopt.l2_normalize = o.normalize;
  SimilarityMatrix m;
  if (metric == SimilarityMetric::fulldata_euclidean) {
    std::vector<NamedEmbeddings> named;
    for (auto id : ids) named.push_back({dataset_name(*repo.store().version(id)), repo.embeddings(id)});
    m = similarity_matrix(named, dopt);
  } else {
    const auto seed = require_seed(o.seed, "coreset similarity");
    std::vector<NamedCoreSet> named;
    for (auto id : ids) named.push_back({dataset_name(*repo.store().version(id)), repo.coreset(id, o.k, seed)});
    m = similarity_matrix(named, metric, gw_params(o.epsilon), dopt);
  }
  std::string body;
  if (o.format == "json") {
    Document values = Document::array();
    for (std::size_t i = 0; i < m.size(); ++i) {
      Document row = Document::array();
      for (std::size_t j = 0; j < m.size(); ++j) row.push_back(m.at(i, j));
      values.push_back(row);
    }
    body = Document{{"dataset_ids", m.dataset_ids}, {"metric", std::string(to_string(m.metric))}, {"values", values}}
               .dump(2) +
           "\n";
  } else {
    const auto t = distance_table(m, o.full);
    body = o.format == "text" ? t.to_text() : t.to_csv();
  }
  if (o.out_file.empty()) {
    s.out << body;
    return;
  }
  write_file_atomic(o.out_file, std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
  s.print({{"datasets", m.size()}, {"path", o.out_file}});
}

DriftReport drift_report(Repository& repo, VersionId train, VersionId test, std::size_t k, std::uint64_t seed) {
  auto r = mismatch_test(repo.coreset(train, k, seed), repo.coreset(test, k, seed));
  r.train_version_id = train;
  r.test_version_id = test;
  return r;
}

int drift(Session& s, const Options& o) {
  auto& repo = s.repo();
  const auto train = resolve_version(repo.store(), o.train);
  const auto test = resolve_version(repo.store(), o.test);
  const auto r = drift_report(repo, train, test, o.k, require_seed(o.seed, "drift"));
  if (o.json) {
    s.print(r.to_document());
  } else {
    DriftRow row{dataset_name(*repo.store().version(train)), r.covering_radius, {r}};
    emit_table(s, drift_table({dataset_name(*repo.store().version(test))}, {row}, o.k), o.format);
  }
  s.err << (r.mismatch ? "mismatch: " : "covered: ") << "mean nearest distance " << fixed2(r.mean_nearest_distance)
        << (r.mismatch ? " > " : " <= ") << "covering radius " << fixed2(r.covering_radius) << "\n";
  return r.mismatch ? kExitDriftMismatch : kExitOk;
}

// ---------------------------------------------------------------------------
// transfer

void transfer_plan(Session& s, const Options& o) {
  auto& repo = s.repo();
  if (!o.threshold) fail(ErrorCode::invalid_argument, "transfer plan: --threshold is required");
  if (!o.kstar) fail(ErrorCode::invalid_argument, "transfer plan: --kstar is required");
  TransferRequest req;
  req.target = resolve_version(repo.store(), o.target);
  req.metric = parse_similarity_metric(o.metric);
  if (req.metric == SimilarityMetric::fulldata_euclidean) {
    fail(ErrorCode::invalid_argument, "transfer plan ranks coresets; use --metric coreset or gw");
  }
  req.threshold = *o.threshold;
  req.k_star = *o.kstar;
  req.gw = gw_params(o.epsilon);
  req.distance.l2_normalize = o.normalize;
  for (const auto& text : o.overrides) req.overrides.push_back(parse_override(text));
  const auto seed = require_seed(o.seed, "transfer plan");

  const auto target_core = repo.coreset(req.target, o.k, seed);
  std::vector<VersionId> candidates;
  std::vector<std::string> warnings;
  if (!o.registry.empty()) {
    candidates = resolve_versions(repo.store(), o.registry);
  } else {
    for (const auto& v : repo.store().versions()) {
      if (v->id == req.target || v->kind != VersionKind::training) continue;
      if (!repo.find_embeddings(v->id)) continue;
      candidates.push_back(v->id);
    }
  }
  std::vector<RegistryEntry> registry;
  for (auto id : candidates) {
    if (id == req.target) continue;
    auto core = repo.coreset(id, o.k, seed);
    const auto name = dataset_name(*repo.store().version(id));
    if (req.metric == SimilarityMetric::coreset_euclidean &&
        (core.embedder_tag != target_core.embedder_tag || core.dim() != target_core.dim())) {
      warnings.push_back(name + ": embedder '" + core.embedder_tag + "' differs from the target's; skipped");
      continue;
    }
    registry.push_back({name, repo.data_node(id), std::move(core)});
  }
  if (registry.empty()) fail(ErrorCode::empty_selection, "transfer plan: no registered datasets to compare against");
  auto plan = plan_transfer(repo, target_core, registry, req);
  plan.warnings.insert(plan.warnings.begin(), warnings.begin(), warnings.end());
  for (const auto& w : plan.warnings) s.err << "warning: " << w << "\n";

  if (!o.apply) {
    s.print(plan.to_document());
    return;
  }
  Document created = Document::array();
  if (plan.recommendation == Recommendation::transfer) {
    for (auto n : materialize_plan(repo, plan)) created.push_back(n.value);
  } else {
    s.err << "no dataset within the threshold; train from scratch\n";
  }
  s.print({{"plan", plan.to_document()}, {"created_nodes", created}});
}

void transfer_apply(Session& s, const Options& o) {
  const auto plan = TransferPlan::from_document(parse_json("@" + o.plan_file, o.plan_file));
  Document created = Document::array();
  for (auto n : materialize_plan(s.repo(), plan)) created.push_back(n.value);
  s.print({{"created_nodes", created}});
}

// ---------------------------------------------------------------------------
// rebuild

void rebuild_plan(Session& s, const Options& o) {
  auto& repo = s.repo();
  const auto method = parse_rebuild_method(o.method);
  const auto drifted = resolve_version(repo.store(), o.drifted);

  RebuildBase base;
  if (o.model && o.training) {
    base.model = NodeId{*o.model};
    base.training = NodeId{*o.training};
  } else if (o.model || o.training) {
    fail(ErrorCode::invalid_argument, "give both --model and --training, or neither");
  } else {
    base = latest_base(repo);
  }
  std::vector<VersionId> priors = o.priors.empty() ? base.priors : resolve_versions(repo.store(), o.priors);
  if (o.model && o.priors.empty()) {
    // Explicit base without priors: use what that training run was trained on.
    priors.clear();
    for (const auto& e : repo.graph().out_edges(base.training)) {
      if (e.relation == Relation::trained_on) {
        priors.emplace_back(repo.graph().node(e.to).attributes.at("version_id").get<std::uint64_t>());
      }
    }
  }

  if (!o.force) {
    const auto seed = require_seed(o.seed, "the drift check before a rebuild (or pass --force)");
    if (priors.empty()) fail(ErrorCode::precondition_failed, "no prior training data to check drift against; pass --force");
    for (auto p : priors) {
      const auto r = drift_report(repo, p, drifted, o.k, seed);
      s.err << "drift check vs " << dataset_name(*repo.store().version(p)) << ": mean "
            << fixed2(r.mean_nearest_distance) << ", radius " << fixed2(r.covering_radius)
            << (r.mismatch ? " (mismatch)" : " (covered)") << "\n";
      if (!r.mismatch) {
        fail(ErrorCode::precondition_failed, "drifted version is covered by " + dataset_name(*repo.store().version(p)) +
                                                 "; no rebuild needed (pass --force to plan anyway)");
      }
    }
  }

  RebuildPlan plan;
  switch (method) {
    case RebuildMethod::full_training:
      plan = plan_full_training(repo, priors, drifted, base.model, base.training);
      break;
    case RebuildMethod::transfer_learning:
      plan = plan_transfer_learning(repo, drifted, base.model, base.training);
      break;
    case RebuildMethod::active_learning: {
      if (!o.ratio) fail(ErrorCode::invalid_argument, "active learning needs --ratio");
      plan = plan_active_learning(repo, priors, drifted, *o.ratio, repo.embeddings(drifted),
                                  require_seed(o.seed, "active learning"), base.model, base.training);
      break;
    }
  }
  s.print(plan.to_document());
}

void rebuild_execute(Session& s, const Options& o) {
  auto& repo = s.repo();
  const auto plan = RebuildPlan::from_document(parse_json("@" + o.plan_file, o.plan_file));
  const auto seed = require_seed(o.seed, "rebuild execute");
  std::unique_ptr<Trainer> trainer;
  if (o.trainer == "mock") {
    trainer = std::make_unique<MockTrainer>(parse_json(o.mock_metrics, "--mock-metrics"));
  } else if (o.trainer == "external-cmd") {
    if (o.command.empty() || o.work_dir.empty()) {
      fail(ErrorCode::invalid_argument, "external-cmd trainer needs --command and --work-dir");
    }
    trainer = std::make_unique<ExternalCommandTrainer>(o.command, o.work_dir);
  } else {
    fail(ErrorCode::invalid_argument, "unknown trainer '" + o.trainer + "' (mock or external-cmd)");
  }
  const auto r = execute(repo, plan, *trainer, seed);
  s.print({{"model_node", r.model.value},
           {"training_node", r.training.value},
           {"trained_model_ref", r.result.trained_model_ref},
           {"metrics", r.result.metrics}});
}

// ---------------------------------------------------------------------------
// reports

void report_drift_matrix(Session& s, const Options& o) {
  auto& repo = s.repo();
  const auto seed = require_seed(o.seed, "report drift-matrix");
  auto train = resolve_versions(repo.store(), o.train_list.empty() ? o.versions : o.train_list);
  auto test = resolve_versions(repo.store(), o.test_list.empty() ? o.versions : o.test_list);
  if (train.empty() || test.empty()) fail(ErrorCode::invalid_argument, "give --versions or --train and --test");
  std::vector<std::string> test_names;
  for (auto t : test) test_names.push_back(dataset_name(*repo.store().version(t)));
  std::vector<DriftRow> rows;
  for (auto tr : train) {
    DriftRow row{dataset_name(*repo.store().version(tr)), repo.coreset(tr, o.k, seed).covering_radius, {}};
    for (auto te : test) {
      if (te == tr) row.cells.emplace_back();
      else row.cells.emplace_back(drift_report(repo, tr, te, o.k, seed));
    }
    rows.push_back(std::move(row));
  }
  emit_table(s, drift_table(test_names, rows, o.k), o.format);
}

std::optional<double> metric_value(const Document& metrics, const char* key) {
  auto it = metrics.find(key);
  if (it == metrics.end() || !it->is_number()) return std::nullopt;
  return it->get<double>();
}

void report_label_cost(Session& s, const Options& o) {
  auto& repo = s.repo();
  const auto drifted = resolve_version(repo.store(), o.drifted);
  struct Entry {
    int order;
    double ratio;
    std::uint64_t node;
    LabelCostRow row;
  };
  std::vector<Entry> entries;
  for (const auto& n : repo.graph().nodes()) {
    if (n.kind != NodeKind::training_version) continue;
    const auto& a = n.attributes;
    if (!a.contains("drifted_version_id") || a["drifted_version_id"] != drifted.value) continue;
    const auto method = parse_rebuild_method(a.value("method", ""));
    LabelCostRow row;
    row.method = std::string(to_string(method));
    row.labels = a.value("labels_requested", std::size_t{0});
    if (a.contains("ratio") && a["ratio"].is_number()) row.ratio = a["ratio"].get<double>();
    const auto metrics = a.value("metrics", Document::object());
    row.accuracy = metric_value(metrics, "accuracy");
    row.training_minutes = metric_value(metrics, "training_time_minutes");
    entries.push_back({static_cast<int>(method), row.ratio.value_or(0.0), n.id.value, std::move(row)});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
    return std::tie(x.order, x.ratio, x.node) < std::tie(y.order, y.ratio, y.node);
  });
  std::vector<LabelCostRow> rows;
  rows.push_back({"no_retraining", std::nullopt, std::nullopt, o.baseline_accuracy, std::nullopt});
  for (auto& e : entries) rows.push_back(std::move(e.row));
  emit_table(s, label_cost_table(rows), o.format);
}

// ---------------------------------------------------------------------------

int exit_code_for(ErrorCode code) {
  return code == ErrorCode::io_error ? kExitInternal : kExitValidation;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        std::optional<std::string> env_store) {
  Session s(out, err, std::move(env_store));
  Options o;
  std::function<int()> action;

  CLI::App app{"veml: versioned data, lineage and lifecycle rebuild engine", "veml"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--store", s.store_flag, "store directory (overrides VEML_STORE)");

  auto on = [&](CLI::App* cmd, std::function<int()> fn) {
    cmd->callback([&action, fn = std::move(fn)] { action = fn; });
  };
  auto done = [](auto fn) {
    return [fn] {
      fn();
      return kExitOk;
    };
  };
  const auto metric_names = CLI::IsMember({"coreset", "coreset_euclidean", "full", "fulldata_euclidean", "gw",
                                           "coreset_gw"});
  const auto formats = CLI::IsMember({"csv", "text"});

  // data
  auto* data = app.add_subcommand("data", "samples, annotations and data versions");
  data->require_subcommand(1);
  {
    auto* c = data->add_subcommand("add", "append sample payloads");
    c->add_option("--file", o.files, "payload file (repeatable)");
    c->add_option("--dir", o.dir, "add every regular file in a directory, sorted by name");
    c->add_option("--annotations", o.annotations_file, "JSONL of {index, kind, tag, body} for this batch");
    on(c, done([&] { data_add(s, o); }));
  }
  {
    auto* c = data->add_subcommand("annotate", "attach annotations to existing samples");
    c->add_option("--sample", o.sample, "sample id");
    c->add_option("--kind", o.kind, "class, bounding_boxes, segmentation, skeleton or other");
    c->add_option("--tag", o.tag, "qualifier, required for kind 'other'");
    c->add_option("--body", o.body, "annotation body as JSON or @file");
    c->add_option("--file", o.annotations_file, "JSONL of {sample_id, kind, tag, body}");
    on(c, done([&] { data_annotate(s, o); }));
  }
  auto* version = data->add_subcommand("version", "create, combine and read data versions");
  version->require_subcommand(1);
  {
    auto* c = version->add_subcommand("create", "new version from sample ids");
    c->add_option("--samples", o.samples, "ids like 0-99,150")->required();
    c->add_option("--prep", o.prep, "preparation steps as JSON array or @file");
    c->add_option("--kind", o.version_kind)->check(CLI::IsMember({"training", "testing"}));
    c->add_option("--name", o.name);
    on(c, done([&] { version_create(s, o); }));
  }
  {
    auto* c = version->add_subcommand("merge", "union of versions with identical preparation");
    c->add_option("--versions", o.versions, "version ids or names")->required()->delimiter(',');
    c->add_option("--kind", o.version_kind)->check(CLI::IsMember({"training", "testing"}));
    c->add_option("--name", o.name);
    on(c, done([&] { version_merge(s, o); }));
  }
  {
    auto* c = version->add_subcommand("filter", "subset selected by a predicate");
    c->add_option("--source", o.source)->required();
    c->add_option("--predicate", o.predicate, "predicate JSON or @file")->required();
    c->add_option("--name", o.name);
    on(c, done([&] { version_filter(s, o); }));
  }
  {
    auto* c = version->add_subcommand("reprepare", "same samples under a new preparation");
    c->add_option("--source", o.source)->required();
    c->add_option("--prep", o.prep)->required();
    c->add_option("--name", o.name);
    on(c, done([&] { version_reprepare(s, o); }));
  }
  {
    auto* c = version->add_subcommand("checkout", "stream a version's samples");
    c->add_option("--version", o.version)->required();
    c->add_option("--out", o.out_file, "write the binary checkout here instead of JSONL");
    on(c, done([&] { version_checkout(s, o); }));
  }
  on(version->add_subcommand("list", "one JSON line per version"), done([&] { version_list(s); }));
  {
    auto* c = version->add_subcommand("show", "version details");
    c->add_option("--version", o.version)->required();
    on(c, done([&] { version_show(s, o); }));
  }

  // graph
  auto* graph = app.add_subcommand("graph", "lineage graph");
  graph->require_subcommand(1);
  {
    auto* c = graph->add_subcommand("add-node", "add a lifecycle or metadata node");
    c->add_option("--kind", o.node_kind)->required();
    c->add_option("--attrs", o.attrs, "attributes as JSON or @file");
    on(c, done([&] { graph_add_node(s, o); }));
  }
  {
    auto* c = graph->add_subcommand("link", "add a typed edge");
    c->add_option("--from", o.from)->required();
    c->add_option("--to", o.to)->required();
    c->add_option("--relation", o.relation)->required();
    on(c, done([&] { graph_link(s, o); }));
  }
  {
    auto* c = graph->add_subcommand("show", "whole graph, or the lifecycle around a node");
    c->add_option("--node", o.node);
    c->add_option("--relations", o.relations, "restrict traversal to these relations")->delimiter(',');
    on(c, done([&] { graph_show(s, o); }));
  }
  {
    auto* c = graph->add_subcommand("diff-models", "attribute differences between two model nodes");
    c->add_option("--a", o.a)->required();
    c->add_option("--b", o.b)->required();
    on(c, done([&] { graph_diff(s, o); }));
  }
  {
    auto* c = graph->add_subcommand("export", "write nodes.jsonl and edges.jsonl");
    c->add_option("--dir", o.dir)->required();
    on(c, done([&] { graph_export(s, o); }));
  }

  // embed
  auto* embed = app.add_subcommand("embed", "bind embeddings to data versions");
  embed->require_subcommand(1);
  {
    auto* c = embed->add_subcommand("import", "bind a .vemb file to a version");
    c->add_option("--version", o.version)->required();
    c->add_option("--file", o.file)->required()->check(CLI::ExistingFile);
    on(c, done([&] { embed_import(s, o); }));
  }
  {
    auto* c = embed->add_subcommand("synth", "bind synthetic Gaussian embeddings to a version");
    c->add_option("--version", o.version)->required();
    c->add_option("--dim", o.dim)->required();
    c->add_option("--seed", o.seed);
    c->add_option("--offsets", o.offsets, "cluster mean offsets, samples assigned round-robin")->delimiter(',');
    c->add_option("--sigma", o.sigma);
    on(c, done([&] { embed_synth(s, o); }));
  }
  {
    auto* c = embed->add_subcommand("info", "shape and tag of bound embeddings or a .vemb file");
    c->add_option("--version", o.version);
    c->add_option("--file", o.file);
    on(c, done([&] { embed_info(s, o); }));
  }

  {
    auto* coreset = app.add_subcommand("coreset", "k-center coresets");
    coreset->require_subcommand(1);
    auto* c = coreset->add_subcommand("compute", "greedy coreset of a version's embeddings");
    c->add_option("--version", o.version)->required();
    c->add_option("--k", o.k);
    c->add_option("--seed", o.seed);
    on(c, done([&] { coreset_compute(s, o); }));
  }
  {
    auto* c = app.add_subcommand("similarity", "distance table between data versions");
    c->add_option("--versions", o.versions)->required()->delimiter(',');
    c->add_option("--metric", o.metric)->check(metric_names);
    c->add_option("--k", o.k);
    c->add_option("--seed", o.seed);
    c->add_option("--epsilon", o.epsilon, "GW regularization, 0 picks a default");
    c->add_flag("--normalize", o.normalize, "L2-normalize embeddings first");
    c->add_flag("--upper", o.full, "fill the upper triangle too");
    c->add_option("--format", o.format)->check(CLI::IsMember({"csv", "text", "json"}));
    c->add_option("--out", o.out_file, "write the table here instead of stdout");
    on(c, done([&] { similarity(s, o); }));
  }
  {
    auto* c = app.add_subcommand("drift", "covering-ball test; exit 2 on mismatch");
    c->add_option("--train", o.train)->required();
    c->add_option("--test", o.test)->required();
    c->add_option("--k", o.k);
    c->add_option("--seed", o.seed);
    c->add_flag("--json", o.json, "print the full report");
    c->add_option("--format", o.format)->check(formats);
    on(c, [&] { return drift(s, o); });
  }

  // transfer
  auto* transfer = app.add_subcommand("transfer", "lifecycle transfer from similar datasets");
  transfer->require_subcommand(1);
  {
    auto* c = transfer->add_subcommand("plan", "rank registered datasets and assemble configs");
    c->add_option("--target", o.target)->required();
    c->add_option("--metric", o.metric)->check(metric_names);
    c->add_option("--threshold", o.threshold, "max distance counted as highly similar (required, no default)");
    c->add_option("--kstar", o.kstar, "max number of sources to transfer from");
    c->add_option("--k", o.k);
    c->add_option("--seed", o.seed);
    c->add_option("--epsilon", o.epsilon);
    c->add_flag("--normalize", o.normalize);
    c->add_option("--registry", o.registry, "candidate versions (default: all training versions with embeddings)")
        ->delimiter(',');
    c->add_option("--override", o.overrides, "section.key=value, repeatable, applied in order");
    c->add_flag("--apply", o.apply, "materialize the plan in the lineage graph");
    on(c, done([&] { transfer_plan(s, o); }));
  }
  {
    auto* c = transfer->add_subcommand("apply", "materialize a reviewed plan file");
    c->add_option("--plan", o.plan_file)->required()->check(CLI::ExistingFile);
    on(c, done([&] { transfer_apply(s, o); }));
  }

  // rebuild
  auto* rebuild = app.add_subcommand("rebuild", "rebuild a lifecycle for drifted data");
  rebuild->require_subcommand(1);
  {
    auto* c = rebuild->add_subcommand("plan", "plan full, transfer or active-learning retraining");
    c->add_option("--method", o.method)
        ->required()
        ->check(CLI::IsMember({"full", "transfer", "active", "full_training", "transfer_learning", "active_learning"}));
    c->add_option("--ratio", o.ratio, "fraction of the drifted version to label (active)");
    c->add_option("--drifted", o.drifted)->required();
    c->add_option("--priors", o.priors, "prior training versions")->delimiter(',');
    c->add_option("--model", o.model, "model node to rebuild from");
    c->add_option("--training", o.training, "training node to rebuild from");
    c->add_option("--k", o.k, "coreset size for the drift check");
    c->add_option("--seed", o.seed);
    c->add_flag("--force", o.force, "skip the drift check");
    on(c, done([&] { rebuild_plan(s, o); }));
  }
  {
    auto* c = rebuild->add_subcommand("execute", "run a plan with a trainer and record the result");
    c->add_option("--plan", o.plan_file)->required()->check(CLI::ExistingFile);
    c->add_option("--trainer", o.trainer)->check(CLI::IsMember({"mock", "external-cmd"}));
    c->add_option("--seed", o.seed);
    c->add_option("--mock-metrics", o.mock_metrics, "metrics the mock trainer returns, JSON or @file");
    c->add_option("--command", o.command, "external trainer command, run via /bin/sh");
    c->add_option("--work-dir", o.work_dir);
    on(c, done([&] { rebuild_execute(s, o); }));
  }

  // reports
  auto* report = app.add_subcommand("report", "tables in publication layout");
  report->require_subcommand(1);
  {
    auto* c = report->add_subcommand("drift-matrix", "pairwise covering-ball tests");
    c->add_option("--versions", o.versions, "used as both rows and columns")->delimiter(',');
    c->add_option("--train", o.train_list)->delimiter(',');
    c->add_option("--test", o.test_list)->delimiter(',');
    c->add_option("--k", o.k);
    c->add_option("--seed", o.seed);
    c->add_option("--format", o.format)->check(formats);
    on(c, done([&] { report_drift_matrix(s, o); }));
  }
  {
    auto* c = report->add_subcommand("label-cost", "labels, accuracy and time per executed rebuild");
    c->add_option("--drifted", o.drifted)->required();
    c->add_option("--baseline-accuracy", o.baseline_accuracy, "accuracy without retraining");
    c->add_option("--format", o.format)->check(formats);
    on(c, done([&] { report_label_cost(s, o); }));
  }

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("veml");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    return action ? action() : kExitValidation;
  } catch (const LabelingIncompleteError& e) {
    out << Document{{"blocked", true}, {"outstanding", e.outstanding()}}.dump(2) << "\n";
    err << "error[" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    err << "error[" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    err << "error[" << to_string(ErrorCode::invalid_argument) << "]: " << e.what() << "\n";
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error[" << to_string(ErrorCode::io_error) << "]: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace veml::cli
