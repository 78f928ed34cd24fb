#include "veml/repository.hpp"

#include <filesystem>

#include "veml/error.hpp"
#include "veml/record_log.hpp"

namespace veml {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kManifestMagic{'V', 'M', 'A', 'N'};

Document data_node_attributes(const DataVersion& v) {
  Document attrs{{"version_id", v.id.value}, {"kind", to_string(v.kind)}, {"size", v.size()}};
  if (!v.name.empty()) attrs["name"] = v.name;
  return attrs;
}

}  // namespace

Repository::~Repository() = default;

std::unique_ptr<Repository> Repository::in_memory() {
  std::unique_ptr<Repository> repo(new Repository());
  repo->store_ = VersionStore::in_memory();
  repo->graph_ = std::make_unique<LineageGraph>();
  repo->wire();
  return repo;
}

std::unique_ptr<Repository> Repository::open(const std::string& dir) {
  std::unique_ptr<Repository> repo(new Repository());
  fs::create_directories(dir);
  repo->dir_ = dir;
  repo->manifest_ = RecordLog::open(dir + "/versions.manifest", kManifestMagic, "");
  repo->store_ = VersionStore::open(dir, repo->manifest_.get());
  repo->graph_ = std::make_unique<LineageGraph>(repo->manifest_.get());
  repo->replay();
  repo->wire();
  return repo;
}

void Repository::replay() {
  for (const auto& rec : manifest_->recovered()) {
    const auto doc = Document::parse(rec.begin(), rec.end());
    const auto type = doc.at("type").get<std::string>();
    if (type == "version") store_->restore_version(VersionStore::decode_version(doc));
    else if (type == "node") graph_->restore_node(LineageGraph::decode_node(doc));
    else if (type == "edge") graph_->restore_edge(LineageGraph::decode_edge(doc));
    else fail(ErrorCode::format_error, "versions.manifest: unknown record type '" + type + "'");
  }
  manifest_->release_recovered();
  // A crash between a version commit and its node emission leaves a version
  // without a data node; add the node now.
  for (const auto& v : store_->versions()) {
    if (!graph_->data_node(v->id)) graph_->put_node(NodeKind::data_version, data_node_attributes(*v));
  }
}

void Repository::wire() {
  store_->set_version_listener([graph = graph_.get()](const DataVersion& v) {
    graph->put_node(NodeKind::data_version, data_node_attributes(v));
  });
}

NodeId Repository::data_node(VersionId version) const {
  if (auto n = graph_->data_node(version)) return *n;
  fail(ErrorCode::not_found, "no data_version node for version " + std::to_string(version.value));
}

void Repository::put_embeddings(VersionId version, Embeddings embeddings) {
  const auto v = store_->version(version);
  validate(embeddings.matrix, embeddings.manifest);
  check_covers_version(embeddings.manifest, *v);
  embeddings.manifest.data_version_id = version;

  std::lock_guard lock(cache_mu_);
  std::optional<Embeddings> existing;
  if (dir_) {
    const auto path = *dir_ + "/embeddings/v" + std::to_string(version.value) + ".vemb";
    if (fs::exists(path)) existing = read_embeddings(path);
  } else if (auto it = memory_embeddings_.find(version.value); it != memory_embeddings_.end()) {
    existing = it->second;
  }
  if (existing) {
    if (existing->matrix == embeddings.matrix && existing->manifest == embeddings.manifest) return;
    fail(ErrorCode::duplicate_id, "version " + std::to_string(version.value) + " already has different embeddings");
  }
  if (dir_) {
    fs::create_directories(*dir_ + "/embeddings");
    write_embeddings(embeddings.matrix, embeddings.manifest,
                     *dir_ + "/embeddings/v" + std::to_string(version.value) + ".vemb");
  } else {
    memory_embeddings_.emplace(version.value, std::move(embeddings));
  }
}

std::optional<Embeddings> Repository::find_embeddings(VersionId version) const {
  std::lock_guard lock(cache_mu_);
  if (dir_) {
    const auto path = *dir_ + "/embeddings/v" + std::to_string(version.value) + ".vemb";
    if (!fs::exists(path)) return std::nullopt;
    return read_embeddings(path);
  }
  if (auto it = memory_embeddings_.find(version.value); it != memory_embeddings_.end()) return it->second;
  return std::nullopt;
}

Embeddings Repository::embeddings(VersionId version) const {
  if (auto e = find_embeddings(version)) return *e;
  fail(ErrorCode::not_found, "no embeddings bound to version " + std::to_string(version.value) +
                                 " (use 'embed import' or 'embed synth')");
}

CoreSet Repository::coreset(VersionId version, std::size_t k, std::uint64_t seed) {
  const auto key = std::make_tuple(version.value, k, seed);
  {
    std::lock_guard lock(cache_mu_);
    if (auto it = coresets_.find(key); it != coresets_.end()) return it->second;
  }
  std::string sidecar;
  if (dir_) {
    sidecar = *dir_ + "/coresets/v" + std::to_string(version.value) + "_k" + std::to_string(k) + "_s" +
              std::to_string(seed) + ".vcore";
    if (fs::exists(sidecar)) {
      auto core = read_coreset(sidecar);
      std::lock_guard lock(cache_mu_);
      return coresets_.emplace(key, std::move(core)).first->second;
    }
  }

  auto core = kcenter_greedy(embeddings(version), k, seed);
  if (dir_) {
    fs::create_directories(*dir_ + "/coresets");
    write_coreset(core, sidecar);
  }
  auto batch = graph_->begin();
  const auto meta = batch.put_node(NodeKind::metadata, {{"category", "coreset"},
                                                        {"data_version_id", version.value},
                                                        {"k", k},
                                                        {"seed", seed},
                                                        {"covering_radius", core.covering_radius},
                                                        {"embedder_tag", core.embedder_tag},
                                                        {"sidecar", sidecar.empty() ? Document(nullptr) : Document(sidecar)}});
  batch.link(data_node(version), meta, Relation::uses_metadata);
  graph_->commit(batch);

  std::lock_guard lock(cache_mu_);
  return coresets_.emplace(key, std::move(core)).first->second;
}

}  // namespace veml
