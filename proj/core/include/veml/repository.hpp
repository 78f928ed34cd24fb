#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>

#include "veml/coreset.hpp"
#include "veml/embedding_io.hpp"
#include "veml/lineage_graph.hpp"
#include "veml/version_store.hpp"

namespace veml {

class RecordLog;

// One store directory:
//   samples.log  annotations.log  versions.manifest   (append-only logs)
//   embeddings/v<id>.vemb                              (bound embeddings)
//   coresets/v<id>_k<k>_s<seed>.vcore                  (coreset sidecars)
// versions.manifest holds data versions and lineage graph records in commit
// order. Every data version gets a data_version node in the graph.
class Repository {
 public:
  static std::unique_ptr<Repository> in_memory();
  static std::unique_ptr<Repository> open(const std::string& dir);
  ~Repository();

  Repository(const Repository&) = delete;
  Repository& operator=(const Repository&) = delete;

  VersionStore& store() noexcept { return *store_; }
  const VersionStore& store() const noexcept { return *store_; }
  LineageGraph& graph() noexcept { return *graph_; }
  const LineageGraph& graph() const noexcept { return *graph_; }
  const std::optional<std::string>& directory() const noexcept { return dir_; }

  // data_version node of a version (always present).
  NodeId data_node(VersionId version) const;

  // Binds embeddings to a version after checking they cover exactly its
  // samples. Embeddings are write-once per version; re-binding identical
  // content is a no-op, different content is rejected.
  void put_embeddings(VersionId version, Embeddings embeddings);
  std::optional<Embeddings> find_embeddings(VersionId version) const;
  Embeddings embeddings(VersionId version) const;

  // Greedy coreset of a version's embeddings, computed once per (k, seed)
  // and recorded as a "coreset" metadata node linked from the data node.
  CoreSet coreset(VersionId version, std::size_t k, std::uint64_t seed);

 private:
  Repository() = default;
  void wire();
  void replay();

  std::optional<std::string> dir_;
  std::unique_ptr<RecordLog> manifest_;
  std::unique_ptr<VersionStore> store_;
  std::unique_ptr<LineageGraph> graph_;

  mutable std::mutex cache_mu_;
  std::map<std::uint64_t, Embeddings> memory_embeddings_;
  std::map<std::tuple<std::uint64_t, std::size_t, std::uint64_t>, CoreSet> coresets_;
};

}  // namespace veml
