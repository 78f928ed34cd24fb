#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stop_token>
#include <string_view>
#include <vector>

#include "veml/document.hpp"
#include "veml/embedding_io.hpp"
#include "veml/ids.hpp"
#include "veml/trainer.hpp"

namespace veml {

class Repository;

enum class RebuildMethod { full_training, transfer_learning, active_learning };

std::string_view to_string(RebuildMethod m) noexcept;
// Accepts full_training|full, transfer_learning|transfer, active_learning|active.
RebuildMethod parse_rebuild_method(std::string_view name);

// Number of samples to label for a ratio: floor(ratio * n), at least one.
// 673 samples at 0.1, 0.3, 0.5 give 67, 201, 336.
std::size_t label_count(double ratio, std::size_t n);

struct RebuildPlan {
  RebuildMethod method = RebuildMethod::full_training;
  std::optional<double> ratio;        // active learning only
  std::optional<std::uint64_t> seed;  // active learning only
  VersionId drifted;                  // d*
  std::vector<VersionId> priors;
  VersionId training_data;            // d' (or d* for transfer learning)
  NodeId base_model;                  // m_n
  NodeId base_training;               // t_p
  Document model_spec = Document::object();     // attributes of the new model node
  Document training_spec = Document::object();  // hyperparameters, pretrained_model_ref
  std::vector<SampleId> labeling_request;       // ascending

  Document to_document() const;
  static RebuildPlan from_document(const Document& doc);
};

// Newest model/training pair to rebuild from: the newest training version
// that has a model derived from it, and the data versions it was trained on.
struct RebuildBase {
  NodeId model;
  NodeId training;
  std::vector<VersionId> priors;
};
RebuildBase latest_base(const Repository& repo);

// Labels all of d* and trains on d' = merge(priors..., d*). Creates d'.
RebuildPlan plan_full_training(Repository& repo, std::span<const VersionId> priors, VersionId drifted,
                               NodeId base_model, NodeId base_training);

// Trains on d* alone starting from t_p's trained model.
RebuildPlan plan_transfer_learning(Repository& repo, VersionId drifted, NodeId base_model,
                                   NodeId base_training);

// Labels a greedy coreset of d* with label_count(ratio, |d*|) points and
// trains on d' = merge(priors..., selected part of d*). Creates the filtered
// version and, with priors, the merge.
RebuildPlan plan_active_learning(Repository& repo, std::span<const VersionId> priors, VersionId drifted,
                                 double ratio, const Embeddings& drifted_embeddings, std::uint64_t seed,
                                 NodeId base_model, NodeId base_training);

struct ExecuteResult {
  NodeId model;
  NodeId training;
  TrainResult result;
};

// Checks every requested label is present, runs the trainer once and
// commits m* and t* with their edges in one graph commit. Nothing is
// written when labels are missing, the trainer throws, or stop is requested.
ExecuteResult execute(Repository& repo, const RebuildPlan& plan, Trainer& trainer, std::uint64_t seed,
                      std::stop_token stop = {});

}  // namespace veml
