#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "veml/binary_io.hpp"
#include "veml/digest.hpp"
#include "veml/document.hpp"
#include "veml/ids.hpp"

namespace veml {

class RecordLog;

enum class AnnotationKind : std::uint8_t {
  class_label = 0,
  bounding_boxes = 1,
  segmentation = 2,
  skeleton = 3,
  other = 4,
};

std::string_view to_string(AnnotationKind kind) noexcept;
// Accepts "class", "bounding_boxes", "segmentation", "skeleton", "other".
AnnotationKind parse_annotation_kind(std::string_view name);

struct SampleRecord {
  SampleId id;
  Blob payload;
  Digest content_hash{};
};

struct AnnotationRecord {
  SampleId sample_id;
  AnnotationKind kind = AnnotationKind::class_label;
  std::string tag;  // free-form qualifier, required for AnnotationKind::other
  Document body = Document::object();
};

// Annotation supplied together with a new batch; batch_index points into the
// payload list of the same add_samples call.
struct NewAnnotation {
  std::size_t batch_index = 0;
  AnnotationKind kind = AnnotationKind::class_label;
  std::string tag;
  Document body = Document::object();
};

struct PreparationStep {
  std::string name;
  Document params = Document::object();
};

struct PreparationDescriptor {
  std::vector<PreparationStep> steps;

  Document to_document() const;
  static PreparationDescriptor from_document(const Document& doc);
  std::string canonical() const { return to_document().dump(); }

  friend bool operator==(const PreparationDescriptor& a, const PreparationDescriptor& b) {
    return a.canonical() == b.canonical();
  }
};

// Human-readable list of step differences; empty when equal.
std::string describe_difference(const PreparationDescriptor& a, const PreparationDescriptor& b);

enum class VersionKind : std::uint8_t { training, testing };

std::string_view to_string(VersionKind kind) noexcept;
VersionKind parse_version_kind(std::string_view name);

// Half-open run of consecutive sample ids.
struct IdRange {
  SampleId first;
  std::uint64_t count = 0;

  friend bool operator==(const IdRange&, const IdRange&) = default;
};

// Immutable once created. Sample ids are kept ascending, which is insertion
// order, and additionally stored as maximal contiguous runs.
struct DataVersion {
  VersionId id;
  std::vector<SampleId> sample_ids;
  std::vector<IdRange> ranges;
  PreparationDescriptor preparation;
  VersionKind kind = VersionKind::training;
  std::int64_t created_at = 0;  // unix milliseconds
  std::vector<VersionId> parents;
  std::string name;

  std::size_t size() const noexcept { return sample_ids.size(); }
  bool contains(SampleId id) const;
};

std::vector<IdRange> compress_ranges(std::span<const SampleId> sorted_ids);

struct CheckoutRecord {
  SampleId sample_id;
  Digest content_hash{};
  Blob payload;
  std::vector<AnnotationRecord> annotations;
};

// Canonical byte form of a checkout, used to compare checkouts and to hand
// them to external tools.
Blob encode_checkout(std::span<const CheckoutRecord> records);

// Append-only storage of samples, annotations and data versions.
//
// Single writer, many readers: mutating calls are serialized; readers run
// under a shared lock and only observe fully committed batches.
class VersionStore {
 public:
  using Clock = std::function<std::int64_t()>;
  using VersionListener = std::function<void(const DataVersion&)>;

  // Purely in-memory store, used by tests and by embedded callers.
  static std::unique_ptr<VersionStore> in_memory();
  // Opens (or creates) samples.log and annotations.log under dir. Version
  // records go to the shared manifest, which the caller owns and replays.
  static std::unique_ptr<VersionStore> open(const std::string& dir, RecordLog* manifest);

  ~VersionStore();
  VersionStore(const VersionStore&) = delete;
  VersionStore& operator=(const VersionStore&) = delete;

  void set_clock(Clock clock);
  void set_version_listener(VersionListener listener);

  std::vector<SampleId> add_samples(std::span<const Blob> payloads,
                                    std::span<const NewAnnotation> annotations = {});
  void add_annotations(std::span<const AnnotationRecord> annotations);

  VersionId create_version(std::span<const SampleId> sample_ids, PreparationDescriptor preparation,
                           VersionKind kind, std::string name = {});
  // Union of at least two distinct versions with identical preparation.
  VersionId merge_versions(std::span<const VersionId> version_ids,
                           VersionKind kind = VersionKind::training, std::string name = {});
  // Subset matching the predicate document; never produces an empty version.
  VersionId filter_version(VersionId source, const Document& predicate, std::string name = {});
  // Same sample set, new preparation. This is how a version gets "updated".
  VersionId reprepare_version(VersionId source, PreparationDescriptor preparation,
                              std::string name = {});

  std::vector<CheckoutRecord> checkout(VersionId id) const;

  std::shared_ptr<const DataVersion> version(VersionId id) const;
  std::optional<std::shared_ptr<const DataVersion>> find_version(VersionId id) const;
  std::vector<std::shared_ptr<const DataVersion>> versions() const;

  std::size_t sample_count() const;
  std::size_t annotation_count() const;
  Digest content_hash(SampleId id) const;
  std::vector<AnnotationRecord> annotations(SampleId id) const;
  bool has_annotations(SampleId id) const;

  // Used by Repository when replaying the manifest; bypasses the listener.
  void restore_version(DataVersion version);
  static Document encode_version(const DataVersion& v);
  static DataVersion decode_version(const Document& doc);

 private:
  VersionStore();

  struct Storage;
  VersionId commit_version_locked(DataVersion v);
  void check_samples_exist_locked(std::span<const SampleId> ids) const;

  mutable std::shared_mutex mu_;
  std::unique_ptr<Storage> storage_;
  Clock clock_;
  VersionListener listener_;
};

}  // namespace veml
