#include "veml/version_store.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <set>
#include <sstream>
#include <unordered_set>

#include "veml/error.hpp"
#include "veml/record_log.hpp"

namespace veml {

namespace {

constexpr std::array<char, 4> kSamplesMagic{'V', 'S', 'M', 'P'};
constexpr std::array<char, 4> kAnnotationsMagic{'V', 'A', 'N', 'N'};

std::int64_t system_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

Blob encode_sample(const SampleRecord& s) {
  ByteWriter w;
  w.u64(s.id.value);
  w.bytes(s.content_hash);
  w.bytes(s.payload);
  return w.take();
}

SampleRecord decode_sample(const Blob& b) {
  ByteReader r(b, "samples.log record");
  SampleRecord s;
  s.id = SampleId{r.u64()};
  auto h = r.bytes(32);
  std::copy(h.begin(), h.end(), s.content_hash.begin());
  auto p = r.bytes(r.remaining());
  s.payload.assign(p.begin(), p.end());
  if (sha256(s.payload) != s.content_hash) {
    fail(ErrorCode::format_error, "samples.log: content hash mismatch for sample " + std::to_string(s.id.value));
  }
  return s;
}

Blob encode_annotation(const AnnotationRecord& a) {
  ByteWriter w;
  w.u64(a.sample_id.value);
  w.u8(static_cast<std::uint8_t>(a.kind));
  w.u16(static_cast<std::uint16_t>(a.tag.size()));
  w.text(a.tag);
  w.text(a.body.dump());
  return w.take();
}

AnnotationRecord decode_annotation(const Blob& b) {
  ByteReader r(b, "annotations.log record");
  AnnotationRecord a;
  a.sample_id = SampleId{r.u64()};
  const auto kind = r.u8();
  if (kind > static_cast<std::uint8_t>(AnnotationKind::other)) {
    fail(ErrorCode::format_error, "annotations.log: unknown annotation kind " + std::to_string(kind));
  }
  a.kind = static_cast<AnnotationKind>(kind);
  a.tag = r.text(r.u16());
  a.body = Document::parse(r.text(r.remaining()));
  return a;
}

void validate_annotation(AnnotationKind kind, const std::string& tag, const Document& body) {
  if (kind == AnnotationKind::other && tag.empty()) {
    fail(ErrorCode::invalid_argument, "annotation kind 'other' requires a tag");
  }
  if (tag.size() > 0xFFFF) fail(ErrorCode::invalid_argument, "annotation tag too long");
  if (body.is_discarded()) fail(ErrorCode::invalid_argument, "annotation body is not a document");
}

// ---------------------------------------------------------------------------
// Filter predicates
// ---------------------------------------------------------------------------

struct SampleView {
  SampleId id;
  std::size_t payload_size;
  const std::vector<AnnotationRecord>& annotations;
};

using Predicate = std::function<bool(const SampleView&)>;

[[noreturn]] void malformed(const std::string& why) {
  fail(ErrorCode::invalid_argument, "malformed predicate: " + why);
}

const Document* lookup_path(const Document& doc, const std::string& dotted) {
  const Document* cur = &doc;
  for (const auto& seg : split_path(dotted)) {
    if (!cur->is_object()) return nullptr;
    auto it = cur->find(seg);
    if (it == cur->end()) return nullptr;
    cur = &*it;
  }
  return cur;
}

Predicate compile_annotation_match(const Document& spec) {
  if (!spec.is_object()) malformed("'annotation' expects an object");
  std::optional<AnnotationKind> kind;
  std::optional<std::string> tag;
  std::vector<std::pair<std::string, Document>> where;
  for (const auto& [key, value] : spec.items()) {
    if (key == "kind") {
      if (!value.is_string()) malformed("'kind' expects a string");
      kind = parse_annotation_kind(value.get<std::string>());
    } else if (key == "tag") {
      if (!value.is_string()) malformed("'tag' expects a string");
      tag = value.get<std::string>();
    } else if (key == "where") {
      if (!value.is_object()) malformed("'where' expects an object");
      for (const auto& [path, expected] : value.items()) {
        split_path(path);
        where.emplace_back(path, expected);
      }
    } else {
      malformed("unknown annotation key '" + key + "'");
    }
  }
  return [kind, tag, where](const SampleView& s) {
    return std::any_of(s.annotations.begin(), s.annotations.end(), [&](const AnnotationRecord& a) {
      if (kind && a.kind != *kind) return false;
      if (tag && a.tag != *tag) return false;
      for (const auto& [path, expected] : where) {
        const Document* got = lookup_path(a.body, path);
        if (got == nullptr || *got != expected) return false;
      }
      return true;
    });
  };
}

Predicate compile_predicate(const Document& doc);

std::vector<Predicate> compile_list(const Document& value, const std::string& op) {
  if (!value.is_array() || value.empty()) malformed("'" + op + "' expects a non-empty array");
  std::vector<Predicate> parts;
  for (const auto& p : value) parts.push_back(compile_predicate(p));
  return parts;
}

// JSON integers built in code are signed; parsed ones are unsigned.
bool is_count(const Document& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

Predicate compile_term(const std::string& key, const Document& value) {
  if (key == "all") {
    auto parts = compile_list(value, key);
    return [parts](const SampleView& s) {
      return std::all_of(parts.begin(), parts.end(), [&](const Predicate& p) { return p(s); });
    };
  }
  if (key == "any") {
    auto parts = compile_list(value, key);
    return [parts](const SampleView& s) {
      return std::any_of(parts.begin(), parts.end(), [&](const Predicate& p) { return p(s); });
    };
  }
  if (key == "not") {
    auto inner = compile_predicate(value);
    return [inner](const SampleView& s) { return !inner(s); };
  }
  if (key == "kind") {
    return compile_annotation_match(Document{{"kind", value}});
  }
  if (key == "annotation") return compile_annotation_match(value);
  if (key == "labeled") {
    if (!value.is_boolean()) malformed("'labeled' expects a boolean");
    const bool want = value.get<bool>();
    return [want](const SampleView& s) { return s.annotations.empty() != want; };
  }
  if (key == "sample_ids") {
    if (!value.is_array()) malformed("'sample_ids' expects an array");
    std::unordered_set<std::uint64_t> ids;
    for (const auto& v : value) {
      if (!is_count(v)) malformed("'sample_ids' entries must be unsigned integers");
      ids.insert(v.get<std::uint64_t>());
    }
    return [ids = std::move(ids)](const SampleView& s) { return ids.count(s.id.value) > 0; };
  }
  if (key == "payload_size") {
    if (!value.is_object()) malformed("'payload_size' expects {min,max}");
    std::size_t lo = 0;
    std::size_t hi = std::numeric_limits<std::size_t>::max();
    for (const auto& [k, v] : value.items()) {
      if (!is_count(v)) malformed("payload_size bounds must be unsigned");
      if (k == "min") lo = v.get<std::size_t>();
      else if (k == "max") hi = v.get<std::size_t>();
      else malformed("unknown payload_size key '" + k + "'");
    }
    return [lo, hi](const SampleView& s) { return s.payload_size >= lo && s.payload_size <= hi; };
  }
  malformed("unknown operator '" + key + "'");
}

Predicate compile_predicate(const Document& doc) {
  if (!doc.is_object() || doc.empty()) malformed("expected a non-empty object");
  std::vector<Predicate> terms;
  for (const auto& [key, value] : doc.items()) terms.push_back(compile_term(key, value));
  if (terms.size() == 1) return terms.front();
  return [terms](const SampleView& s) {
    return std::all_of(terms.begin(), terms.end(), [&](const Predicate& p) { return p(s); });
  };
}

}  // namespace

// ---------------------------------------------------------------------------
// Enum helpers and plain types
// ---------------------------------------------------------------------------

std::string_view to_string(AnnotationKind kind) noexcept {
  switch (kind) {
    case AnnotationKind::class_label: return "class";
    case AnnotationKind::bounding_boxes: return "bounding_boxes";
    case AnnotationKind::segmentation: return "segmentation";
    case AnnotationKind::skeleton: return "skeleton";
    case AnnotationKind::other: return "other";
  }
  return "other";
}

AnnotationKind parse_annotation_kind(std::string_view name) {
  if (name == "class") return AnnotationKind::class_label;
  if (name == "bounding_boxes") return AnnotationKind::bounding_boxes;
  if (name == "segmentation") return AnnotationKind::segmentation;
  if (name == "skeleton") return AnnotationKind::skeleton;
  if (name == "other") return AnnotationKind::other;
  fail(ErrorCode::invalid_argument, "unknown annotation kind '" + std::string(name) + "'");
}

std::string_view to_string(VersionKind kind) noexcept {
  return kind == VersionKind::training ? "training" : "testing";
}

VersionKind parse_version_kind(std::string_view name) {
  if (name == "training") return VersionKind::training;
  if (name == "testing") return VersionKind::testing;
  fail(ErrorCode::invalid_argument, "unknown version kind '" + std::string(name) + "'");
}

Document PreparationDescriptor::to_document() const {
  Document arr = Document::array();
  for (const auto& s : steps) arr.push_back({{"name", s.name}, {"params", s.params}});
  return arr;
}

PreparationDescriptor PreparationDescriptor::from_document(const Document& doc) {
  if (!doc.is_array()) fail(ErrorCode::invalid_argument, "preparation must be an array of steps");
  PreparationDescriptor p;
  for (const auto& step : doc) {
    if (step.is_string()) {
      p.steps.push_back({step.get<std::string>(), Document::object()});
      continue;
    }
    if (!step.is_object() || !step.contains("name") || !step["name"].is_string()) {
      fail(ErrorCode::invalid_argument, "preparation step needs a string 'name'");
    }
    PreparationStep s{step["name"].get<std::string>(), step.value("params", Document::object())};
    if (!s.params.is_object()) fail(ErrorCode::invalid_argument, "preparation params must be an object");
    p.steps.push_back(std::move(s));
  }
  return p;
}

std::string describe_difference(const PreparationDescriptor& a, const PreparationDescriptor& b) {
  std::ostringstream os;
  const std::size_t n = std::max(a.steps.size(), b.steps.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::string left = i < a.steps.size()
                                 ? Document{{"name", a.steps[i].name}, {"params", a.steps[i].params}}.dump()
                                 : "<none>";
    const std::string right = i < b.steps.size()
                                  ? Document{{"name", b.steps[i].name}, {"params", b.steps[i].params}}.dump()
                                  : "<none>";
    if (left != right) os << "  step " << i << ": " << left << " != " << right << "\n";
  }
  return os.str();
}

bool DataVersion::contains(SampleId id) const {
  return std::binary_search(sample_ids.begin(), sample_ids.end(), id);
}

std::vector<IdRange> compress_ranges(std::span<const SampleId> sorted_ids) {
  std::vector<IdRange> out;
  for (const auto id : sorted_ids) {
    if (!out.empty() && out.back().first.value + out.back().count == id.value) {
      ++out.back().count;
    } else {
      out.push_back({id, 1});
    }
  }
  return out;
}

Blob encode_checkout(std::span<const CheckoutRecord> records) {
  ByteWriter w;
  w.u64(records.size());
  for (const auto& r : records) {
    w.u64(r.sample_id.value);
    w.bytes(r.content_hash);
    w.u64(r.payload.size());
    w.bytes(r.payload);
    w.u32(static_cast<std::uint32_t>(r.annotations.size()));
    for (const auto& a : r.annotations) {
      w.u8(static_cast<std::uint8_t>(a.kind));
      w.u16(static_cast<std::uint16_t>(a.tag.size()));
      w.text(a.tag);
      const auto body = a.body.dump();
      w.u32(static_cast<std::uint32_t>(body.size()));
      w.text(body);
    }
  }
  return w.take();
}

// ---------------------------------------------------------------------------
// VersionStore
// ---------------------------------------------------------------------------

struct VersionStore::Storage {
  std::vector<SampleRecord> samples;
  std::vector<std::vector<AnnotationRecord>> annotations;
  std::size_t annotation_total = 0;
  std::vector<std::shared_ptr<const DataVersion>> versions;
  std::unique_ptr<RecordLog> samples_log;
  std::unique_ptr<RecordLog> annotations_log;
  RecordLog* manifest = nullptr;
};

VersionStore::VersionStore() : storage_(std::make_unique<Storage>()), clock_(system_clock_ms) {}
VersionStore::~VersionStore() = default;

std::unique_ptr<VersionStore> VersionStore::in_memory() {
  return std::unique_ptr<VersionStore>(new VersionStore());
}

std::unique_ptr<VersionStore> VersionStore::open(const std::string& dir, RecordLog* manifest) {
  std::filesystem::create_directories(dir);
  std::unique_ptr<VersionStore> store(new VersionStore());
  auto& st = *store->storage_;
  st.manifest = manifest;
  st.samples_log = RecordLog::open(dir + "/samples.log", kSamplesMagic, std::string(kDigestAlgorithm));
  st.annotations_log = RecordLog::open(dir + "/annotations.log", kAnnotationsMagic, "");

  for (const auto& rec : st.samples_log->recovered()) {
    auto s = decode_sample(rec);
    if (s.id.value != st.samples.size()) {
      fail(ErrorCode::format_error, "samples.log: non-monotone sample id " + std::to_string(s.id.value));
    }
    st.samples.push_back(std::move(s));
  }
  st.samples_log->release_recovered();
  st.annotations.resize(st.samples.size());
  for (const auto& rec : st.annotations_log->recovered()) {
    auto a = decode_annotation(rec);
    if (a.sample_id.value >= st.samples.size()) {
      fail(ErrorCode::format_error, "annotations.log: annotation for unknown sample");
    }
    st.annotations[a.sample_id.value].push_back(std::move(a));
    ++st.annotation_total;
  }
  st.annotations_log->release_recovered();
  return store;
}

void VersionStore::set_clock(Clock clock) {
  std::unique_lock lock(mu_);
  clock_ = std::move(clock);
}

void VersionStore::set_version_listener(VersionListener listener) {
  std::unique_lock lock(mu_);
  listener_ = std::move(listener);
}

std::vector<SampleId> VersionStore::add_samples(std::span<const Blob> payloads,
                                                std::span<const NewAnnotation> annotations) {
  if (payloads.empty()) fail(ErrorCode::invalid_argument, "add_samples: empty batch");
  for (const auto& a : annotations) {
    if (a.batch_index >= payloads.size()) {
      fail(ErrorCode::invalid_argument, "annotation batch_index " + std::to_string(a.batch_index) +
                                            " outside batch of " + std::to_string(payloads.size()));
    }
    validate_annotation(a.kind, a.tag, a.body);
  }

  std::unique_lock lock(mu_);
  auto& st = *storage_;
  const std::uint64_t base = st.samples.size();

  std::vector<SampleRecord> fresh;
  fresh.reserve(payloads.size());
  for (std::size_t i = 0; i < payloads.size(); ++i) {
    fresh.push_back({SampleId{base + i}, payloads[i], sha256(payloads[i])});
  }
  std::vector<AnnotationRecord> notes;
  notes.reserve(annotations.size());
  for (const auto& a : annotations) {
    notes.push_back({SampleId{base + a.batch_index}, a.kind, a.tag, a.body});
  }

  if (st.samples_log) {
    std::vector<Blob> recs;
    recs.reserve(fresh.size());
    for (const auto& s : fresh) recs.push_back(encode_sample(s));
    st.samples_log->append(recs);
    if (!notes.empty()) {
      std::vector<Blob> arecs;
      for (const auto& a : notes) arecs.push_back(encode_annotation(a));
      st.annotations_log->append(arecs);
    }
  }

  std::vector<SampleId> ids;
  ids.reserve(fresh.size());
  for (auto& s : fresh) {
    ids.push_back(s.id);
    st.samples.push_back(std::move(s));
  }
  st.annotations.resize(st.samples.size());
  for (auto& a : notes) {
    st.annotations[a.sample_id.value].push_back(std::move(a));
    ++st.annotation_total;
  }
  return ids;
}

void VersionStore::add_annotations(std::span<const AnnotationRecord> annotations) {
  if (annotations.empty()) return;
  std::unique_lock lock(mu_);
  auto& st = *storage_;
  for (const auto& a : annotations) {
    if (a.sample_id.value >= st.samples.size()) {
      fail(ErrorCode::not_found, "annotation references unknown sample " + std::to_string(a.sample_id.value));
    }
    validate_annotation(a.kind, a.tag, a.body);
  }
  if (st.annotations_log) {
    std::vector<Blob> recs;
    for (const auto& a : annotations) recs.push_back(encode_annotation(a));
    st.annotations_log->append(recs);
  }
  for (const auto& a : annotations) {
    st.annotations[a.sample_id.value].push_back(a);
    ++st.annotation_total;
  }
}

void VersionStore::check_samples_exist_locked(std::span<const SampleId> ids) const {
  const auto n = storage_->samples.size();
  for (const auto id : ids) {
    if (id.value >= n) fail(ErrorCode::not_found, "unknown sample id " + std::to_string(id.value));
  }
}

Document VersionStore::encode_version(const DataVersion& v) {
  Document ranges = Document::array();
  for (const auto& r : v.ranges) ranges.push_back({r.first.value, r.count});
  Document parents = Document::array();
  for (const auto p : v.parents) parents.push_back(p.value);
  return {{"type", "version"},
          {"id", v.id.value},
          {"ranges", ranges},
          {"preparation", v.preparation.to_document()},
          {"kind", to_string(v.kind)},
          {"created_at", v.created_at},
          {"parents", parents},
          {"name", v.name}};
}

DataVersion VersionStore::decode_version(const Document& doc) {
  DataVersion v;
  v.id = VersionId{doc.at("id").get<std::uint64_t>()};
  for (const auto& r : doc.at("ranges")) {
    const IdRange range{SampleId{r.at(0).get<std::uint64_t>()}, r.at(1).get<std::uint64_t>()};
    v.ranges.push_back(range);
    for (std::uint64_t i = 0; i < range.count; ++i) v.sample_ids.push_back(SampleId{range.first.value + i});
  }
  v.preparation = PreparationDescriptor::from_document(doc.at("preparation"));
  v.kind = parse_version_kind(doc.at("kind").get<std::string>());
  v.created_at = doc.at("created_at").get<std::int64_t>();
  for (const auto& p : doc.at("parents")) v.parents.push_back(VersionId{p.get<std::uint64_t>()});
  v.name = doc.value("name", "");
  return v;
}

VersionId VersionStore::commit_version_locked(DataVersion v) {
  auto& st = *storage_;
  v.id = VersionId{st.versions.size()};
  v.ranges = compress_ranges(v.sample_ids);
  v.created_at = clock_();
  if (st.manifest) {
    const auto body = encode_version(v).dump();
    const Blob rec(body.begin(), body.end());
    st.manifest->append(std::span<const Blob>(&rec, 1));
  }
  const auto id = v.id;
  st.versions.push_back(std::make_shared<const DataVersion>(std::move(v)));
  return id;
}

void VersionStore::restore_version(DataVersion version) {
  std::unique_lock lock(mu_);
  auto& st = *storage_;
  if (version.id.value != st.versions.size()) {
    fail(ErrorCode::format_error, "versions.manifest: out-of-order version id " + std::to_string(version.id.value));
  }
  check_samples_exist_locked(version.sample_ids);
  st.versions.push_back(std::make_shared<const DataVersion>(std::move(version)));
}

namespace {

template <class Fn>
VersionId commit_and_notify(std::shared_mutex& mu, const VersionStore::VersionListener& listener,
                            const VersionStore& store, Fn&& build) {
  VersionId id;
  {
    std::unique_lock lock(mu);
    id = build();
  }
  if (listener) listener(*store.version(id));
  return id;
}

}  // namespace

VersionId VersionStore::create_version(std::span<const SampleId> sample_ids,
                                       PreparationDescriptor preparation, VersionKind kind,
                                       std::string name) {
  if (sample_ids.empty()) fail(ErrorCode::invalid_argument, "create_version: empty sample list");
  std::vector<SampleId> sorted(sample_ids.begin(), sample_ids.end());
  std::sort(sorted.begin(), sorted.end());
  if (auto dup = std::adjacent_find(sorted.begin(), sorted.end()); dup != sorted.end()) {
    fail(ErrorCode::duplicate_id, "create_version: duplicate sample id " + std::to_string(dup->value));
  }
  return commit_and_notify(mu_, listener_, *this, [&] {
    check_samples_exist_locked(sorted);
    DataVersion v;
    v.sample_ids = std::move(sorted);
    v.preparation = std::move(preparation);
    v.kind = kind;
    v.name = std::move(name);
    return commit_version_locked(std::move(v));
  });
}

VersionId VersionStore::merge_versions(std::span<const VersionId> version_ids, VersionKind kind,
                                       std::string name) {
  if (version_ids.size() < 2) fail(ErrorCode::invalid_argument, "merge_versions: need at least two versions");
  {
    std::vector<VersionId> sorted(version_ids.begin(), version_ids.end());
    std::sort(sorted.begin(), sorted.end());
    if (auto dup = std::adjacent_find(sorted.begin(), sorted.end()); dup != sorted.end()) {
      fail(ErrorCode::duplicate_id, "merge_versions: version " + std::to_string(dup->value) + " listed twice");
    }
  }
  std::vector<std::shared_ptr<const DataVersion>> inputs;
  for (const auto id : version_ids) inputs.push_back(version(id));
  for (std::size_t i = 1; i < inputs.size(); ++i) {
    if (!(inputs[i]->preparation == inputs[0]->preparation)) {
      fail(ErrorCode::preparation_mismatch,
           "merge_versions: preparation of version " + std::to_string(inputs[i]->id.value) +
               " differs from version " + std::to_string(inputs[0]->id.value) + ":\n" +
               describe_difference(inputs[0]->preparation, inputs[i]->preparation));
    }
  }
  std::vector<SampleId> uni;
  for (const auto& v : inputs) {
    std::vector<SampleId> next;
    next.reserve(uni.size() + v->sample_ids.size());
    std::set_union(uni.begin(), uni.end(), v->sample_ids.begin(), v->sample_ids.end(),
                   std::back_inserter(next));
    uni = std::move(next);
  }
  return commit_and_notify(mu_, listener_, *this, [&] {
    DataVersion v;
    v.sample_ids = std::move(uni);
    v.preparation = inputs[0]->preparation;
    v.kind = kind;
    v.parents.assign(version_ids.begin(), version_ids.end());
    v.name = std::move(name);
    return commit_version_locked(std::move(v));
  });
}

VersionId VersionStore::filter_version(VersionId source, const Document& predicate, std::string name) {
  const Predicate pred = compile_predicate(predicate);
  const auto src = version(source);
  std::vector<SampleId> keep;
  {
    std::shared_lock lock(mu_);
    const auto& st = *storage_;
    for (const auto id : src->sample_ids) {
      const SampleView view{id, st.samples[id.value].payload.size(), st.annotations[id.value]};
      if (pred(view)) keep.push_back(id);
    }
  }
  if (keep.empty()) {
    fail(ErrorCode::empty_selection, "filter_version: predicate matched no samples of version " +
                                         std::to_string(source.value));
  }
  return commit_and_notify(mu_, listener_, *this, [&] {
    DataVersion v;
    v.sample_ids = std::move(keep);
    v.preparation = src->preparation;
    v.kind = src->kind;
    v.parents = {source};
    v.name = std::move(name);
    return commit_version_locked(std::move(v));
  });
}

VersionId VersionStore::reprepare_version(VersionId source, PreparationDescriptor preparation,
                                          std::string name) {
  const auto src = version(source);
  return commit_and_notify(mu_, listener_, *this, [&] {
    DataVersion v;
    v.sample_ids = src->sample_ids;
    v.preparation = std::move(preparation);
    v.kind = src->kind;
    v.parents = {source};
    v.name = std::move(name);
    return commit_version_locked(std::move(v));
  });
}

std::vector<CheckoutRecord> VersionStore::checkout(VersionId id) const {
  const auto v = version(id);
  std::shared_lock lock(mu_);
  const auto& st = *storage_;
  std::vector<CheckoutRecord> out;
  out.reserve(v->size());
  for (const auto& range : v->ranges) {
    for (std::uint64_t i = 0; i < range.count; ++i) {
      const auto& s = st.samples[range.first.value + i];
      out.push_back({s.id, s.content_hash, s.payload, st.annotations[s.id.value]});
    }
  }
  return out;
}

std::shared_ptr<const DataVersion> VersionStore::version(VersionId id) const {
  if (auto v = find_version(id)) return *v;
  fail(ErrorCode::not_found, "unknown data version " + std::to_string(id.value));
}

std::optional<std::shared_ptr<const DataVersion>> VersionStore::find_version(VersionId id) const {
  std::shared_lock lock(mu_);
  if (id.value >= storage_->versions.size()) return std::nullopt;
  return storage_->versions[id.value];
}

std::vector<std::shared_ptr<const DataVersion>> VersionStore::versions() const {
  std::shared_lock lock(mu_);
  return storage_->versions;
}

std::size_t VersionStore::sample_count() const {
  std::shared_lock lock(mu_);
  return storage_->samples.size();
}

std::size_t VersionStore::annotation_count() const {
  std::shared_lock lock(mu_);
  return storage_->annotation_total;
}

Digest VersionStore::content_hash(SampleId id) const {
  std::shared_lock lock(mu_);
  if (id.value >= storage_->samples.size()) fail(ErrorCode::not_found, "unknown sample id " + std::to_string(id.value));
  return storage_->samples[id.value].content_hash;
}

std::vector<AnnotationRecord> VersionStore::annotations(SampleId id) const {
  std::shared_lock lock(mu_);
  if (id.value >= storage_->samples.size()) fail(ErrorCode::not_found, "unknown sample id " + std::to_string(id.value));
  return storage_->annotations[id.value];
}

bool VersionStore::has_annotations(SampleId id) const {
  std::shared_lock lock(mu_);
  return id.value < storage_->annotations.size() && !storage_->annotations[id.value].empty();
}

}  // namespace veml
