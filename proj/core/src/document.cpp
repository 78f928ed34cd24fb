#include "veml/document.hpp"

#include "veml/error.hpp"

namespace veml {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::not_found: return "NotFound";
    case ErrorCode::duplicate_id: return "DuplicateId";
    case ErrorCode::empty_selection: return "EmptySelection";
    case ErrorCode::preparation_mismatch: return "PreparationMismatch";
    case ErrorCode::schema_violation: return "SchemaViolation";
    case ErrorCode::type_mismatch: return "TypeMismatch";
    case ErrorCode::cycle_detected: return "CycleDetected";
    case ErrorCode::format_error: return "FormatError";
    case ErrorCode::row_count_mismatch: return "RowCountMismatch";
    case ErrorCode::non_finite: return "NonFinite";
    case ErrorCode::embedder_mismatch: return "EmbedderMismatch";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::too_large: return "TooLarge";
    case ErrorCode::non_convergence: return "NonConvergence";
    case ErrorCode::precondition_failed: return "PreconditionFailed";
    case ErrorCode::missing_pretrained: return "MissingPretrained";
    case ErrorCode::labeling_incomplete: return "LabelingIncomplete";
    case ErrorCode::trainer_failure: return "TrainerFailure";
    case ErrorCode::cancelled: return "Cancelled";
    case ErrorCode::io_error: return "IoError";
  }
  return "Unknown";
}

std::string canonical(const Document& doc) { return doc.dump(); }

namespace {

void flatten_into(const Document& doc, const std::string& prefix,
                  std::vector<std::pair<std::string, Document>>& out) {
  if (doc.is_object() && !doc.empty()) {
    for (const auto& [key, value] : doc.items()) {
      flatten_into(value, prefix.empty() ? key : prefix + "." + key, out);
    }
    return;
  }
  out.emplace_back(prefix, doc);
}

}  // namespace

std::vector<std::pair<std::string, Document>> flatten(const Document& doc) {
  std::vector<std::pair<std::string, Document>> out;
  if (doc.is_object() && doc.empty()) return out;
  flatten_into(doc, "", out);
  return out;
}

std::vector<std::string> split_path(std::string_view dotted) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const auto piece = dotted.substr(start, dot == std::string_view::npos ? dotted.npos : dot - start);
    if (piece.empty()) fail(ErrorCode::invalid_argument, "malformed path '" + std::string(dotted) + "'");
    parts.emplace_back(piece);
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return parts;
}

}  // namespace veml
