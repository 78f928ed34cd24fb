#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace veml {

enum class ErrorCode {
  invalid_argument,
  not_found,
  duplicate_id,
  empty_selection,
  preparation_mismatch,
  schema_violation,
  type_mismatch,
  cycle_detected,
  format_error,
  row_count_mismatch,
  non_finite,
  embedder_mismatch,
  dimension_mismatch,
  too_large,
  non_convergence,
  precondition_failed,
  missing_pretrained,
  labeling_incomplete,
  trainer_failure,
  cancelled,
  io_error,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures are reported through this exception type. The code is
// stable and scriptable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by rebuild execution when requested labels are still missing.
class LabelingIncompleteError : public Error {
 public:
  LabelingIncompleteError(const std::string& message, std::vector<std::uint64_t> outstanding)
      : Error(ErrorCode::labeling_incomplete, message), outstanding_(std::move(outstanding)) {}

  const std::vector<std::uint64_t>& outstanding() const noexcept { return outstanding_; }

 private:
  std::vector<std::uint64_t> outstanding_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace veml
