#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "veml/binary_io.hpp"

namespace veml {

// Append-only file of length-prefixed records grouped into frames.
//
// Layout: magic[4] | format_version u32 | header_extra_len u16 | header_extra
// followed by frames: frame_len u32 | record_count u32 | (record_len u32 | record)*.
// One append() writes exactly one frame, so a batch is either fully present
// or (after a torn write) dropped on the next open.
class RecordLog {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  // Opens or creates the log. For an existing file the magic, format version
  // and header_extra must match; a torn trailing frame is truncated away.
  static std::unique_ptr<RecordLog> open(const std::string& path, std::array<char, 4> magic,
                                         std::string header_extra);
  ~RecordLog();

  RecordLog(const RecordLog&) = delete;
  RecordLog& operator=(const RecordLog&) = delete;

  const std::vector<Blob>& recovered() const noexcept { return recovered_; }
  void release_recovered() { recovered_.clear(); recovered_.shrink_to_fit(); }

  // Durably appends one frame. On failure the file is truncated back to its
  // previous length and io_error is thrown.
  void append(std::span<const Blob> records);

  const std::string& path() const noexcept { return path_; }

 private:
  RecordLog(std::string path, int fd) : path_(std::move(path)), fd_(fd) {}

  std::string path_;
  int fd_ = -1;
  std::uint64_t size_ = 0;
  std::vector<Blob> recovered_;
};

}  // namespace veml
