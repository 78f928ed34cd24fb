#include "veml/record_log.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "veml/error.hpp"

namespace veml {

namespace {

[[noreturn]] void io_fail(const std::string& what, const std::string& path) {
  fail(ErrorCode::io_error, what + " " + path + ": " + std::strerror(errno));
}

void write_all(int fd, const std::uint8_t* p, std::size_t n, const std::string& path) {
  while (n > 0) {
    const ssize_t w = ::write(fd, p, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      io_fail("write", path);
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
}

}  // namespace

std::unique_ptr<RecordLog> RecordLog::open(const std::string& path, std::array<char, 4> magic,
                                           std::string header_extra) {
  const int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) io_fail("open", path);
  std::unique_ptr<RecordLog> log(new RecordLog(path, fd));

  ByteWriter header;
  for (char c : magic) header.u8(static_cast<std::uint8_t>(c));
  header.u32(kFormatVersion);
  header.u16(static_cast<std::uint16_t>(header_extra.size()));
  header.text(header_extra);

  struct stat st {};
  if (::fstat(fd, &st) != 0) io_fail("stat", path);

  if (st.st_size == 0) {
    write_all(fd, header.buffer().data(), header.size(), path);
    if (::fsync(fd) != 0) io_fail("fsync", path);
    log->size_ = header.size();
    return log;
  }

  const Blob data = read_file(path);
  ByteReader in(data, path);
  for (char c : magic) {
    if (in.u8() != static_cast<std::uint8_t>(c)) fail(ErrorCode::format_error, path + ": bad magic");
  }
  if (const auto v = in.u32(); v != kFormatVersion) {
    fail(ErrorCode::format_error, path + ": unsupported format version " + std::to_string(v));
  }
  const auto extra = in.text(in.u16());
  if (extra != header_extra) {
    fail(ErrorCode::format_error, path + ": header mismatch ('" + extra + "' vs '" + header_extra + "')");
  }

  std::size_t good = in.position();
  while (in.remaining() >= 4) {
    const std::uint32_t frame_len = in.u32();
    if (frame_len > in.remaining() || frame_len < 4) break;
    ByteReader frame(in.bytes(frame_len), path + " frame");
    std::vector<Blob> records;
    const std::uint32_t count = frame.u32();
    records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      auto body = frame.bytes(frame.u32());
      records.emplace_back(body.begin(), body.end());
    }
    if (!frame.at_end()) fail(ErrorCode::format_error, path + ": frame length disagrees with records");
    for (auto& r : records) log->recovered_.push_back(std::move(r));
    good = in.position();
  }

  if (good != data.size()) {
    if (::ftruncate(fd, static_cast<off_t>(good)) != 0) io_fail("truncate", path);
  }
  log->size_ = good;
  if (::lseek(fd, static_cast<off_t>(good), SEEK_SET) < 0) io_fail("seek", path);
  return log;
}

RecordLog::~RecordLog() {
  if (fd_ >= 0) ::close(fd_);
}

void RecordLog::append(std::span<const Blob> records) {
  ByteWriter body;
  body.u32(static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    body.u32(static_cast<std::uint32_t>(r.size()));
    body.bytes(r);
  }
  ByteWriter frame;
  frame.u32(static_cast<std::uint32_t>(body.size()));
  frame.bytes(body.buffer());

  try {
    write_all(fd_, frame.buffer().data(), frame.size(), path_);
    if (::fdatasync(fd_) != 0) io_fail("fsync", path_);
  } catch (...) {
    if (::ftruncate(fd_, static_cast<off_t>(size_)) != 0) {
      // best effort; the torn frame is dropped on the next open anyway
    }
    (void)::lseek(fd_, static_cast<off_t>(size_), SEEK_SET);
    throw;
  }
  size_ += frame.size();
}

}  // namespace veml
