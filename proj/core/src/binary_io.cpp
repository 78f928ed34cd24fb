#include "veml/binary_io.hpp"

#include <bit>
#include <cerrno>
#include <filesystem>
#include <fstream>

#include "veml/error.hpp"

namespace veml {

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

void ByteReader::require(std::size_t n) const {
  if (n > remaining()) {
    fail(ErrorCode::format_error, context_ + ": truncated (need " + std::to_string(n) +
                                      " bytes at offset " + std::to_string(pos_) + ", have " +
                                      std::to_string(remaining()) + ")");
  }
}

std::uint64_t ByteReader::get_le(int width) {
  require(static_cast<std::size_t>(width));
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += static_cast<std::size_t>(width);
  return v;
}

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
  require(n);
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::string ByteReader::text(std::size_t n) {
  auto b = bytes(n);
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

Blob read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot open " + path);
  Blob data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::io_error, "read failed: " + path);
  return data;
}

void write_file_atomic(const std::string& path, std::span<const std::uint8_t> data) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io_error, "cannot create " + tmp);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) fail(ErrorCode::io_error, "write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::io_error, "rename " + tmp + " -> " + path + ": " + ec.message());
}

}  // namespace veml
