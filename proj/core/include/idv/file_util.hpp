#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace idv {

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`, so readers
/// never observe a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Little-endian binary encoder.
class ByteWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void bytes(std::string_view data);
  /// u32 length followed by the raw bytes.
  void string(std::string_view text);

  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

/// Little-endian binary decoder; every read is bounds checked and throws
/// FormatError naming `source` on truncation.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string source);

  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string_view bytes(std::size_t n);
  std::string string();

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }
  const std::string& source() const { return source_; }

 private:
  void need(std::size_t n) const;

  std::string_view data_;
  std::size_t pos_ = 0;
  std::string source_;
};

}  // namespace idv
