#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>

namespace semhash {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

/// Appends little-endian scalars to an in-memory buffer.
class ByteWriter {
 public:
  void magic(std::string_view tag) { buffer_.append(tag); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void i64(std::int64_t v) { put(v); }
  void f32(float v) { put(v); }
  void f64(double v) { put(v); }

  const std::string& bytes() const { return buffer_; }

 private:
  template <typename T>
  void put(T v) {
    buffer_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }

  std::string buffer_;
};

/// Reads little-endian scalars; every failure is a MalformedFile error that
/// names the source and the byte offset.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string source)
      : data_(data), source_(std::move(source)) {}

  void expect_magic(std::string_view tag);
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  std::int64_t i64() { return get<std::int64_t>(); }
  float f32() { return get<float>(); }
  double f64() { return get<double>(); }

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return data_.size() - offset_; }
  /// Fails unless every byte has been consumed.
  void expect_end() const;
  [[noreturn]] void fail(const std::string& message) const;

 private:
  template <typename T>
  T get() {
    require(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return v;
  }
  void require(std::size_t n) const;

  std::string_view data_;
  std::string source_;
  std::size_t offset_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace semhash
