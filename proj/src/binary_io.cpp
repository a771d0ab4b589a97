#include "semhash/binary_io.hpp"

#include <fstream>
#include <sstream>

#include "semhash/common.hpp"

namespace semhash {

void ByteReader::expect_magic(std::string_view tag) {
  require(tag.size());
  if (data_.substr(offset_, tag.size()) != tag) {
    fail("bad magic, expected \"" + std::string(tag) + "\"");
  }
  offset_ += tag.size();
}

void ByteReader::require(std::size_t n) const {
  if (remaining() < n) {
    fail("truncated: needed " + std::to_string(n) + " bytes, " +
         std::to_string(remaining()) + " left");
  }
}

void ByteReader::expect_end() const {
  if (remaining() != 0) {
    fail(std::to_string(remaining()) + " trailing bytes");
  }
}

void ByteReader::fail(const std::string& message) const {
  throw Error(ErrorKind::kMalformedFile,
              source_ + " at byte " + std::to_string(offset_) + ": " + message);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kIo, "cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::kIo, "cannot write " + path.string());
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorKind::kIo, "write failed for " + path.string());
  }
}

}  // namespace semhash
