#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semhash/common.hpp"

namespace semhash {

/// K-bit code packed into ceil(K/64) words; bit j lives in bit j%64 of word
/// j/64 and bits at positions >= K are zero.
struct HashCode {
  std::vector<std::uint64_t> words;
  int bits = 0;

  bool bit(int j) const { return (words[j / 64] >> (j % 64)) & 1U; }
  bool operator==(const HashCode&) const = default;
};

inline std::size_t words_for_bits(int bits) { return (static_cast<std::size_t>(bits) + 63) / 64; }

HashCode pack_bits(std::span<const std::uint8_t> bits);
std::vector<std::uint8_t> unpack_bits(const HashCode& code);

/// bit = 1 iff value >= threshold.
std::vector<HashCode> binarize(const Matrix& z, double threshold = 0.5);

int hamming(const HashCode& a, const HashCode& b);

/// Exact Hamming search structure; codes are stored contiguously.
class HashIndex {
 public:
  explicit HashIndex(int bits);

  void add(std::int64_t id, std::int32_t label, const HashCode& code);

  int bits() const { return bits_; }
  std::size_t words_per_code() const { return words_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  std::int64_t id(std::size_t i) const { return ids_[i]; }
  std::int32_t label(std::size_t i) const { return labels_[i]; }
  HashCode code(std::size_t i) const;
  std::span<const std::uint64_t> code_words(std::size_t i) const {
    return {words_storage_.data() + i * words_, words_};
  }
  std::span<const std::uint64_t> all_words() const { return words_storage_; }
  const std::vector<std::int64_t>& ids() const { return ids_; }
  const std::vector<std::int32_t>& labels() const { return labels_; }

  bool operator==(const HashIndex&) const = default;

 private:
  int bits_;
  std::size_t words_;
  std::vector<std::uint64_t> words_storage_;
  std::vector<std::int64_t> ids_;
  std::vector<std::int32_t> labels_;
};

struct SearchResult {
  std::int64_t id = 0;
  int distance = 0;
  bool operator==(const SearchResult&) const = default;
};

/// Full-scan top-k by (distance, id) ascending.
std::vector<SearchResult> query_topk(const HashIndex& index, const HashCode& query, std::size_t k,
                                     ExecPolicy policy = ExecPolicy::kParallel);

/// "SHRI" index file: magic, version, K, count (u32 LE), then per entry id
/// (i64 LE), label (i32 LE), code words (u64 LE).
std::string encode_index(const HashIndex& index);
HashIndex decode_index(std::string_view bytes, const std::string& source = "index");
void save_index(const std::string& path, const HashIndex& index);
HashIndex load_index(const std::string& path);

}  // namespace semhash
