#include "semhash/hashing.hpp"

#include <algorithm>
#include <bit>

#include "semhash/binary_io.hpp"
#include "semhash/kernels.hpp"

namespace semhash {
namespace {

constexpr std::string_view kIndexMagic = "SHRI";
constexpr std::uint32_t kIndexVersion = 1;

bool result_less(const SearchResult& a, const SearchResult& b) {
  return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
}

}  // namespace

HashCode pack_bits(std::span<const std::uint8_t> bits) {
  HashCode code{std::vector<std::uint64_t>(words_for_bits(static_cast<int>(bits.size())), 0),
                static_cast<int>(bits.size())};
  for (std::size_t j = 0; j < bits.size(); ++j) {
    if (bits[j]) code.words[j / 64] |= std::uint64_t{1} << (j % 64);
  }
  return code;
}

std::vector<std::uint8_t> unpack_bits(const HashCode& code) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(code.bits));
  for (int j = 0; j < code.bits; ++j) out[j] = code.bit(j);
  return out;
}

std::vector<HashCode> binarize(const Matrix& z, double threshold) {
  const auto bits = static_cast<int>(z.cols());
  std::vector<HashCode> out;
  out.reserve(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    HashCode code{std::vector<std::uint64_t>(words_for_bits(bits), 0), bits};
    for (int j = 0; j < bits; ++j) {
      if (z(i, j) >= threshold) code.words[j / 64] |= std::uint64_t{1} << (j % 64);
    }
    out.push_back(std::move(code));
  }
  return out;
}

int hamming(const HashCode& a, const HashCode& b) {
  if (a.bits != b.bits || a.words.size() != b.words.size()) {
    throw Error(ErrorKind::kLengthMismatch,
                std::to_string(a.bits) + "-bit vs " + std::to_string(b.bits) + "-bit code");
  }
  int d = 0;
  for (std::size_t w = 0; w < a.words.size(); ++w) d += std::popcount(a.words[w] ^ b.words[w]);
  return d;
}

HashIndex::HashIndex(int bits) : bits_(bits), words_(words_for_bits(bits)) {
  if (bits < 1) throw Error(ErrorKind::kLengthMismatch, "code length must be positive");
}

void HashIndex::add(std::int64_t id, std::int32_t label, const HashCode& code) {
  if (code.bits != bits_ || code.words.size() != words_) {
    throw Error(ErrorKind::kLengthMismatch, "index holds " + std::to_string(bits_) +
                                                "-bit codes, got " + std::to_string(code.bits));
  }
  words_storage_.insert(words_storage_.end(), code.words.begin(), code.words.end());
  ids_.push_back(id);
  labels_.push_back(label);
}

HashCode HashIndex::code(std::size_t i) const {
  const auto w = code_words(i);
  return HashCode{{w.begin(), w.end()}, bits_};
}

std::vector<SearchResult> query_topk(const HashIndex& index, const HashCode& query, std::size_t k,
                                     ExecPolicy policy) {
  if (index.empty()) throw Error(ErrorKind::kEmptyIndex, "query on an empty index");
  if (query.bits != index.bits()) {
    throw Error(ErrorKind::kLengthMismatch, "query has " + std::to_string(query.bits) +
                                                " bits, index " + std::to_string(index.bits()));
  }
  if (k < 1) throw Error(ErrorKind::kKTooLarge, "k must be at least 1");

  std::vector<std::uint32_t> distances(index.size());
  kernels::hamming_scan(index.all_words(), index.words_per_code(), query.words, distances, policy);
  std::vector<SearchResult> results(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    results[i] = {index.id(i), static_cast<int>(distances[i])};
  }
  const std::size_t n = std::min(k, results.size());
  std::partial_sort(results.begin(), results.begin() + static_cast<std::ptrdiff_t>(n),
                    results.end(), result_less);
  results.resize(n);
  return results;
}

std::string encode_index(const HashIndex& index) {
  ByteWriter w;
  w.magic(kIndexMagic);
  w.u32(kIndexVersion);
  w.u32(static_cast<std::uint32_t>(index.bits()));
  w.u32(static_cast<std::uint32_t>(index.size()));
  for (std::size_t i = 0; i < index.size(); ++i) {
    w.i64(index.id(i));
    w.u32(static_cast<std::uint32_t>(index.label(i)));
    for (std::uint64_t word : index.code_words(i)) w.u64(word);
  }
  return w.bytes();
}

HashIndex decode_index(std::string_view bytes, const std::string& source) {
  ByteReader r(bytes, source);
  r.expect_magic(kIndexMagic);
  if (const auto version = r.u32(); version != kIndexVersion) {
    throw Error(ErrorKind::kVersionMismatch, source + ": index version " + std::to_string(version));
  }
  const auto bits = r.u32();
  if (bits == 0 || bits > (1U << 20)) r.fail("implausible code length " + std::to_string(bits));
  const auto count = r.u32();
  const std::size_t words = words_for_bits(static_cast<int>(bits));
  const std::size_t entry_bytes = 8 + 4 + 8 * words;
  if (r.remaining() != entry_bytes * count) {
    r.fail("payload holds " + std::to_string(r.remaining()) + " bytes, header implies " +
           std::to_string(entry_bytes * count));
  }
  HashIndex index(static_cast<int>(bits));
  HashCode code{std::vector<std::uint64_t>(words), static_cast<int>(bits)};
  const int tail = static_cast<int>(bits % 64);
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::int64_t id = r.i64();
    const auto label = static_cast<std::int32_t>(r.u32());
    for (auto& word : code.words) word = r.u64();
    if (tail != 0 && (code.words.back() >> tail) != 0) {
      r.fail("entry " + std::to_string(e) + " has bits set beyond K");
    }
    index.add(id, label, code);
  }
  return index;
}

void save_index(const std::string& path, const HashIndex& index) {
  write_file(path, encode_index(index));
}

HashIndex load_index(const std::string& path) { return decode_index(read_file(path), path); }

}  // namespace semhash
