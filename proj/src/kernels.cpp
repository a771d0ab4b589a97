#include "semhash/kernels.hpp"

#include <bit>
#include <cmath>

namespace semhash::kernels {
namespace {

inline double row_l1(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < a.cols(); ++k) s += std::abs(a(i, k) - b(j, k));
  return s;
}

inline double row_sq(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double diff = a(i, k) - b(j, k);
    s += diff * diff;
  }
  return s;
}

inline Neighbor nearest_row(const Matrix& queries, Eigen::Index i, const Matrix& refs,
                            bool exclude_self) {
  Neighbor best;
  double best_sq = 0.0;
  for (Eigen::Index j = 0; j < refs.rows(); ++j) {
    if (exclude_self && j == i) continue;
    const double sq = row_sq(queries, i, refs, j);
    if (best.index < 0 || sq < best_sq) {
      best.index = j;
      best_sq = sq;
    }
  }
  best.distance = std::sqrt(best_sq);
  return best;
}

inline std::uint32_t code_distance(const std::uint64_t* a, const std::uint64_t* b,
                                   std::size_t words) {
  std::uint32_t d = 0;
  for (std::size_t w = 0; w < words; ++w) d += std::popcount(a[w] ^ b[w]);
  return d;
}

void check_nn_shapes(const Matrix& queries, const Matrix& refs, bool exclude_self) {
  if (queries.cols() != refs.cols()) {
    throw Error(ErrorKind::kShapeMismatch, "query and reference dimensions differ");
  }
  if (exclude_self && queries.rows() != refs.rows()) {
    throw Error(ErrorKind::kShapeMismatch, "self-exclusion needs queries == refs");
  }
  const Eigen::Index usable = refs.rows() - (exclude_self ? 1 : 0);
  if (usable < 1) {
    throw Error(ErrorKind::kBatchTooSmall, "no reference rows to search");
  }
}

void check_scan(std::span<const std::uint64_t> codes, std::size_t words,
                std::span<const std::uint64_t> query, std::span<std::uint32_t> out) {
  if (query.size() != words || codes.size() != words * out.size()) {
    throw Error(ErrorKind::kLengthMismatch, "code buffer sizes disagree");
  }
}

}  // namespace

Matrix pairwise_l1_serial(const Matrix& z) {
  const Eigen::Index n = z.rows();
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = row_l1(z, i, z, j);
  }
  return out;
}

Matrix pairwise_l1_parallel(const Matrix& z) {
  const Eigen::Index n = z.rows();
  Matrix out(n, n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = row_l1(z, i, z, j);
  }
  return out;
}

Matrix pairwise_l1(const Matrix& z, ExecPolicy policy) {
  return policy == ExecPolicy::kSerial ? pairwise_l1_serial(z) : pairwise_l1_parallel(z);
}

std::vector<Neighbor> nearest_neighbors_serial(const Matrix& queries, const Matrix& refs,
                                               bool exclude_self) {
  check_nn_shapes(queries, refs, exclude_self);
  std::vector<Neighbor> out(queries.rows());
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    out[i] = nearest_row(queries, i, refs, exclude_self);
  }
  return out;
}

std::vector<Neighbor> nearest_neighbors_parallel(const Matrix& queries, const Matrix& refs,
                                                 bool exclude_self) {
  check_nn_shapes(queries, refs, exclude_self);
  std::vector<Neighbor> out(queries.rows());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    out[i] = nearest_row(queries, i, refs, exclude_self);
  }
  return out;
}

std::vector<Neighbor> nearest_neighbors(const Matrix& queries, const Matrix& refs,
                                        bool exclude_self, ExecPolicy policy) {
  return policy == ExecPolicy::kSerial
             ? nearest_neighbors_serial(queries, refs, exclude_self)
             : nearest_neighbors_parallel(queries, refs, exclude_self);
}

void hamming_scan_serial(std::span<const std::uint64_t> codes, std::size_t words,
                         std::span<const std::uint64_t> query, std::span<std::uint32_t> out) {
  check_scan(codes, words, query, out);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = code_distance(codes.data() + i * words, query.data(), words);
  }
}

void hamming_scan_parallel(std::span<const std::uint64_t> codes, std::size_t words,
                           std::span<const std::uint64_t> query, std::span<std::uint32_t> out) {
  check_scan(codes, words, query, out);
  const auto n = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = code_distance(codes.data() + i * words, query.data(), words);
  }
}

void hamming_scan(std::span<const std::uint64_t> codes, std::size_t words,
                  std::span<const std::uint64_t> query, std::span<std::uint32_t> out,
                  ExecPolicy policy) {
  if (policy == ExecPolicy::kSerial) {
    hamming_scan_serial(codes, words, query, out);
  } else {
    hamming_scan_parallel(codes, words, query, out);
  }
}

void l1_scan_serial(const Matrix& rows, std::span<const double> query, std::span<double> out) {
  if (static_cast<Eigen::Index>(query.size()) != rows.cols() ||
      static_cast<Eigen::Index>(out.size()) != rows.rows()) {
    throw Error(ErrorKind::kShapeMismatch, "l1 scan sizes disagree");
  }
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < rows.cols(); ++k) s += std::abs(rows(i, k) - query[k]);
    out[i] = s;
  }
}

void l1_scan_parallel(const Matrix& rows, std::span<const double> query, std::span<double> out) {
  if (static_cast<Eigen::Index>(query.size()) != rows.cols() ||
      static_cast<Eigen::Index>(out.size()) != rows.rows()) {
    throw Error(ErrorKind::kShapeMismatch, "l1 scan sizes disagree");
  }
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < rows.cols(); ++k) s += std::abs(rows(i, k) - query[k]);
    out[i] = s;
  }
}

void l1_scan(const Matrix& rows, std::span<const double> query, std::span<double> out,
             ExecPolicy policy) {
  if (policy == ExecPolicy::kSerial) {
    l1_scan_serial(rows, query, out);
  } else {
    l1_scan_parallel(rows, query, out);
  }
}

}  // namespace semhash::kernels
