#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semhash/common.hpp"

// Data-parallel inner loops shared by the losses, the index and the metrics.
// Every kernel has a `_serial` reference and a `_parallel` OpenMP version that
// assigns each output element to exactly one thread and evaluates it in the
// same order as the reference, so the two agree bit for bit.
namespace semhash::kernels {

/// out(i, j) = sum_k |z(i, k) - z(j, k)|.
Matrix pairwise_l1_serial(const Matrix& z);
Matrix pairwise_l1_parallel(const Matrix& z);
Matrix pairwise_l1(const Matrix& z, ExecPolicy policy);

struct Neighbor {
  Eigen::Index index = -1;
  double distance = 0.0;
};

/// Euclidean nearest row of `refs` for each row of `queries`; the lowest index
/// wins ties. With `exclude_self`, refs row i is skipped for query i (queries
/// and refs are the same batch).
std::vector<Neighbor> nearest_neighbors_serial(const Matrix& queries, const Matrix& refs,
                                               bool exclude_self);
std::vector<Neighbor> nearest_neighbors_parallel(const Matrix& queries, const Matrix& refs,
                                                 bool exclude_self);
std::vector<Neighbor> nearest_neighbors(const Matrix& queries, const Matrix& refs,
                                        bool exclude_self, ExecPolicy policy);

/// Hamming distance from `query` to each of the codes packed contiguously in
/// `codes` (`words` 64-bit words per code).
void hamming_scan_serial(std::span<const std::uint64_t> codes, std::size_t words,
                         std::span<const std::uint64_t> query, std::span<std::uint32_t> out);
void hamming_scan_parallel(std::span<const std::uint64_t> codes, std::size_t words,
                           std::span<const std::uint64_t> query, std::span<std::uint32_t> out);
void hamming_scan(std::span<const std::uint64_t> codes, std::size_t words,
                  std::span<const std::uint64_t> query, std::span<std::uint32_t> out,
                  ExecPolicy policy);

/// Manhattan distance from `query` to every row of `rows`.
void l1_scan_serial(const Matrix& rows, std::span<const double> query, std::span<double> out);
void l1_scan_parallel(const Matrix& rows, std::span<const double> query, std::span<double> out);
void l1_scan(const Matrix& rows, std::span<const double> query, std::span<double> out,
             ExecPolicy policy);

}  // namespace semhash::kernels
