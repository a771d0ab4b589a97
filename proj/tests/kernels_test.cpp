#include <doctest.h>

#include <cmath>

#include "semhash/kernels.hpp"
#include "test_util.hpp"

using namespace semhash;

TEST_CASE("pairwise_l1: serial matches a direct loop and parallel matches serial bitwise") {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix z = testutil::uniform_matrix(2 + static_cast<Eigen::Index>(rng.below(60)),
                                              1 + static_cast<Eigen::Index>(rng.below(20)), rng);
    const Matrix serial = kernels::pairwise_l1_serial(z);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      for (Eigen::Index j = 0; j < z.rows(); ++j) {
        CHECK(serial(i, j) == doctest::Approx((z.row(i) - z.row(j)).cwiseAbs().sum()));
      }
    }
    CHECK(testutil::bit_equal(serial, kernels::pairwise_l1_parallel(z)));
  }
}

TEST_CASE("nearest_neighbors: lowest index wins ties, self exclusion") {
  Matrix refs(3, 1);
  refs << 0.0, 2.0, 2.0;
  Matrix q(1, 1);
  q << 1.0;
  const auto nn = kernels::nearest_neighbors_serial(q, refs, false);
  CHECK(nn[0].index == 0);
  CHECK(nn[0].distance == 1.0);

  const auto self = kernels::nearest_neighbors_serial(refs, refs, true);
  CHECK(self[0].index == 1);
  CHECK(self[1].index == 2);
  CHECK(self[1].distance == 0.0);
  CHECK(self[2].index == 1);
}

TEST_CASE("nearest_neighbors: brute-force agreement and serial/parallel identity") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.below(16));
    const Matrix z = testutil::uniform_matrix(2 + static_cast<Eigen::Index>(rng.below(50)), k, rng);
    const Matrix t = testutil::uniform_matrix(1 + static_cast<Eigen::Index>(rng.below(50)), k, rng);
    for (bool self : {false, true}) {
      const Matrix& refs = self ? z : t;
      const auto a = kernels::nearest_neighbors_serial(z, refs, self);
      const auto b = kernels::nearest_neighbors_parallel(z, refs, self);
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        double best = INFINITY;
        for (Eigen::Index j = 0; j < refs.rows(); ++j) {
          if (self && i == j) continue;
          best = std::min(best, (z.row(i) - refs.row(j)).norm());
        }
        CHECK(a[i].distance == doctest::Approx(best));
        CHECK(a[i].index == b[i].index);
        CHECK(a[i].distance == b[i].distance);
      }
    }
  }
}

TEST_CASE("nearest_neighbors errors") {
  Matrix one(1, 2);
  one.setZero();
  CHECK_THROWS_KIND(kernels::nearest_neighbors(one, one, true, ExecPolicy::kSerial),
                    ErrorKind::kBatchTooSmall);
  CHECK_THROWS_KIND(kernels::nearest_neighbors(one, Matrix::Zero(2, 3), false, ExecPolicy::kSerial),
                    ErrorKind::kShapeMismatch);
}

TEST_CASE("hamming_scan and l1_scan: serial/parallel identity") {
  Rng rng(3);
  const std::size_t words = 3, n = 500;
  std::vector<std::uint64_t> codes(words * n), query(words);
  for (auto& w : codes) w = rng.next_u64();
  for (auto& w : query) w = rng.next_u64();
  std::vector<std::uint32_t> a(n), b(n);
  kernels::hamming_scan_serial(codes, words, query, a);
  kernels::hamming_scan_parallel(codes, words, query, b);
  CHECK(a == b);
  CHECK_THROWS_KIND(kernels::hamming_scan_serial(codes, 2, query, a), ErrorKind::kLengthMismatch);

  const Matrix rows = testutil::uniform_matrix(300, 7, rng);
  std::vector<double> q(7), da(300), db(300);
  for (auto& v : q) v = rng.uniform();
  kernels::l1_scan_serial(rows, q, da);
  kernels::l1_scan_parallel(rows, q, db);
  CHECK(da == db);
}
