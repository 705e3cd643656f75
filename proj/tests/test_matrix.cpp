// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "errors.hpp"
#include "matrix.hpp"
#include "test_util.hpp"

using namespace grusnf;
using grusnf::testing::max_abs_diff;
using grusnf::testing::random_matrix;

TEST_CASE("matmul hand examples") {
  const DenseMatrix a{{1, 2}, {3, 4}};
  CHECK(matmul(DenseMatrix::identity(2), a) == a);
  CHECK(matmul(a, DenseMatrix{{1}, {1}}) == DenseMatrix{{3}, {7}});
  CHECK(matmul(a, DenseMatrix(2, 3)) == DenseMatrix(2, 3));
}

TEST_CASE("matmul shape mismatch") {
  CHECK_THROWS_AS(matmul(DenseMatrix(2, 3), DenseMatrix(2, 3)), ShapeError);
  CHECK_THROWS_AS(add(DenseMatrix(2, 3), DenseMatrix(3, 2)), ShapeError);
  CHECK_THROWS_AS(add_row(DenseMatrix(2, 3), DenseMatrix(1, 2)), ShapeError);
}

TEST_CASE("matmul is associative on random triples") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> dim(1, 7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = dim(rng), k = dim(rng), l = dim(rng), n = dim(rng);
    const DenseMatrix a = random_matrix(rng, m, k), b = random_matrix(rng, k, l),
                      c = random_matrix(rng, l, n);
    CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) < 1e-9);
  }
}

TEST_CASE("transposed products agree with explicit transpose") {
  std::mt19937_64 rng(12);
  const DenseMatrix a = random_matrix(rng, 4, 3), b = random_matrix(rng, 4, 5);
  CHECK(max_abs_diff(matmul_tn(a, b), matmul(transpose(a), b)) < 1e-14);
  const DenseMatrix c = random_matrix(rng, 6, 3);
  CHECK(max_abs_diff(matmul_nt(a, c), matmul(a, transpose(c))) < 1e-14);
}

TEST_CASE("batched matmul equals row-by-row matmul bitwise") {
  std::mt19937_64 rng(13);
  const DenseMatrix x = random_matrix(rng, 9, 5), w = random_matrix(rng, 5, 7);
  const DenseMatrix all = matmul(x, w);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const DenseMatrix one = matmul(DenseMatrix::row(x.row_span(r)), w);
    for (std::size_t c = 0; c < w.cols(); ++c) CHECK(one(0, c) == all(r, c));
  }
}

TEST_CASE("elementwise kernels") {
  const DenseMatrix a{{-1, 0, 2}};
  CHECK(abs(a) == DenseMatrix{{1, 0, 2}});
  CHECK(square(a) == DenseMatrix{{1, 0, 4}});
  CHECK(scale(a, 2.0) == DenseMatrix{{-2, 0, 4}});
  CHECK(shift(a, 1.0) == DenseMatrix{{0, 1, 3}});
  CHECK(sigmoid(DenseMatrix{{0}})(0, 0) == 0.5);
  CHECK(sigmoid(DenseMatrix{{-800}})(0, 0) == doctest::Approx(0.0));
  CHECK(sigmoid(DenseMatrix{{800}})(0, 0) == 1.0);
  CHECK(row_sum(DenseMatrix{{1, 2}, {3, 4}}) == DenseMatrix{{3}, {7}});
  CHECK(sum(DenseMatrix{{1, 2}, {3, 4}}) == DenseMatrix{{10}});
  CHECK(add_row(DenseMatrix{{1, 2}, {3, 4}}, DenseMatrix{{10, 20}}) ==
        DenseMatrix{{11, 22}, {13, 24}});
}

TEST_CASE("gather and scatter columns are inverse") {
  const DenseMatrix a{{1, 2, 3, 4, 5}};
  const std::vector<std::size_t> even{0, 2, 4}, odd{1, 3};
  const DenseMatrix e = gather_cols(a, even), o = gather_cols(a, odd);
  CHECK(e == DenseMatrix{{1, 3, 5}});
  CHECK(scatter_cols(e, even, o, odd, 5) == a);
  CHECK(hcat(e, o) == DenseMatrix{{1, 3, 5, 2, 4}});
}

TEST_CASE("norms") {
  const std::vector<double> a{3, 4}, b{0, 0};
  CHECK(squared_norm(a) == 25.0);
  CHECK(euclidean_distance(a, b) == 5.0);
  CHECK(DenseMatrix{{1, 2}}.all_finite());
  CHECK_FALSE(DenseMatrix{{1, std::nan("")}}.all_finite());
}
