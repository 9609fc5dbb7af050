#pragma once

// Data-parallel inner loops. Every kernel has a serial reference in
// `kernels::serial` and an OpenMP version in `kernels::parallel` that
// produces bit-identical output: each output row is computed by exactly one
// thread with the same summation order as the serial loop, and any
// cross-row reduction is finished single-threaded in index order.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qgrace/matrix.hpp"

namespace qgrace::kernels {

/// Square sparse matrix in compressed sparse row layout.
struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;  // n + 1 entries
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  std::size_t nnz() const { return col.size(); }
};

/// Pairwise Gaussian potentials over a set of unit vectors, per row:
///   potential[a] = sum_{b != a} exp(-2 |x_a - x_b|^2)
///   pull.row(a)  = sum_{b != a} exp(-2 |x_a - x_b|^2) (x_a - x_b)
struct PotentialRows {
  std::vector<double> potential;
  Matrix pull;
};

namespace serial {
/// y = a * x. `y` is resized to x's shape.
void spmm(const CsrMatrix& a, const Matrix& x, Matrix& y);
PotentialRows pairwise_potential(const Matrix& unit);
/// Top-`k` items per user by descending score user_unit.row(u) . item_unit.row(i),
/// skipping the user's sorted `exclude` list; ties go to the smaller item index.
std::vector<std::vector<std::uint32_t>> top_k(const Matrix& user_unit, const Matrix& item_unit,
                                              std::span<const std::uint32_t> users,
                                              std::span<const std::vector<std::uint32_t>> exclude,
                                              std::size_t k);
}  // namespace serial

namespace parallel {
void spmm(const CsrMatrix& a, const Matrix& x, Matrix& y);
PotentialRows pairwise_potential(const Matrix& unit);
std::vector<std::vector<std::uint32_t>> top_k(const Matrix& user_unit, const Matrix& item_unit,
                                              std::span<const std::uint32_t> users,
                                              std::span<const std::vector<std::uint32_t>> exclude,
                                              std::size_t k);
}  // namespace parallel

/// Worker threads available to the parallel kernels (1 without OpenMP).
int max_threads();

}  // namespace qgrace::kernels
