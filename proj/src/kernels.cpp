#include "qgrace/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qgrace::kernels {

namespace {

void check_spmm(const CsrMatrix& a, const Matrix& x) {
  if (x.rows() != a.n) throw std::invalid_argument("spmm: operand rows do not match matrix");
}

inline void spmm_row(const CsrMatrix& a, const Matrix& x, Matrix& y, std::size_t r) {
  auto out = y.row(r);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t e = a.row_ptr[r]; e < a.row_ptr[r + 1]; ++e) {
    axpy(a.val[e], x.row(a.col[e]), out);
  }
}

inline void potential_row(const Matrix& unit, PotentialRows& out, std::size_t a) {
  const std::size_t n = unit.rows();
  const std::size_t d = unit.cols();
  auto xa = unit.row(a);
  auto pull = out.pull.row(a);
  double pot = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    if (b == a) continue;
    auto xb = unit.row(b);
    double dist2 = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = xa[c] - xb[c];
      dist2 += diff * diff;
    }
    const double w = std::exp(-2.0 * dist2);
    pot += w;
    for (std::size_t c = 0; c < d; ++c) pull[c] += w * (xa[c] - xb[c]);
  }
  out.potential[a] = pot;
}

PotentialRows make_potential(const Matrix& unit) {
  return PotentialRows{std::vector<double>(unit.rows(), 0.0), Matrix(unit.rows(), unit.cols())};
}

struct Scored {
  double score;
  std::uint32_t item;
};

inline bool ranks_before(const Scored& a, const Scored& b) {
  return a.score > b.score || (a.score == b.score && a.item < b.item);
}

std::vector<std::uint32_t> top_k_one(const Matrix& user_unit, const Matrix& item_unit,
                                     std::uint32_t u, const std::vector<std::uint32_t>& exclude,
                                     std::size_t k, std::vector<Scored>& scratch) {
  scratch.clear();
  auto zu = user_unit.row(u);
  auto skip = exclude.begin();
  for (std::uint32_t i = 0; i < item_unit.rows(); ++i) {
    while (skip != exclude.end() && *skip < i) ++skip;
    if (skip != exclude.end() && *skip == i) continue;
    scratch.push_back({dot(zu, item_unit.row(i)), i});
  }
  const auto keep = std::min(k, scratch.size());
  std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(keep),
                    scratch.end(), ranks_before);
  std::vector<std::uint32_t> out(keep);
  for (std::size_t r = 0; r < keep; ++r) out[r] = scratch[r].item;
  return out;
}

void check_top_k(const Matrix& user_unit, const Matrix& item_unit,
                 std::span<const std::uint32_t> users,
                 std::span<const std::vector<std::uint32_t>> exclude) {
  if (user_unit.cols() != item_unit.cols()) throw std::invalid_argument("top_k: dim mismatch");
  if (exclude.size() != user_unit.rows()) {
    throw std::invalid_argument("top_k: need one exclude list per user row");
  }
  for (auto u : users) {
    if (u >= user_unit.rows()) throw std::invalid_argument("top_k: user out of range");
  }
}

}  // namespace

namespace serial {

void spmm(const CsrMatrix& a, const Matrix& x, Matrix& y) {
  check_spmm(a, x);
  y = Matrix(a.n, x.cols());
  for (std::size_t r = 0; r < a.n; ++r) spmm_row(a, x, y, r);
}

PotentialRows pairwise_potential(const Matrix& unit) {
  auto out = make_potential(unit);
  for (std::size_t a = 0; a < unit.rows(); ++a) potential_row(unit, out, a);
  return out;
}

std::vector<std::vector<std::uint32_t>> top_k(const Matrix& user_unit, const Matrix& item_unit,
                                              std::span<const std::uint32_t> users,
                                              std::span<const std::vector<std::uint32_t>> exclude,
                                              std::size_t k) {
  check_top_k(user_unit, item_unit, users, exclude);
  std::vector<std::vector<std::uint32_t>> out(users.size());
  std::vector<Scored> scratch;
  for (std::size_t j = 0; j < users.size(); ++j) {
    out[j] = top_k_one(user_unit, item_unit, users[j], exclude[users[j]], k, scratch);
  }
  return out;
}

}  // namespace serial

namespace parallel {

void spmm(const CsrMatrix& a, const Matrix& x, Matrix& y) {
  check_spmm(a, x);
  y = Matrix(a.n, x.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.n);
#pragma omp parallel for schedule(dynamic, 256)
  for (std::ptrdiff_t r = 0; r < n; ++r) spmm_row(a, x, y, static_cast<std::size_t>(r));
}

PotentialRows pairwise_potential(const Matrix& unit) {
  auto out = make_potential(unit);
  const auto n = static_cast<std::ptrdiff_t>(unit.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t a = 0; a < n; ++a) potential_row(unit, out, static_cast<std::size_t>(a));
  return out;
}

std::vector<std::vector<std::uint32_t>> top_k(const Matrix& user_unit, const Matrix& item_unit,
                                              std::span<const std::uint32_t> users,
                                              std::span<const std::vector<std::uint32_t>> exclude,
                                              std::size_t k) {
  check_top_k(user_unit, item_unit, users, exclude);
  std::vector<std::vector<std::uint32_t>> out(users.size());
  const auto count = static_cast<std::ptrdiff_t>(users.size());
#pragma omp parallel
  {
    std::vector<Scored> scratch;
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t j = 0; j < count; ++j) {
      const auto u = users[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(j)] = top_k_one(user_unit, item_unit, u, exclude[u], k, scratch);
    }
  }
  return out;
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace qgrace::kernels
