#include "recharness/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace recharness::kernels {

namespace {

void check_shape(std::span<const double> rows, std::size_t dim,
                 std::span<const double> query, std::span<double> out) {
  if (query.size() != dim || rows.size() != out.size() * dim) {
    throw std::invalid_argument("kernels: shape mismatch");
  }
}

inline double row_dot(const double* row, const double* q, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t k = 0; k < dim; ++k) acc += row[k] * q[k];
  return acc;
}

inline double row_cosine(const double* row, const double* q, std::size_t dim,
                         double qnorm) {
  double acc = 0.0;
  double rn = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    acc += row[k] * q[k];
    rn += row[k] * row[k];
  }
  if (rn == 0.0 || qnorm == 0.0) return 0.0;
  return acc / (std::sqrt(rn) * qnorm);
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  return row_dot(a.data(), b.data(), a.size());
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void dot_scores_serial(std::span<const double> rows, std::size_t dim,
                       std::span<const double> query, std::span<double> out) {
  check_shape(rows, dim, query, out);
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r] = row_dot(rows.data() + r * dim, query.data(), dim);
  }
}

void dot_scores_omp(std::span<const double> rows, std::size_t dim,
                    std::span<const double> query, std::span<double> out) {
  check_shape(rows, dim, query, out);
  const auto n = static_cast<std::ptrdiff_t>(out.size());
  const double* base = rows.data();
  const double* q = query.data();
  double* dst = out.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    dst[r] = row_dot(base + static_cast<std::size_t>(r) * dim, q, dim);
  }
}

void cosine_scores_serial(std::span<const double> rows, std::size_t dim,
                          std::span<const double> query, std::span<double> out) {
  check_shape(rows, dim, query, out);
  const double qnorm = norm(query);
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r] = row_cosine(rows.data() + r * dim, query.data(), dim, qnorm);
  }
}

void cosine_scores_omp(std::span<const double> rows, std::size_t dim,
                       std::span<const double> query, std::span<double> out) {
  check_shape(rows, dim, query, out);
  const double qnorm = norm(query);
  const auto n = static_cast<std::ptrdiff_t>(out.size());
  const double* base = rows.data();
  const double* q = query.data();
  double* dst = out.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    dst[r] = row_cosine(base + static_cast<std::size_t>(r) * dim, q, dim, qnorm);
  }
}

void dot_scores(std::span<const double> rows, std::size_t dim,
                std::span<const double> query, std::span<double> out) {
  if (out.size() >= kParallelRowThreshold) {
    dot_scores_omp(rows, dim, query, out);
  } else {
    dot_scores_serial(rows, dim, query, out);
  }
}

void cosine_scores(std::span<const double> rows, std::size_t dim,
                   std::span<const double> query, std::span<double> out) {
  if (out.size() >= kParallelRowThreshold) {
    cosine_scores_omp(rows, dim, query, out);
  } else {
    cosine_scores_serial(rows, dim, query, out);
  }
}

}  // namespace recharness::kernels
