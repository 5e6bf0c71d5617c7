#pragma once

// Data-parallel scoring kernels. Each kernel has a serial reference
// implementation (kept for testing and as the single-thread fallback) and an
// OpenMP version that must produce bit-identical output: every output element
// is computed by exactly one thread with the same operation order.

#include <cstddef>
#include <span>

namespace recharness::kernels {

/// out[r] = dot(rows[r*dim .. r*dim+dim), query) for every row.
void dot_scores_serial(std::span<const double> rows, std::size_t dim,
                       std::span<const double> query, std::span<double> out);
void dot_scores_omp(std::span<const double> rows, std::size_t dim,
                    std::span<const double> query, std::span<double> out);

/// Cosine similarity of each row against `query`; zero-norm rows or a
/// zero-norm query give 0.
void cosine_scores_serial(std::span<const double> rows, std::size_t dim,
                          std::span<const double> query, std::span<double> out);
void cosine_scores_omp(std::span<const double> rows, std::size_t dim,
                       std::span<const double> query, std::span<double> out);

/// Rows below this count are scored serially; OpenMP start-up dominates.
inline constexpr std::size_t kParallelRowThreshold = 2048;

/// Dispatches to the OpenMP kernel for large inputs.
void dot_scores(std::span<const double> rows, std::size_t dim,
                std::span<const double> query, std::span<double> out);
void cosine_scores(std::span<const double> rows, std::size_t dim,
                   std::span<const double> query, std::span<double> out);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

}  // namespace recharness::kernels
