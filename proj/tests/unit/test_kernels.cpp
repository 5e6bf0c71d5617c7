#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "recharness/common.hpp"
#include "recharness/kernels.hpp"

using namespace recharness;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST(Kernels, OmpMatchesSerialBitForBit) {
  const std::size_t rows = 5000, dim = 17;
  auto m = random_vec(rows * dim, 1);
  for (std::size_t d = 0; d < dim; ++d) m[42 * dim + d] = 0.0;  // a zero row
  const auto q = random_vec(dim, 2);
  std::vector<double> a(rows), b(rows);
  kernels::dot_scores_serial(m, dim, q, a);
  kernels::dot_scores_omp(m, dim, q, b);
  EXPECT_EQ(a, b);
  kernels::cosine_scores_serial(m, dim, q, a);
  kernels::cosine_scores_omp(m, dim, q, b);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a[42], 0.0);
}

TEST(Kernels, CosineMatchesDefinition) {
  const std::size_t dim = 5;
  const auto m = random_vec(3 * dim, 3);
  const auto q = random_vec(dim, 4);
  std::vector<double> out(3);
  kernels::cosine_scores(m, dim, q, out);
  for (std::size_t r = 0; r < 3; ++r) {
    double dot = 0, nr = 0, nq = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      dot += m[r * dim + d] * q[d];
      nr += m[r * dim + d] * m[r * dim + d];
      nq += q[d] * q[d];
    }
    EXPECT_NEAR(out[r], dot / std::sqrt(nr * nq), 1e-12);
  }
}

TEST(Kernels, ZeroQueryGivesZeros) {
  const std::vector<double> m = {1, 2, 3, 4};
  const std::vector<double> q = {0, 0};
  std::vector<double> out(2, 7.0);
  kernels::cosine_scores(m, 2, q, out);
  EXPECT_EQ(out, (std::vector<double>{0.0, 0.0}));
}
