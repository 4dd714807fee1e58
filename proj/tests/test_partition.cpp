#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "pointcache/partition.hpp"
#include "support.hpp"

using namespace pointcache;
using namespace testing_support;

namespace {

std::vector<Vector> sorted_rows(const Matrix& m) {
  std::vector<Vector> rows;
  for (std::size_t r = 0; r < m.rows(); ++r) rows.emplace_back(m.row(r).begin(), m.row(r).end());
  std::sort(rows.begin(), rows.end());
  return rows;
}

void expect_same_rows(const Matrix& a, const Matrix& b) {
  const auto ra = sorted_rows(a), rb = sorted_rows(b);
  ASSERT_EQ(ra.size(), rb.size());
  for (std::size_t r = 0; r < ra.size(); ++r)
    for (std::size_t i = 0; i < ra[r].size(); ++i) EXPECT_NEAR(ra[r][i], rb[r][i], 1e-12);
}

// Rows near a few random directions, so clusters are meaningful.
Matrix clustered_rows(Rng& rng, std::size_t n, std::size_t dim, std::size_t groups) {
  const Matrix centers = random_unit_rows(rng, groups, dim);
  Matrix out(n, dim);
  for (std::size_t r = 0; r < n; ++r) {
    const auto c = centers.row(rng.index(groups));
    Vector v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = c[i] + 0.3 * rng.normal() / std::sqrt(dim);
    v = l2_normalize(v);
    std::copy(v.begin(), v.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace

TEST(SummarizeParts, FewerRowsThanParts) {
  const Matrix rows = Matrix::from_rows({{3, 4}, {0, 2}});
  const PartSummary s = summarize_parts(rows, 3, 0);
  ASSERT_EQ(s.parts(), 2u);
  expect_same_rows(s.centers, Matrix::from_rows({{0.6, 0.8}, {0, 1}}));
}

TEST(SummarizeParts, SingleClusterIsNormalizedMean) {
  Rng rng(1);
  const Matrix rows = random_unit_rows(rng, 10, 6);
  Vector mean(6, 0.0);
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t i = 0; i < 6; ++i) mean[i] += rows(r, i) / 10;
  const Vector want = l2_normalize(mean);
  const PartSummary s = summarize_parts(rows, 1, 9);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(s.centers(0, i), want[i], 1e-12);
}

TEST(SummarizeParts, AntipodalGroups) {
  const Vector u = l2_normalize(Vector{1, 2, 2});
  Vector v = u;
  for (double& x : v) x = -x;
  const Matrix rows = Matrix::from_rows({u, v, u, v, u, v});
  // Exhaustive check over all 2-labelings: the optimum splits u from v.
  double best = 1e300;
  for (unsigned mask = 1; mask < (1u << 6) - 1; ++mask) {
    double obj = 0;
    for (unsigned side = 0; side < 2; ++side) {
      Vector mean(3, 0.0);
      std::size_t n = 0;
      for (std::size_t r = 0; r < 6; ++r)
        if (((mask >> r) & 1u) == side) {
          ++n;
          for (std::size_t i = 0; i < 3; ++i) mean[i] += rows(r, i);
        }
      for (double& x : mean) x /= static_cast<double>(n);
      for (std::size_t r = 0; r < 6; ++r)
        if (((mask >> r) & 1u) == side) obj += detail::squared_distance(rows.row(r), mean);
    }
    best = std::min(best, obj);
  }
  EXPECT_NEAR(best, 0.0, 1e-12);
  const PartSummary s = summarize_parts(rows, 2, 4);
  expect_same_rows(s.centers, Matrix::from_rows({u, v}));
}

TEST(SummarizeParts, Errors) {
  EXPECT_THROW(summarize_parts(Matrix(0, 4), 3, 0), DegenerateInputError);
  EXPECT_THROW(summarize_parts(Matrix(4, 4, 1.0), 0, 0), ParameterError);
}

TEST(KMeans, ObjectiveNonIncreasingAndCentersAreMeans) {
  Rng rng(21);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rng.index(40);
    const std::size_t k = 1 + rng.index(std::min<std::size_t>(n, 6));
    const Matrix rows = clustered_rows(rng, n, 4 + rng.index(8), 1 + rng.index(5));
    const KMeansResult r = kmeans(rows, k, rng.next_u64());
    for (std::size_t i = 1; i < r.objective.size(); ++i)
      EXPECT_LE(r.objective[i], r.objective[i - 1] + 1e-12);
    for (std::size_t c = 0; c < k; ++c) {
      Vector mean(rows.cols(), 0.0);
      std::size_t members = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (r.assignment[i] == c) {
          ++members;
          for (std::size_t j = 0; j < rows.cols(); ++j) mean[j] += rows(i, j);
        }
      if (members == 0) continue;
      for (std::size_t j = 0; j < rows.cols(); ++j)
        EXPECT_NEAR(r.centers(c, j), mean[j] / static_cast<double>(members), 1e-6);
    }
  }
}

TEST(KMeans, PermutationInvariantAndDeterministic) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 3 + rng.index(30);
    const Matrix rows = clustered_rows(rng, n, 8, 3);
    const std::uint64_t seed = rng.next_u64();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    Matrix shuffled(n, 8);
    for (std::size_t i = 0; i < n; ++i)
      std::copy(rows.row(perm[i]).begin(), rows.row(perm[i]).end(), shuffled.row(i).begin());
    const PartSummary a = summarize_parts(rows, 3, seed);
    const PartSummary b = summarize_parts(shuffled, 3, seed);
    expect_same_rows(a.centers, b.centers);
    EXPECT_EQ(a.centers, summarize_parts(rows, 3, seed).centers);
    for (std::size_t c = 0; c < a.parts(); ++c) EXPECT_NEAR(l2_norm(a.centers.row(c)), 1.0, 1e-12);
  }
}
