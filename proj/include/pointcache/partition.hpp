#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "pointcache/error.hpp"
#include "pointcache/numeric.hpp"
#include "pointcache/random.hpp"

namespace pointcache {

inline constexpr std::size_t kDefaultParts = 3;
inline constexpr std::size_t kKMeansMaxIterations = 100;

struct KMeansResult {
  // Cluster means before renormalization, one row per cluster.
  Matrix centers;
  // Cluster index per input row, in the caller's row order.
  std::vector<std::size_t> assignment;
  // Objective after every assignment step, starting with the initial seeding.
  std::vector<double> objective;
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

// Nearest center per row (lowest center index on ties); returns the objective.
inline double assign_rows(const Matrix& rows, const Matrix& centers,
                          std::vector<std::size_t>& assignment) {
  double objective = 0.0;
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    std::size_t best = 0;
    double best_dist = squared_distance(rows.row(r), centers.row(0));
    for (std::size_t c = 1; c < centers.rows(); ++c) {
      const double d = squared_distance(rows.row(r), centers.row(c));
      if (d < best_dist) {
        best_dist = d;
        best = c;
      }
    }
    assignment[r] = best;
    objective += best_dist;
  }
  return objective;
}

inline Matrix kmeanspp_seed(const Matrix& rows, std::size_t clusters, Rng& rng) {
  const std::size_t n = rows.rows();
  Matrix centers(clusters, rows.cols());
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.index(n);
  for (std::size_t c = 0; c < clusters; ++c) {
    std::copy(rows.row(pick).begin(), rows.row(pick).end(), centers.row(c).begin());
    if (c + 1 == clusters) break;
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      nearest[r] = std::min(nearest[r], squared_distance(rows.row(r), centers.row(c)));
      total += nearest[r];
    }
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double running = 0.0;
      pick = n;
      for (std::size_t r = 0; r < n; ++r) {
        if (nearest[r] == 0.0) continue;
        pick = r;
        running += nearest[r];
        if (running > target) break;
      }
    } else {
      // Every row coincides with a chosen center.
      pick = rng.index(n);
    }
  }
  return centers;
}

// Lexicographic order over row values, so the result does not depend on the
// order the caller listed the rows in.
inline std::vector<std::size_t> canonical_order(const Matrix& rows) {
  std::vector<std::size_t> order(rows.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = rows.row(a);
    const auto rb = rows.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  return order;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding under squared Euclidean distance.
// Runs on the rows in canonical order, stops when assignments stop changing or
// after kKMeansMaxIterations updates. An empty cluster is re-seeded at the row
// farthest from its current center.
inline KMeansResult kmeans(const Matrix& input, std::size_t clusters, std::uint64_t seed) {
  if (input.rows() == 0) throw DegenerateInputError("kmeans: no rows");
  if (clusters == 0) throw ParameterError("kmeans: cluster count must be >= 1");
  clusters = std::min(clusters, input.rows());

  const auto order = detail::canonical_order(input);
  Matrix rows(input.rows(), input.cols());
  for (std::size_t r = 0; r < order.size(); ++r)
    std::copy(input.row(order[r]).begin(), input.row(order[r]).end(), rows.row(r).begin());

  Rng rng(seed);
  KMeansResult out;
  out.centers = detail::kmeanspp_seed(rows, clusters, rng);
  std::vector<std::size_t> assignment(rows.rows());
  out.objective.push_back(detail::assign_rows(rows, out.centers, assignment));

  std::vector<std::size_t> next(rows.rows());
  std::vector<std::size_t> sizes(clusters);
  while (out.iterations < kKMeansMaxIterations) {
    ++out.iterations;
    std::fill(sizes.begin(), sizes.end(), 0);
    Matrix sums(clusters, rows.cols());
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      ++sizes[assignment[r]];
      auto dst = sums.row(assignment[r]);
      const auto src = rows.row(r);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
    for (std::size_t c = 0; c < clusters; ++c) {
      if (sizes[c] == 0) continue;
      auto dst = out.centers.row(c);
      const auto src = sums.row(c);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] / static_cast<double>(sizes[c]);
    }
    std::vector<bool> reseeded(rows.rows(), false);
    for (std::size_t c = 0; c < clusters; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = 0;
      double far_dist = -1.0;
      for (std::size_t r = 0; r < rows.rows(); ++r) {
        if (reseeded[r]) continue;
        const double d = detail::squared_distance(rows.row(r), out.centers.row(assignment[r]));
        if (d > far_dist) {
          far_dist = d;
          far = r;
        }
      }
      reseeded[far] = true;
      std::copy(rows.row(far).begin(), rows.row(far).end(), out.centers.row(c).begin());
    }
    out.objective.push_back(detail::assign_rows(rows, out.centers, next));
    if (next == assignment) {
      out.converged = true;
      break;
    }
    assignment.swap(next);
  }
  if (!out.converged) {
    // Iteration cap: finish with the means of the final assignment.
    std::fill(sizes.begin(), sizes.end(), 0);
    Matrix sums(clusters, rows.cols());
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      ++sizes[assignment[r]];
      auto dst = sums.row(assignment[r]);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += rows(r, i);
    }
    for (std::size_t c = 0; c < clusters; ++c)
      if (sizes[c] != 0)
        for (std::size_t i = 0; i < rows.cols(); ++i)
          out.centers(c, i) = sums(c, i) / static_cast<double>(sizes[c]);
  }

  out.assignment.resize(rows.rows());
  for (std::size_t r = 0; r < order.size(); ++r) out.assignment[order[r]] = assignment[r];
  return out;
}

struct PartSummary {
  Matrix centers;

  std::size_t parts() const noexcept { return centers.rows(); }
};

// Summarize a sample's patch features into at most `parts` unit-norm centers.
// With parts >= P every patch is its own part.
inline PartSummary summarize_parts(const Matrix& patches, std::size_t parts, std::uint64_t seed) {
  if (patches.rows() == 0) throw DegenerateInputError("summarize_parts: no patches");
  if (parts == 0) throw ParameterError("summarize_parts: parts must be >= 1");
  PartSummary out;
  if (parts >= patches.rows()) {
    out.centers = patches;
    normalize_rows(out.centers);
    return out;
  }
  const KMeansResult clustering = kmeans(patches, parts, seed);
  out.centers = clustering.centers;
  for (std::size_t c = 0; c < out.centers.rows(); ++c) {
    auto center = out.centers.row(c);
    if (l2_norm(center) < 1e-12) {
      // Members cancel out (e.g. antipodal rows); fall back to the first member.
      const auto first = std::find(clustering.assignment.begin(), clustering.assignment.end(), c);
      const auto member = patches.row(static_cast<std::size_t>(first - clustering.assignment.begin()));
      std::copy(member.begin(), member.end(), center.begin());
    }
  }
  normalize_rows(out.centers);
  return out;
}

}  // namespace pointcache
